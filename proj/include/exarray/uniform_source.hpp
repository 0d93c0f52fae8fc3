// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "exarray/index.hpp"

namespace exarray {

/// Stafford's variant 13 of the MurmurHash3 finalizer; a bijection on 64 bits
/// with full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic seed derivation: child streams for replications, Monte Carlo
/// redraws and so on. Distinct (parent, tag, index) give unrelated keys.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag, std::uint64_t index = 0) {
  std::uint64_t h = mix64(parent ^ 0x243f6a8885a308d3ULL);
  h = mix64(h ^ (tag * 0x9e3779b97f4a7c15ULL));
  return mix64(h + index * 0xd1b54a32d192ed03ULL + 0x13198a2e03707344ULL);
}

/// 53-bit mantissa uniform in [0, 1).
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// U_A for every finite label set A with |A| <= k_max, realized as a keyed
/// pseudorandom function of (master_seed, length-prefixed sorted labels).
/// U_emptyset is 1.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t master_seed, int k_max = kMaxDimension)
      : seed_(master_seed), k_max_(k_max), key_(mix64(master_seed ^ 0xa4093822299f31d0ULL)) {
    require(k_max >= 1 && k_max <= kMaxDimension, "UniformSource: k_max out of range");
  }

  [[nodiscard]] std::uint64_t master_seed() const { return seed_; }
  [[nodiscard]] int k_max() const { return k_max_; }

  /// Raw 64-bit PRF output for a sorted, duplicate-free label list.
  [[nodiscard]] std::uint64_t bits_sorted(std::span<const Label> sorted) const {
    std::uint64_t h = key_;
    h = mix64(h ^ (0x9e3779b97f4a7c15ULL * (sorted.size() + 1)));
    for (Label l : sorted) h = mix64(h + 0x632be59bd9b4e019ULL * l + 0x85a308d3ULL);
    return mix64(h ^ key_);
  }

  /// Fast path for a singleton and a pair (a < b).
  [[nodiscard]] double single(Label a) const {
    const Label s[1] = {a};
    return to_unit(bits_sorted(s));
  }
  [[nodiscard]] double pair(Label a, Label b) const {
    const Label s[2] = {a, b};
    return to_unit(bits_sorted(s));
  }

  /// Split form of pair(): pair_tail(pair_head(a), b) == pair(a, b).
  [[nodiscard]] std::uint64_t pair_head(Label a) const {
    const std::uint64_t h = mix64(key_ ^ (0x9e3779b97f4a7c15ULL * 3));
    return mix64(h + 0x632be59bd9b4e019ULL * a + 0x85a308d3ULL);
  }
  [[nodiscard]] double pair_tail(std::uint64_t head, Label b) const {
    return to_unit(mix64(mix64(head + 0x632be59bd9b4e019ULL * b + 0x85a308d3ULL) ^ key_));
  }

  /// U_A for labels already sorted and unique; no validation.
  [[nodiscard]] double value_sorted(std::span<const Label> sorted) const {
    if (sorted.empty()) return 1.0;
    return to_unit(bits_sorted(sorted));
  }

  [[nodiscard]] double value(const IndexSet& a) const {
    require(static_cast<int>(a.size()) <= k_max_, "u_value: set larger than k_max");
    return value_sorted(a.labels());
  }

  friend bool operator==(const UniformSource& a, const UniformSource& b) {
    return a.seed_ == b.seed_ && a.k_max_ == b.k_max_;
  }

 private:
  std::uint64_t seed_;
  int k_max_;
  std::uint64_t key_;
};

inline double u_value(const UniformSource& src, const IndexSet& a) { return src.value(a); }

}  // namespace exarray
