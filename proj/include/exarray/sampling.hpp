// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "exarray/index.hpp"
#include "exarray/model.hpp"
#include "exarray/uniform_source.hpp"

namespace exarray {

/// Default refusal threshold for sample_block.
inline constexpr std::uint64_t kDefaultBlockCap = 1u << 22;

/// For every nonempty pattern (canonical order), the sorted labels {i (.) e}^+.
inline std::vector<std::vector<Label>> pattern_sets(std::span<const Label> i) {
  const int k = static_cast<int>(i.size());
  std::vector<std::vector<Label>> out;
  for (Mask e : canonical_masks(k)) {
    if (e == 0) continue;
    std::vector<Label> s;
    for (int slot = 0; slot < k; ++slot)
      if (e & PatternVector::slot_bit(k, slot)) s.push_back(i[slot]);
    std::sort(s.begin(), s.end());
    out.push_back(std::move(s));
  }
  return out;
}

/// Kernel arguments (U_{{i (.) e}^+})_{e != 0} for tuple i.
inline void gather_uniforms(const UniformSource& src, std::span<const Label> i, std::vector<double>& out) {
  require(static_cast<int>(i.size()) <= src.k_max(), "sample_entry: tuple longer than the source's k_max");
  const int k = static_cast<int>(i.size());
  out.clear();
  std::array<Label, kMaxDimension> buf{};
  for (Mask e : canonical_masks(k)) {
    if (e == 0) continue;
    std::size_t n = 0;
    for (int slot = 0; slot < k; ++slot)
      if (e & PatternVector::slot_bit(k, slot)) buf[n++] = i[slot];
    std::sort(buf.begin(), buf.begin() + n);
    out.push_back(src.value_sorted({buf.data(), n}));
  }
}

inline double sample_entry(const ArrayModel& model, const UniformSource& src, const IndexTuple& i) {
  require(i.size() == model.k(), "sample_entry: tuple length differs from model k");
  std::vector<double> u;
  gather_uniforms(src, i.entries(), u);
  return model.kernel(u);
}

/// Every entry of the n-block, keyed by tuple.
inline std::map<IndexTuple, double> sample_block(const ArrayModel& model, const UniformSource& src, std::uint64_t n,
                                                 bool ordered, std::uint64_t cap = kDefaultBlockCap) {
  require(n >= 1, "sample_block: n must be positive");
  require(static_cast<std::uint64_t>(model.k()) <= n, "sample_block: model k exceeds n");
  const auto stream = enumerate_tuples(n, model.k(), ordered);
  if (stream.count() > cap)
    throw RangeError("sample_block: block exceeds the entry cap; use streaming_sum for sums over large n");
  std::map<IndexTuple, double> out;
  std::vector<double> u;
  for (const auto& t : stream) {
    gather_uniforms(src, t, u);
    out.emplace(IndexTuple(t), model.kernel(u));
  }
  return out;
}

}  // namespace exarray
