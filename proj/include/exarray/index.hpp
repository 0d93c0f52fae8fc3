// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace exarray {

using Label = std::uint64_t;

/// Bitmask view of a pattern vector. Slot 0 (e_1) is the most significant of
/// the k bits, so numeric order on masks of equal popcount is lexicographic
/// order on the bit vectors.
using Mask = std::uint32_t;

inline constexpr int kMaxDimension = 16;

class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

//------------------------------------------------------------------------------
// Checked counting
//------------------------------------------------------------------------------

/// n!/(n-k)!; zero when k > n. Throws RangeError above 2^63 - 1.
inline std::uint64_t falling_factorial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  constexpr std::uint64_t kCap = std::numeric_limits<std::int64_t>::max();
  std::uint64_t out = 1;
  for (std::uint64_t m = 0; m < k; ++m) {
    const std::uint64_t f = n - m;
    if (out > kCap / f) throw RangeError("tuple count exceeds 2^63-1");
    out *= f;
  }
  return out;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  constexpr std::uint64_t kCap = std::numeric_limits<std::int64_t>::max();
  std::uint64_t out = 1;
  for (std::uint64_t m = 1; m <= k; ++m) {
    // out * (n-k+m) / m stays integral at every step
    const std::uint64_t f = n - k + m;
    const std::uint64_t g = std::gcd(out, m);
    const std::uint64_t a = out / g;
    const std::uint64_t b = f / (m / g);
    if (a > kCap / b) throw RangeError("binomial coefficient exceeds 2^63-1");
    out = a * b;
  }
  return out;
}

inline std::uint64_t factorial(std::uint64_t k) { return falling_factorial(k, k); }

//------------------------------------------------------------------------------
// Domain types
//------------------------------------------------------------------------------

/// k labels, pairwise distinct.
class IndexTuple {
 public:
  IndexTuple() = default;
  explicit IndexTuple(std::vector<Label> entries) : entries_(std::move(entries)) {
    require(!entries_.empty(), "IndexTuple: empty tuple");
    for (Label l : entries_) require(l > 0, "IndexTuple: labels must be positive");
    std::vector<Label> sorted = entries_;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "IndexTuple: labels must be pairwise distinct");
  }
  IndexTuple(std::initializer_list<Label> entries)
      : IndexTuple(std::vector<Label>(entries)) {}

  [[nodiscard]] int size() const { return static_cast<int>(entries_.size()); }
  [[nodiscard]] Label operator[](int m) const { return entries_[m]; }
  [[nodiscard]] const std::vector<Label>& entries() const { return entries_; }

  friend bool operator==(const IndexTuple&, const IndexTuple&) = default;
  friend auto operator<=>(const IndexTuple&, const IndexTuple&) = default;

 private:
  std::vector<Label> entries_;
};

/// Binary k-vector e; level is the number of ones.
class PatternVector {
 public:
  PatternVector() = default;
  PatternVector(int k, Mask mask) : k_(k), mask_(mask) {
    require(k >= 1 && k <= kMaxDimension, "PatternVector: k out of range");
    require(mask < (Mask{1} << k), "PatternVector: mask has bits beyond k");
  }
  static PatternVector from_bits(const std::vector<int>& bits) {
    require(!bits.empty(), "PatternVector: empty bit vector");
    const int k = static_cast<int>(bits.size());
    Mask m = 0;
    for (int s = 0; s < k; ++s) {
      require(bits[s] == 0 || bits[s] == 1, "PatternVector: bits must be 0/1");
      if (bits[s]) m |= slot_bit(k, s);
    }
    return {k, m};
  }
  static PatternVector zeros(int k) { return {k, 0}; }
  static PatternVector ones(int k) { return {k, (Mask{1} << k) - 1}; }

  static constexpr Mask slot_bit(int k, int slot) { return Mask{1} << (k - 1 - slot); }

  [[nodiscard]] int k() const { return k_; }
  [[nodiscard]] Mask mask() const { return mask_; }
  [[nodiscard]] int level() const { return std::popcount(mask_); }
  [[nodiscard]] bool bit(int slot) const { return (mask_ & slot_bit(k_, slot)) != 0; }
  [[nodiscard]] std::vector<int> bits() const {
    std::vector<int> out(k_);
    for (int s = 0; s < k_; ++s) out[s] = bit(s) ? 1 : 0;
    return out;
  }
  /// Componentwise e <= other.
  [[nodiscard]] bool leq(const PatternVector& other) const {
    return k_ == other.k_ && (mask_ & ~other.mask_) == 0;
  }

  friend bool operator==(const PatternVector&, const PatternVector&) = default;

 private:
  int k_ = 1;
  Mask mask_ = 0;
};

/// Canonical set of positive labels: sorted, unique.
class IndexSet {
 public:
  IndexSet() = default;
  /// Zeros are stripped, duplicates merged.
  explicit IndexSet(std::vector<Label> labels) : labels_(std::move(labels)) {
    std::erase(labels_, Label{0});
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  }
  IndexSet(std::initializer_list<Label> labels) : IndexSet(std::vector<Label>(labels)) {}

  [[nodiscard]] std::size_t size() const { return labels_.size(); }
  [[nodiscard]] bool empty() const { return labels_.empty(); }
  [[nodiscard]] const std::vector<Label>& labels() const { return labels_; }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;
  friend auto operator<=>(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<Label> labels_;
};

//------------------------------------------------------------------------------
// Pattern vectors
//------------------------------------------------------------------------------

/// Masks of E (or E_level) in canonical order: level ascending, then
/// lexicographic on (e_1, ..., e_k).
inline std::vector<Mask> canonical_masks(int k, std::optional<int> level = std::nullopt) {
  require(k >= 1 && k <= kMaxDimension, "pattern_vectors: k out of range");
  if (level) require(*level >= 0 && *level <= k, "pattern_vectors: level must lie in [0, k]");
  std::vector<Mask> out;
  const Mask full = (Mask{1} << k) - 1;
  for (int j = level.value_or(0); j <= level.value_or(k); ++j)
    for (Mask m = 0; m <= full; ++m)
      if (std::popcount(m) == j) out.push_back(m);
  return out;
}

inline std::vector<PatternVector> pattern_vectors(int k, std::optional<int> level = std::nullopt) {
  std::vector<PatternVector> out;
  for (Mask m : canonical_masks(k, level)) out.emplace_back(k, m);
  return out;
}

/// Position of each mask in the canonical ordering of all 2^k patterns.
/// Index 0 is always the zero pattern.
inline std::vector<int> canonical_positions(int k) {
  const auto masks = canonical_masks(k);
  std::vector<int> pos(masks.size());
  for (std::size_t p = 0; p < masks.size(); ++p) pos[masks[p]] = static_cast<int>(p);
  return pos;
}

//------------------------------------------------------------------------------
// Embeddings, masks and permutations
//------------------------------------------------------------------------------

/// i^e: i_m at the m-th non-null slot of e, zero elsewhere.
inline std::vector<Label> embed(const std::vector<Label>& i, const PatternVector& e) {
  require(static_cast<int>(i.size()) == e.level(), "embed: tuple length must equal pattern level");
  std::vector<Label> out(e.k(), 0);
  std::size_t m = 0;
  for (int s = 0; s < e.k(); ++s)
    if (e.bit(s)) out[s] = i[m++];
  return out;
}

/// {i (.) e}^+
inline IndexSet mask_to_set(const IndexTuple& i, const PatternVector& e) {
  require(i.size() == e.k(), "mask_to_set: tuple and pattern lengths differ");
  std::vector<Label> picked;
  for (int s = 0; s < e.k(); ++s)
    if (e.bit(s)) picked.push_back(i[s]);
  return IndexSet(std::move(picked));
}

using Permutation = std::vector<int>;  // one-based images (sigma(1), ..., sigma(k))

inline void require_permutation(const Permutation& sigma) {
  std::vector<bool> seen(sigma.size(), false);
  for (int v : sigma) {
    require(v >= 1 && v <= static_cast<int>(sigma.size()), "permutation: image out of range");
    require(!seen[v - 1], "permutation: not a bijection");
    seen[v - 1] = true;
  }
}

inline Permutation inverse(const Permutation& sigma) {
  require_permutation(sigma);
  Permutation inv(sigma.size());
  for (std::size_t m = 0; m < sigma.size(); ++m) inv[sigma[m] - 1] = static_cast<int>(m) + 1;
  return inv;
}

/// i_sigma = (i_sigma(1), ..., i_sigma(k))
inline IndexTuple permute_tuple(const IndexTuple& i, const Permutation& sigma) {
  require(static_cast<int>(sigma.size()) == i.size(), "permute_tuple: length mismatch");
  require_permutation(sigma);
  std::vector<Label> out(sigma.size());
  for (std::size_t m = 0; m < sigma.size(); ++m) out[m] = i[sigma[m] - 1];
  return IndexTuple(std::move(out));
}

/// e_sigma, same convention as permute_tuple.
inline PatternVector permute_pattern(const PatternVector& e, const Permutation& sigma) {
  require(static_cast<int>(sigma.size()) == e.k(), "permute_pattern: length mismatch");
  require_permutation(sigma);
  Mask m = 0;
  for (int s = 0; s < e.k(); ++s)
    if (e.bit(sigma[s] - 1)) m |= PatternVector::slot_bit(e.k(), s);
  return {e.k(), m};
}

/// All permutations of {1..k} in lexicographic order.
inline std::vector<Permutation> all_permutations(int k) {
  require(k >= 1 && k <= 10, "all_permutations: k out of range");
  Permutation p(k);
  for (int m = 0; m < k; ++m) p[m] = m + 1;
  std::vector<Permutation> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

//------------------------------------------------------------------------------
// Lazy tuple streams
//------------------------------------------------------------------------------

/// Lazy stream over I_{n,k} (all k-tuples of distinct labels in 1..n, in
/// lexicographic order) or, when `increasing` is set, over the strictly
/// increasing tuples only.
class TupleStream {
 public:
  TupleStream(std::uint64_t n, int k, bool increasing) : n_(n), k_(k), increasing_(increasing) {
    require(n >= 1 && k >= 1, "enumerate_tuples: n and k must be positive");
    require(k <= kMaxDimension, "enumerate_tuples: k out of range");
  }

  class iterator {
   public:
    using value_type = std::vector<Label>;
    using difference_type = std::ptrdiff_t;
    using reference = const value_type&;
    using pointer = const value_type*;
    using iterator_category = std::input_iterator_tag;

    iterator() = default;
    iterator(const TupleStream* s) : s_(s), cur_(s->k_) {
      if (static_cast<std::uint64_t>(s->k_) > s->n_) {
        s_ = nullptr;
        return;
      }
      for (int m = 0; m < s->k_; ++m) cur_[m] = static_cast<Label>(m + 1);
    }
    reference operator*() const { return cur_; }
    pointer operator->() const { return &cur_; }
    iterator& operator++() {
      if (!(s_->increasing_ ? next_combination() : next_arrangement())) s_ = nullptr;
      return *this;
    }
    void operator++(int) { ++*this; }
    friend bool operator==(const iterator& a, const iterator& b) { return a.s_ == b.s_; }

   private:
    bool next_combination() {
      const int k = s_->k_;
      const Label n = s_->n_;
      for (int p = k - 1; p >= 0; --p) {
        if (cur_[p] < n - static_cast<Label>(k - 1 - p)) {
          ++cur_[p];
          for (int q = p + 1; q < k; ++q) cur_[q] = cur_[q - 1] + 1;
          return true;
        }
      }
      return false;
    }
    bool used_before(int p, Label v) const {
      for (int q = 0; q < p; ++q)
        if (cur_[q] == v) return true;
      return false;
    }
    bool next_arrangement() {
      const int k = s_->k_;
      const Label n = s_->n_;
      for (int p = k - 1; p >= 0; --p) {
        for (Label v = cur_[p] + 1; v <= n; ++v) {
          if (used_before(p, v)) continue;
          cur_[p] = v;
          // refill the tail with the smallest unused labels
          Label w = 1;
          for (int q = p + 1; q < k; ++q) {
            while (used_before(q, w)) ++w;
            cur_[q] = w++;
          }
          return true;
        }
      }
      return false;
    }

    const TupleStream* s_ = nullptr;
    std::vector<Label> cur_;
  };

  [[nodiscard]] iterator begin() const { return iterator(this); }
  [[nodiscard]] iterator end() const { return {}; }

  /// Number of tuples the stream yields.
  [[nodiscard]] std::uint64_t count() const {
    return increasing_ ? binomial(n_, static_cast<std::uint64_t>(k_))
                       : falling_factorial(n_, static_cast<std::uint64_t>(k_));
  }

 private:
  std::uint64_t n_;
  int k_;
  bool increasing_;
};

/// ordered = true keeps the strictly increasing tuples only.
inline TupleStream enumerate_tuples(std::uint64_t n, int k, bool ordered) {
  return {n, k, ordered};
}

}  // namespace exarray
