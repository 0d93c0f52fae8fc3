// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "exarray/index.hpp"
#include "exarray/model.hpp"
#include "exarray/parallel.hpp"
#include "exarray/sampling.hpp"
#include "exarray/uniform_source.hpp"

namespace exarray {

inline constexpr int kDefaultMcSamples = 4096;
inline constexpr double kToleranceSe = 4.0;

enum class Method { automatic, analytic, monte_carlo };

struct ProjectionOptions {
  Method method = Method::automatic;
  int mc_samples = kDefaultMcSamples;
  /// Seed of the redraw stream; 0 derives one from the main source.
  std::uint64_t aux_seed = 0;
};

struct ProjectionValue {
  IndexTuple tuple;
  PatternVector pattern;
  double value = 0.0;
  Method method = Method::analytic;
  int mc_samples = 0;
  double std_error = 0.0;
};

struct HoeffdingComponents {
  IndexTuple tuple;
  Method method = Method::analytic;
  int mc_samples = 0;
  std::vector<double> h;            // H_0..H_k via the Q sums
  std::vector<double> h_binomial;   // H_0..H_k via the binomial recombination of P
  std::vector<double> h_std_error;
  std::vector<double> p;            // indexed by mask
  std::vector<double> q;            // indexed by mask
  std::vector<double> q_std_error;  // indexed by mask
  double entry = 0.0;
  /// max_l |h[l] - h_binomial[l]|
  double recombination_gap = 0.0;
};

//------------------------------------------------------------------------------
// Pure identities on per-pattern tables (indexed by mask, size 2^k)
//------------------------------------------------------------------------------

namespace detail {
inline double sorted_total(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  CompensatedSum s;
  for (double t : terms) s += t;
  return s.value();
}
}  // namespace detail

/// Q_e = sum_{e' <= e} (-1)^{|e| - |e'|} P_{e'}. The signed terms are summed
/// in sorted order, so Q depends only on the multiset of P values involved.
inline double q_from_p(std::span<const double> p, Mask e) {
  std::vector<double> terms;
  const int level = std::popcount(e);
  // enumerate submasks of e
  for (Mask sub = e;; sub = (sub - 1) & e) {
    const double sign = ((level - std::popcount(sub)) % 2) ? -1.0 : 1.0;
    terms.push_back(sign * p[sub]);
    if (sub == 0) break;
  }
  return detail::sorted_total(terms);
}

inline std::vector<double> q_table(int k, std::span<const double> p) {
  require(p.size() == (std::size_t{1} << k), "q_table: table size must be 2^k");
  std::vector<double> q(p.size());
  for (Mask e = 0; e < p.size(); ++e) q[e] = q_from_p(p, e);
  return q;
}

/// H_l = sum_{e in E_l} Q_e.
inline std::vector<double> h_from_q(int k, std::span<const double> q) {
  require(q.size() == (std::size_t{1} << k), "h_from_q: table size must be 2^k");
  std::vector<double> h(k + 1);
  for (int l = 0; l <= k; ++l) {
    CompensatedSum s;
    for (Mask e : canonical_masks(k, l)) s += q[e];
    h[l] = s.value();
  }
  return h;
}

/// H_l = sum_{j <= l} (-1)^{l-j} C(k-j, l-j) sum_{e in E_j} P_e.
inline std::vector<double> h_from_p_binomial(int k, std::span<const double> p) {
  require(p.size() == (std::size_t{1} << k), "h_from_p_binomial: table size must be 2^k");
  std::vector<double> level_sum(k + 1);
  for (int j = 0; j <= k; ++j) {
    CompensatedSum s;
    for (Mask e : canonical_masks(k, j)) s += p[e];
    level_sum[j] = s.value();
  }
  std::vector<double> h(k + 1);
  for (int l = 0; l <= k; ++l) {
    CompensatedSum s;
    for (int j = 0; j <= l; ++j) {
      const double c = static_cast<double>(binomial(k - j, l - j));
      s += (((l - j) % 2) ? -c : c) * level_sum[j];
    }
    h[l] = s.value();
  }
  return h;
}

//------------------------------------------------------------------------------
// Projections of a model entry
//------------------------------------------------------------------------------

namespace detail {

inline std::uint64_t resolve_aux_seed(const UniformSource& src, const ProjectionOptions& o) {
  return o.aux_seed != 0 ? o.aux_seed : derive_seed(src.master_seed(), 0x6d63'7265'6472'6177ULL);
}

inline bool analytic_available(const ArrayModel& m, Mask e) {
  for (Mask sub = e;; sub = (sub - 1) & e) {
    if (!m.has_analytic(sub)) return false;
    if (sub == 0) break;
  }
  return true;
}

inline bool use_analytic(const ArrayModel& m, Mask e, const ProjectionOptions& o) {
  const bool available = analytic_available(m, e);
  if (o.method == Method::analytic) {
    require(available, "projection: model has no closed form for this pattern");
    return true;
  }
  if (o.method == Method::monte_carlo) return false;
  return available;
}

/// Per-sample kernel values under conditioning on every pattern in `targets`,
/// with the redrawn uniforms shared across targets (common random numbers).
class ConditionalSampler {
 public:
  ConditionalSampler(const ArrayModel& model, const UniformSource& src, const IndexTuple& i, std::uint64_t aux_seed)
      : model_(model), aux_seed_(aux_seed), k_(model.k()) {
    require(i.size() == model.k(), "projection: tuple length differs from model k");
    sets_ = pattern_sets(i.entries());
    masks_.clear();
    for (Mask e : canonical_masks(k_))
      if (e != 0) masks_.push_back(e);
    main_.resize(sets_.size());
    for (std::size_t p = 0; p < sets_.size(); ++p) main_[p] = src.value(IndexSet(sets_[p]));
    aux_.resize(sets_.size());
    args_.resize(sets_.size());
  }

  void draw(int sample) {
    const UniformSource aux(derive_seed(aux_seed_, 0x72656472, static_cast<std::uint64_t>(sample)), k_);
    for (std::size_t p = 0; p < sets_.size(); ++p) aux_[p] = aux.value_sorted(sets_[p]);
  }

  double eval(Mask conditioned) {
    for (std::size_t p = 0; p < masks_.size(); ++p)
      args_[p] = (masks_[p] & ~conditioned) == 0 ? main_[p] : aux_[p];
    return model_.kernel(args_);
  }

  [[nodiscard]] std::span<const double> main_args() const { return main_; }

 private:
  const ArrayModel& model_;
  std::uint64_t aux_seed_;
  int k_;
  std::vector<std::vector<Label>> sets_;
  std::vector<Mask> masks_;
  std::vector<double> main_, aux_, args_;
};

struct RunningMoments {
  std::int64_t n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  [[nodiscard]] double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  [[nodiscard]] double std_error() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

}  // namespace detail

/// P_e(X)_i: closed form when the model provides one, otherwise the mean of
/// tau over redraws of every uniform not indexed by some e' <= e.
inline ProjectionValue project_P(const ArrayModel& model, const UniformSource& src, const IndexTuple& i,
                                 const PatternVector& e, const ProjectionOptions& opts = {}) {
  require(i.size() == model.k() && e.k() == model.k(), "project_P: tuple, pattern and model k must agree");
  ProjectionValue out{i, e};
  const Mask full = (Mask{1} << model.k()) - 1;
  if (e.mask() == full) {
    out.value = sample_entry(model, src, i);
    return out;
  }
  const bool closed = opts.method != Method::monte_carlo && model.has_analytic(e.mask());
  if (opts.method == Method::analytic) require(closed, "project_P: model has no closed form for this pattern");
  if (closed) {
    std::vector<double> u;
    gather_uniforms(src, i.entries(), u);
    out.value = model.analytic_projections[e.mask()](u);
    return out;
  }
  require(opts.mc_samples >= 1, "project_P: no closed form and mc_samples = 0");
  detail::ConditionalSampler sampler(model, src, i, detail::resolve_aux_seed(src, opts));
  detail::RunningMoments acc;
  for (int s = 0; s < opts.mc_samples; ++s) {
    sampler.draw(s);
    acc.add(sampler.eval(e.mask()));
  }
  out.value = acc.mean;
  out.method = Method::monte_carlo;
  out.mc_samples = opts.mc_samples;
  out.std_error = acc.std_error();
  return out;
}

/// Q_e(X)_i by inclusion-exclusion over e' <= e. The Monte Carlo path shares
/// one set of redraws across all terms of a sample.
inline ProjectionValue project_Q(const ArrayModel& model, const UniformSource& src, const IndexTuple& i,
                                 const PatternVector& e, const ProjectionOptions& opts = {}) {
  require(i.size() == model.k() && e.k() == model.k(), "project_Q: tuple, pattern and model k must agree");
  ProjectionValue out{i, e};
  const int k = model.k();
  std::vector<double> p(std::size_t{1} << k, 0.0);
  if (detail::use_analytic(model, e.mask(), opts)) {
    std::vector<double> u;
    gather_uniforms(src, i.entries(), u);
    const Mask full = (Mask{1} << k) - 1;
    for (Mask sub = e.mask();; sub = (sub - 1) & e.mask()) {
      p[sub] = sub == full ? model.kernel(u) : model.analytic_projections[sub](u);
      if (sub == 0) break;
    }
    out.value = q_from_p(p, e.mask());
    return out;
  }
  require(opts.mc_samples >= 1, "project_Q: no closed form and mc_samples = 0");
  detail::ConditionalSampler sampler(model, src, i, detail::resolve_aux_seed(src, opts));
  detail::RunningMoments acc;
  for (int s = 0; s < opts.mc_samples; ++s) {
    sampler.draw(s);
    for (Mask sub = e.mask();; sub = (sub - 1) & e.mask()) {
      p[sub] = sampler.eval(sub);
      if (sub == 0) break;
    }
    acc.add(q_from_p(p, e.mask()));
  }
  out.value = acc.mean;
  out.method = Method::monte_carlo;
  out.mc_samples = opts.mc_samples;
  out.std_error = acc.std_error();
  return out;
}

/// Every Q_e and H_l of the entry at i, with H also recomputed from the P
/// table by binomial recombination.
inline HoeffdingComponents hoeffding(const ArrayModel& model, const UniformSource& src, const IndexTuple& i,
                                     const ProjectionOptions& opts = {}) {
  require(i.size() == model.k(), "hoeffding: tuple length differs from model k");
  const int k = model.k();
  const std::size_t np = std::size_t{1} << k;
  const Mask full = static_cast<Mask>(np - 1);
  HoeffdingComponents out;
  out.tuple = i;
  out.entry = sample_entry(model, src, i);
  out.p.assign(np, 0.0);
  out.q_std_error.assign(np, 0.0);
  out.h_std_error.assign(k + 1, 0.0);

  if (detail::use_analytic(model, full, opts)) {
    std::vector<double> u;
    gather_uniforms(src, i.entries(), u);
    for (Mask e = 0; e < full; ++e) out.p[e] = model.analytic_projections[e](u);
    out.p[full] = out.entry;
    out.q = q_table(k, out.p);
    out.h = h_from_q(k, out.q);
  } else {
    require(opts.mc_samples >= 1, "hoeffding: no closed form and mc_samples = 0");
    out.method = Method::monte_carlo;
    out.mc_samples = opts.mc_samples;
    detail::ConditionalSampler sampler(model, src, i, detail::resolve_aux_seed(src, opts));
    std::vector<detail::RunningMoments> pm(np), qm(np), hm(k + 1);
    std::vector<double> ps(np);
    for (int s = 0; s < opts.mc_samples; ++s) {
      sampler.draw(s);
      for (Mask e = 0; e < full; ++e) ps[e] = sampler.eval(e);
      ps[full] = out.entry;
      const auto qs = q_table(k, ps);
      const auto hs = h_from_q(k, qs);
      for (std::size_t e = 0; e < np; ++e) {
        pm[e].add(ps[e]);
        qm[e].add(qs[e]);
      }
      for (int l = 0; l <= k; ++l) hm[l].add(hs[l]);
    }
    out.q.resize(np);
    out.h.resize(k + 1);
    for (std::size_t e = 0; e < np; ++e) {
      out.p[e] = pm[e].mean;
      out.q[e] = qm[e].mean;
      out.q_std_error[e] = qm[e].std_error();
    }
    for (int l = 0; l <= k; ++l) {
      out.h[l] = hm[l].mean;
      out.h_std_error[l] = hm[l].std_error();
    }
  }
  out.h_binomial = h_from_p_binomial(k, out.p);
  for (int l = 0; l <= k; ++l)
    out.recombination_gap = std::max(out.recombination_gap, std::abs(out.h[l] - out.h_binomial[l]));
  return out;
}

struct SymmetryCheck {
  bool holds = false;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  ProjectionValue at_tuple, at_permuted;
};

/// Compares Q_e(X)_{i_sigma} with Q_e(X)_i for a symmetric model and a
/// permutation fixing e. The two Monte Carlo estimates use independent redraw
/// streams, and are accepted within 4 combined standard errors.
inline SymmetryCheck check_Q_symmetry(const ArrayModel& model, const UniformSource& src, const IndexTuple& i,
                                      const PatternVector& e, const Permutation& sigma,
                                      const ProjectionOptions& opts = {}) {
  require(model.symmetric, "check_Q_symmetry: model is not symmetric");
  require(permute_pattern(e, sigma) == e, "check_Q_symmetry: sigma does not fix the pattern (e_sigma != e)");
  SymmetryCheck out;
  out.at_tuple = project_Q(model, src, i, e, opts);
  ProjectionOptions other = opts;
  other.aux_seed = derive_seed(detail::resolve_aux_seed(src, opts), 0x7369676d61);
  out.at_permuted = project_Q(model, src, permute_tuple(i, sigma), e, other);
  out.discrepancy = std::abs(out.at_permuted.value - out.at_tuple.value);
  const double se = std::hypot(out.at_tuple.std_error, out.at_permuted.std_error);
  out.tolerance = kToleranceSe * se;
  out.holds = out.discrepancy <= out.tolerance;
  return out;
}

/// Tuples on disjoint label blocks: {1..k}, {k+1..2k}, ... so that probes are
/// independent draws of the entry.
inline std::vector<IndexTuple> disjoint_probe_tuples(int k, int count) {
  std::vector<IndexTuple> out;
  for (int t = 0; t < count; ++t) {
    std::vector<Label> labels(k);
    for (int s = 0; s < k; ++s) labels[s] = static_cast<Label>(t) * k + s + 1;
    out.emplace_back(std::move(labels));
  }
  return out;
}

/// Smallest l with H_l non-constant across probes, minus one; k when every
/// level is constant. Non-constant means the across-probe variance exceeds 4
/// times the mean squared Monte Carlo error (plus a rounding floor).
inline int degeneracy_order(const ArrayModel& model, const UniformSource& src, std::span<const IndexTuple> probes,
                            const ProjectionOptions& opts = {}) {
  require(!probes.empty(), "degeneracy_order: probe_tuples must be nonempty");
  const int k = model.k();
  std::vector<HoeffdingComponents> comps;
  for (const auto& t : probes) comps.push_back(hoeffding(model, src, t, opts));
  for (int l = 1; l <= k; ++l) {
    detail::RunningMoments across;
    double se2 = 0.0, scale = 0.0;
    for (const auto& c : comps) {
      across.add(c.h[l]);
      se2 += c.h_std_error[l] * c.h_std_error[l];
      scale += c.h[l] * c.h[l];
    }
    se2 /= static_cast<double>(comps.size());
    scale /= static_cast<double>(comps.size());
    const double floor = 1e-24 * (1.0 + scale);
    if (across.variance() > kToleranceSe * se2 + floor) return l - 1;
  }
  return k;
}

}  // namespace exarray
