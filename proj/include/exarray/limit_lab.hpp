// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exarray/decomposition.hpp"
#include "exarray/index.hpp"
#include "exarray/model.hpp"
#include "exarray/parallel.hpp"
#include "exarray/sampling.hpp"
#include "exarray/stable.hpp"
#include "exarray/stats.hpp"
#include "exarray/uniform_source.hpp"

namespace exarray {

//------------------------------------------------------------------------------
// Exact sums over I_{n,k}
//------------------------------------------------------------------------------

namespace detail {

/// Sum of X_i over the tuples of I_{n,k} whose largest label is m, for every
/// m in [1, n_max]. Symmetric models visit each label set once and scale by
/// k!; other models visit all k! orderings of the set.
class MaxLabelSums {
 public:
  MaxLabelSums(const ArrayModel& model, const UniformSource& src, std::uint64_t n_max, int threads)
      : model_(model), src_(src), k_(model.k()), n_max_(n_max), threads_(threads) {
    require(k_ <= src.k_max(), "streaming_sum: model k exceeds the source's k_max");
    singles_.resize(n_max + 1);
    for (std::uint64_t l = 1; l <= n_max; ++l) singles_[l] = src.single(l);
    if (k_ == 2) {
      heads_.resize(n_max + 1);
      for (std::uint64_t l = 1; l <= n_max; ++l) heads_[l] = src.pair_head(l);
    }
    const auto perms = all_permutations(k_);
    if (model.symmetric) {
      orders_ = {perms.front()};
      scale_ = static_cast<double>(factorial(k_));
    } else {
      orders_ = perms;
    }
    // For ordering pi and argument position p: the submask of the sorted label
    // set that pattern p selects.
    const auto masks = canonical_masks(k_);
    for (const auto& pi : orders_) {
      std::vector<Mask> row;
      for (Mask e : masks) {
        if (e == 0) continue;
        Mask sub = 0;
        for (int s = 0; s < k_; ++s)
          if (e & PatternVector::slot_bit(k_, s)) sub |= Mask{1} << (pi[s] - 1);
        row.push_back(sub);
      }
      arg_subsets_.push_back(std::move(row));
    }
  }

  /// D[m] for m = 0..n_max (D[m] = 0 for m < k).
  std::vector<double> compute() const {
    std::vector<double> d(n_max_ + 1, 0.0);
    const auto first = static_cast<std::uint64_t>(k_);
    if (n_max_ < first) return d;
    parallel_for(n_max_ - first + 1, threads_, [&](std::size_t idx) {
      const std::uint64_t m = first + idx;
      d[m] = k_ == 2 ? pairs_ending_at(m) : sets_ending_at(m);
    });
    return d;
  }

 private:
  double pairs_ending_at(std::uint64_t m) const {
    CompensatedSum acc;
    std::array<double, 3> u{};
    const double um = singles_[m];
    if (model_.symmetric) {
      for (std::uint64_t i = 1; i < m; ++i) {
        u = {um, singles_[i], src_.pair_tail(heads_[i], m)};
        acc += model_.kernel(u);
      }
      return scale_ * acc.value();
    }
    for (std::uint64_t i = 1; i < m; ++i) {
      const double uim = src_.pair_tail(heads_[i], m);
      u = {um, singles_[i], uim};  // tuple (i, m)
      acc += model_.kernel(u);
      u = {singles_[i], um, uim};  // tuple (m, i)
      acc += model_.kernel(u);
    }
    return acc.value();
  }

  double sets_ending_at(std::uint64_t m) const {
    CompensatedSum acc;
    const int k = k_;
    const std::size_t nsub = std::size_t{1} << k;
    std::vector<double> usub(nsub), args(nsub - 1);
    std::vector<Label> set(k), buf(k);
    if (k == 1) {
      usub[1] = singles_[m];
      args[0] = usub[1];
      return model_.kernel(args);
    }
    // (k-1)-combinations of {1..m-1} in lexicographic order, with m appended
    std::vector<Label> c(k - 1);
    for (int s = 0; s < k - 1; ++s) c[s] = static_cast<Label>(s + 1);
    const Label top = m - 1;
    if (top < static_cast<Label>(k - 1)) return 0.0;
    while (true) {
      for (int s = 0; s < k - 1; ++s) set[s] = c[s];
      set[k - 1] = m;
      for (Mask sub = 1; sub < nsub; ++sub) {
        if (std::popcount(sub) == 1) {
          usub[sub] = singles_[set[std::countr_zero(sub)]];
          continue;
        }
        std::size_t n = 0;
        for (int s = 0; s < k; ++s)
          if (sub & (Mask{1} << s)) buf[n++] = set[s];
        usub[sub] = src_.value_sorted({buf.data(), n});
      }
      for (const auto& row : arg_subsets_) {
        for (std::size_t p = 0; p < row.size(); ++p) args[p] = usub[row[p]];
        acc += model_.kernel(args);
      }
      int p = k - 2;
      while (p >= 0 && c[p] == top - static_cast<Label>(k - 2 - p)) --p;
      if (p < 0) break;
      ++c[p];
      for (int q = p + 1; q < k - 1; ++q) c[q] = c[q - 1] + 1;
    }
    return scale_ * acc.value();
  }

  const ArrayModel& model_;
  const UniformSource& src_;
  int k_;
  std::uint64_t n_max_;
  int threads_;
  double scale_ = 1.0;
  std::vector<double> singles_;
  std::vector<std::uint64_t> heads_;
  std::vector<Permutation> orders_;
  std::vector<std::vector<Mask>> arg_subsets_;
};

}  // namespace detail

/// S[n] = sum over I_{n,k} of X_i for every n in [0, n_max], from one
/// realization (sums are nested in n). Bit-identical for any thread count.
inline std::vector<double> nested_sums(const ArrayModel& model, const UniformSource& src, std::uint64_t n_max,
                                       int threads = default_threads()) {
  require(n_max >= 1, "nested_sums: n must be positive");
  (void)falling_factorial(n_max, static_cast<std::uint64_t>(model.k()));  // overflow guard
  const auto d = detail::MaxLabelSums(model, src, n_max, threads).compute();
  std::vector<double> s(n_max + 1, 0.0);
  CompensatedSum acc;
  for (std::uint64_t n = 1; n <= n_max; ++n) {
    acc += d[n];
    s[n] = acc.value();
  }
  return s;
}

/// Exact sum of X_i over I_{n,k} without materializing the block.
inline double streaming_sum(const ArrayModel& model, const UniformSource& src, std::uint64_t n,
                            int threads = default_threads()) {
  require(static_cast<std::uint64_t>(model.k()) <= n, "streaming_sum: model k exceeds n");
  return nested_sums(model, src, n, threads)[n];
}

//------------------------------------------------------------------------------
// Marcinkiewicz-Zygmund series
//------------------------------------------------------------------------------

/// k - 1 + 1/r for r >= 1, k/r for r < 1; both equal k at r = 1.
inline double normalization_exponent(int k, double r) {
  require(r > 0.0 && r < 2.0, "normalization_exponent: r must lie in (0, 2)");
  return r >= 1.0 ? k - 1 + 1.0 / r : k / r;
}

inline std::string regime_label(double r) { return r >= 1.0 ? "n^(k−1+1/r)" : "n^(k/r)"; }

/// Mean of fresh entries on disjoint label blocks, with its standard error.
struct MeanEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

inline MeanEstimate estimate_mean(const ArrayModel& model, std::uint64_t seed, std::uint64_t draws) {
  require(draws >= 2, "estimate_mean: need at least two draws");
  const UniformSource src(derive_seed(seed, 0x6d65616e), model.k());
  std::vector<double> x(draws);
  std::vector<double> u;
  std::vector<Label> t(model.k());
  for (std::uint64_t d = 0; d < draws; ++d) {
    for (int s = 0; s < model.k(); ++s) t[s] = d * model.k() + s + 1;
    gather_uniforms(src, t, u);
    x[d] = model.kernel(u);
  }
  return {stats::mean(x), stats::std_error(x)};
}

struct MzOptions {
  int threads = default_threads();
  /// Estimate an undeclared mean from fresh entries instead of rejecting r >= 1.
  bool estimate_missing_mean = false;
  std::uint64_t mean_draws = 1'000'000;
  std::uint64_t mean_seed = 1;
};

struct NormalizedSumSeries {
  std::string model;
  int k = 0;
  double r = 0.0;
  double exponent = 0.0;
  std::string regime;
  bool centered = false;
  double mean = 0.0;
  double mean_std_error = 0.0;
  bool hypothesis_violated = false;
  std::vector<std::uint64_t> grid;
  std::vector<std::uint64_t> seeds;
  /// [replication][grid point]
  std::vector<std::vector<double>> raw_sum;
  std::vector<std::vector<double>> centered_sum;
  std::vector<std::vector<double>> normalized;

  /// Mean over replications of |S_n|^r at grid point g.
  [[nodiscard]] double lr_moment(std::size_t g) const {
    CompensatedSum s;
    for (const auto& rep : normalized) s += std::pow(std::abs(rep[g]), r);
    return s.value() / static_cast<double>(normalized.size());
  }
  [[nodiscard]] std::vector<double> lr_moments() const {
    std::vector<double> out(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) out[g] = lr_moment(g);
    return out;
  }
  [[nodiscard]] double median_abs_normalized(std::size_t g) const {
    std::vector<double> v;
    for (const auto& rep : normalized) v.push_back(std::abs(rep[g]));
    return stats::median(v);
  }
};

/// True when `values` strictly decreases over its last `points` entries.
inline bool monotone_tail(std::span<const double> values, std::size_t points = 5) {
  require(values.size() >= points && points >= 2, "monotone_tail: too few values");
  for (std::size_t g = values.size() - points + 1; g < values.size(); ++g)
    if (!(values[g] < values[g - 1])) return false;
  return true;
}

inline std::vector<std::uint64_t> dyadic_grid(int lo, int hi) {
  require(lo >= 0 && hi >= lo && hi < 63, "dyadic_grid: bad exponent range");
  std::vector<std::uint64_t> g;
  for (int e = lo; e <= hi; ++e) g.push_back(std::uint64_t{1} << e);
  return g;
}

/// Replication seeds derived from a master seed.
inline std::vector<std::uint64_t> derive_seeds(std::uint64_t master, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = derive_seed(master, 0x7265706c, i);
  return out;
}

inline NormalizedSumSeries mz_series(const ArrayModel& model, double r, std::vector<std::uint64_t> grid,
                                     std::vector<std::uint64_t> seeds, const MzOptions& opts = {}) {
  require(r > 0.0 && r < 2.0, "mz_series: r must lie in (0, 2)");
  require(!grid.empty() && !seeds.empty(), "mz_series: grid and seeds must be nonempty");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  require(grid.front() >= static_cast<std::uint64_t>(model.k()), "mz_series: grid must start at n >= k");

  NormalizedSumSeries out;
  out.model = model.name;
  out.k = model.k();
  out.r = r;
  out.exponent = normalization_exponent(model.k(), r);
  out.regime = regime_label(r);
  out.centered = r >= 1.0;
  out.hypothesis_violated = !model.moment_exponent || *model.moment_exponent <= r;
  out.grid = grid;
  out.seeds = seeds;
  if (out.centered) {
    if (model.mean) {
      out.mean = *model.mean;
    } else {
      require(opts.estimate_missing_mean, "mz_series: r >= 1 needs the model mean");
      const auto est = estimate_mean(model, opts.mean_seed, opts.mean_draws);
      out.mean = est.value;
      out.mean_std_error = est.std_error;
    }
  }
  for (std::uint64_t seed : seeds) {
    const UniformSource src(seed, model.k());
    const auto s = nested_sums(model, src, grid.back(), opts.threads);
    std::vector<double> raw, cen, norm;
    for (std::uint64_t n : grid) {
      const double count = static_cast<double>(falling_factorial(n, static_cast<std::uint64_t>(model.k())));
      raw.push_back(s[n]);
      cen.push_back(out.centered ? s[n] - out.mean * count : s[n]);
      norm.push_back(cen.back() / std::pow(static_cast<double>(n), out.exponent));
    }
    out.raw_sum.push_back(std::move(raw));
    out.centered_sum.push_back(std::move(cen));
    out.normalized.push_back(std::move(norm));
  }
  return out;
}

struct RateFit {
  double slope = 0.0;
  double half_width = 0.0;
  double exponent = 0.0;
  bool degenerate = false;
};

/// Least-squares slope of log(mean |sum|) on log n; the sum is centered when
/// the series is.
inline RateFit rate_fit(const NormalizedSumSeries& series) {
  require(series.grid.size() >= 5, "rate_fit: need at least 5 grid points");
  require(series.centered_sum.size() >= 16, "rate_fit: need at least 16 replications");
  std::vector<double> x, y;
  bool degenerate = false;
  for (std::size_t g = 0; g < series.grid.size(); ++g) {
    CompensatedSum s;
    for (const auto& rep : series.centered_sum) s += std::abs(rep[g]);
    const double m = s.value() / static_cast<double>(series.centered_sum.size());
    if (!(m > 0) || !std::isfinite(m)) degenerate = true;
    x.push_back(std::log(static_cast<double>(series.grid[g])));
    y.push_back(std::log(m));
  }
  RateFit out;
  out.exponent = series.exponent;
  if (degenerate) {
    out.degenerate = true;
    out.slope = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const auto fit = stats::fit_line(x, y);
  out.slope = fit.slope;
  out.half_width = fit.half_width;
  out.degenerate = fit.degenerate;
  return out;
}

//------------------------------------------------------------------------------
// The LIL constant V
//------------------------------------------------------------------------------

struct VEstimate {
  double covariance_form = 0.0;  // estimator A
  double covariance_form_se = 0.0;
  double conditional_variance = 0.0;  // estimator B
  double conditional_variance_se = 0.0;
  int replications = 0;

  [[nodiscard]] double combined_se() const { return std::hypot(covariance_form_se, conditional_variance_se); }
  [[nodiscard]] bool agree(double n_se = 3.0) const {
    return std::abs(covariance_form - conditional_variance) <= n_se * combined_se();
  }
};

struct VOptions {
  int replications = 20000;
  ProjectionOptions projection{};
};

/// Estimator A: covariance of the permutation sums over the tuples
/// (1..k) and (1, k+1..2k-1), divided by ((k-1)!)^2. Estimator B:
/// k^2 Var(E(Xsym | U_1)) with Xsym the permutation average of X, using
/// closed-form or Monte Carlo level-one projections (the Monte Carlo noise
/// variance is subtracted).
inline VEstimate estimate_V(const ArrayModel& model, std::uint64_t seed, const VOptions& opts = {}) {
  require(model.finite_second_moment(), "estimate_V: model does not declare a finite second moment");
  require(opts.replications >= 2, "estimate_V: need at least two replications");
  const int k = model.k();
  const auto perms = all_permutations(k);
  const UniformSource src(seed, k);
  const int reps = opts.replications;
  const Label block = static_cast<Label>(2 * k - 1);

  std::vector<double> y(reps), y2(reps);
  std::vector<double> u;
  std::vector<Label> a(k), b(k), t(k);
  for (int rep = 0; rep < reps; ++rep) {
    const Label o = static_cast<Label>(rep) * block;
    for (int s = 0; s < k; ++s) {
      a[s] = o + s + 1;
      b[s] = s == 0 ? o + 1 : o + k + s;
    }
    CompensatedSum sa, sb;
    for (const auto& pi : perms) {
      for (int s = 0; s < k; ++s) t[s] = a[pi[s] - 1];
      gather_uniforms(src, t, u);
      sa += model.kernel(u);
      for (int s = 0; s < k; ++s) t[s] = b[pi[s] - 1];
      gather_uniforms(src, t, u);
      sb += model.kernel(u);
    }
    y[rep] = sa.value();
    y2[rep] = sb.value();
  }
  const double kf = static_cast<double>(factorial(k - 1));
  const auto cov = stats::covariance(y, y2);

  VEstimate out;
  out.replications = reps;
  out.covariance_form = cov.value / (kf * kf);
  out.covariance_form_se = cov.std_error / (kf * kf);

  // estimator B on a separate stream
  const UniformSource src_b(derive_seed(seed, 0x4c494c32), k);
  std::vector<double> g(reps), noise(reps, 0.0);
  const int slots = model.symmetric ? 1 : k;
  for (int rep = 0; rep < reps; ++rep) {
    const Label o = static_cast<Label>(rep) * k;
    CompensatedSum acc;
    double var = 0.0;
    for (int m = 0; m < slots; ++m) {
      std::vector<Label> labels(k);
      Label next = o + 2;
      for (int s = 0; s < k; ++s) labels[s] = s == m ? o + 1 : next++;
      ProjectionOptions po = opts.projection;
      if (po.aux_seed == 0) po.aux_seed = derive_seed(seed, 0x61757842, static_cast<std::uint64_t>(rep));
      const auto pv = project_P(model, src_b, IndexTuple(labels), PatternVector(k, PatternVector::slot_bit(k, m)), po);
      acc += pv.value;
      var += pv.std_error * pv.std_error;
    }
    g[rep] = acc.value() / slots;
    noise[rep] = var / (slots * slots);
  }
  const double gm = stats::mean(g);
  std::vector<double> dev2(reps);
  for (int rep = 0; rep < reps; ++rep) dev2[rep] = (g[rep] - gm) * (g[rep] - gm);
  const double n = static_cast<double>(reps);
  const double k2 = static_cast<double>(k) * k;
  out.conditional_variance = k2 * (stats::mean(dev2) * n / (n - 1) - stats::mean(noise));
  out.conditional_variance_se = k2 * stats::std_error(dev2);
  return out;
}

//------------------------------------------------------------------------------
// LIL envelope
//------------------------------------------------------------------------------

struct LilTrajectory {
  std::uint64_t seed = 0;
  double running_max = 0.0;
  double running_min = 0.0;
  /// max(running_max, -running_min)
  double peak = 0.0;
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> statistic;  // at checkpoints
};

struct LilEnvelope {
  std::string model;
  int k = 0;
  std::uint64_t n_min = 0, n_max = 0;
  double mean = 0.0;
  double v = 0.0;  // the V used for the band
  std::optional<VEstimate> v_estimate;
  std::vector<LilTrajectory> trajectories;

  [[nodiscard]] int within_band(double lo, double hi) const {
    const double root = std::sqrt(std::max(v, 0.0));
    int count = 0;
    for (const auto& t : trajectories)
      if (t.peak > lo * root && t.peak < hi * root) ++count;
    return count;
  }
};

inline std::vector<std::uint64_t> log_checkpoints(std::uint64_t lo, std::uint64_t hi, int per_decade = 40) {
  std::vector<std::uint64_t> out;
  const double step = std::pow(10.0, 1.0 / per_decade);
  for (double x = static_cast<double>(lo); x < static_cast<double>(hi) * (1 + 1e-12); x *= step) {
    const auto n = static_cast<std::uint64_t>(std::llround(x));
    if (out.empty() || n != out.back()) out.push_back(n);
  }
  if (out.back() != hi) out.push_back(hi);
  return out;
}

/// The statistic sum(X_i - mean) / sqrt(2 n^(2k-1) log log n) along one
/// realization per seed, for every n in [n_min, n_max].
inline LilEnvelope lil_envelope(const ArrayModel& model, std::uint64_t n_min, std::uint64_t n_max,
                                std::span<const std::uint64_t> seeds, double v,
                                int threads = default_threads()) {
  require(model.finite_second_moment(), "lil_envelope: model does not declare a finite second moment");
  require(model.mean.has_value(), "lil_envelope: model mean must be declared");
  require(n_min >= 3, "lil_envelope: grid must start at n >= 3");
  require(n_max >= n_min && !seeds.empty(), "lil_envelope: empty grid or seed list");
  require(n_min >= static_cast<std::uint64_t>(model.k()), "lil_envelope: n_min below k");
  LilEnvelope out;
  out.model = model.name;
  out.k = model.k();
  out.n_min = n_min;
  out.n_max = n_max;
  out.mean = *model.mean;
  out.v = v;
  const auto checkpoints = log_checkpoints(n_min, n_max);
  const int k = model.k();
  for (std::uint64_t seed : seeds) {
    const UniformSource src(seed, k);
    const auto s = nested_sums(model, src, n_max, threads);
    LilTrajectory t;
    t.seed = seed;
    t.running_max = -kInf;
    t.running_min = kInf;
    std::size_t cp = 0;
    for (std::uint64_t n = n_min; n <= n_max; ++n) {
      const double dn = static_cast<double>(n);
      const double count = static_cast<double>(falling_factorial(n, static_cast<std::uint64_t>(k)));
      const double stat = (s[n] - out.mean * count) / std::sqrt(2 * std::pow(dn, 2 * k - 1) * std::log(std::log(dn)));
      t.running_max = std::max(t.running_max, stat);
      t.running_min = std::min(t.running_min, stat);
      if (cp < checkpoints.size() && checkpoints[cp] == n) {
        t.checkpoints.push_back(n);
        t.statistic.push_back(stat);
        ++cp;
      }
    }
    t.peak = std::max(t.running_max, -t.running_min);
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

//------------------------------------------------------------------------------
// Khintchine upper bound with B_r = 1
//------------------------------------------------------------------------------

/// E|sum a_m eps_m|^r by enumerating all 2^m sign patterns.
inline double khintchine_exact_moment(std::span<const double> weights, double r) {
  require(!weights.empty() && weights.size() <= 24, "khintchine_exact_moment: 1 to 24 weights");
  const std::size_t m = weights.size();
  const std::uint64_t patterns = std::uint64_t{1} << m;
  CompensatedSum acc;
  for (std::uint64_t bits = 0; bits < patterns; ++bits) {
    CompensatedSum s;
    for (std::size_t j = 0; j < m; ++j) s += ((bits >> j) & 1u) ? -weights[j] : weights[j];
    acc += std::pow(std::abs(s.value()), r);
  }
  return acc.value() / static_cast<double>(patterns);
}

struct KhintchineResult {
  bool pass = false;
  double ratio = 0.0;  // Monte Carlo E|sum a eps|^r / (sum a^2)^(r/2)
  double std_error = 0.0;
  std::optional<double> exact_ratio;  // when at most 12 weights
};

inline KhintchineResult khintchine_check(std::span<const double> weights, double r, int replications,
                                         std::uint64_t seed) {
  require(!weights.empty(), "khintchine_check: weights must be nonempty");
  require(r > 1.0 && r <= 2.0, "khintchine_check: r must lie in (1, 2]");
  require(replications >= 2, "khintchine_check: need at least two replications");
  CompensatedSum sq;
  for (double a : weights) sq += a * a;
  const double denom = std::pow(std::sqrt(sq.value()), r);
  require(denom > 0, "khintchine_check: weights are all zero");
  std::vector<double> x(replications);
  for (int rep = 0; rep < replications; ++rep) {
    CompensatedSum s;
    std::uint64_t bits = 0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (j % 64 == 0) bits = mix64(derive_seed(seed, static_cast<std::uint64_t>(rep), j / 64));
      s += ((bits >> (j % 64)) & 1u) ? -weights[j] : weights[j];
    }
    x[rep] = std::pow(std::abs(s.value()), r) / denom;
  }
  KhintchineResult out;
  out.ratio = stats::mean(x);
  out.std_error = stats::std_error(x);
  out.pass = out.ratio <= 1.0 + 3.0 * out.std_error;
  if (weights.size() <= 12) out.exact_ratio = khintchine_exact_moment(weights, r) / denom;
  return out;
}

//------------------------------------------------------------------------------
// Sharpness counterexample
//------------------------------------------------------------------------------

struct CounterexampleReport {
  NormalizedSumSeries series;
  double median_first = 0.0;
  double median_last = 0.0;
  bool non_shrinking = false;
  std::uint64_t factorization_max_n = 0;
  double factorization_max_rel_error = 0.0;
  bool factorization_holds = false;
  std::uint64_t ks_n = 0;
  std::size_t ks_samples = 0;
  double ks_distance = 0.0;
  double ks_critical = 0.0;
  bool self_similar = false;

  [[nodiscard]] bool pass() const { return non_shrinking && factorization_holds && self_similar; }
};

struct CounterexampleOptions {
  int threads = default_threads();
  std::uint64_t factorization_max_n = 100;
  std::uint64_t ks_n = 512;
  std::size_t ks_samples = 2000;
  double factorization_tolerance = 1e-12;
};

/// X_{i_1..i_k} = V_{i_1} with V stable of index alpha, normalized at r = alpha.
inline CounterexampleReport counterexample(double alpha, int k, std::vector<std::uint64_t> grid,
                                           std::vector<std::uint64_t> seeds, const CounterexampleOptions& opts = {}) {
  const auto model = stable_factor(k, alpha);
  CounterexampleReport out;
  MzOptions mo;
  mo.threads = opts.threads;
  out.series = mz_series(model, alpha, std::move(grid), seeds, mo);
  out.median_first = out.series.median_abs_normalized(0);
  out.median_last = out.series.median_abs_normalized(out.series.grid.size() - 1);
  out.non_shrinking = out.median_last > 0.5 * out.median_first;

  // sum over I_{n,k} = ((n-1)!/(n-k)!) * sum_{i <= n} V_i
  const StableParams p{alpha, 0.0, 1.0, 0.0};
  const UniformSource src(seeds.front(), k);
  const auto s = nested_sums(model, src, opts.factorization_max_n, opts.threads);
  CompensatedSum v, vabs;
  out.factorization_max_n = opts.factorization_max_n;
  out.factorization_holds = true;
  for (std::uint64_t n = 1; n <= opts.factorization_max_n; ++n) {
    const double vn = sample_stable(p, src, n);
    v += vn;
    vabs += std::abs(vn);
    if (n < static_cast<std::uint64_t>(k)) continue;
    const double mult = static_cast<double>(falling_factorial(n - 1, static_cast<std::uint64_t>(k - 1)));
    const double rel = std::abs(s[n] - mult * v.value()) / (mult * vabs.value());
    out.factorization_max_rel_error = std::max(out.factorization_max_rel_error, rel);
  }
  out.factorization_holds = out.factorization_max_rel_error <= opts.factorization_tolerance;

  // n^(-1/alpha) sum_{i <= n} V_i against direct draws, on disjoint labels
  const UniformSource ks_src(derive_seed(seeds.front(), 0x6b73), 1);
  out.ks_n = opts.ks_n;
  out.ks_samples = opts.ks_samples;
  std::vector<double> scaled(opts.ks_samples), direct(opts.ks_samples);
  const double norm = std::pow(static_cast<double>(opts.ks_n), -1.0 / alpha);
  for (std::size_t m = 0; m < opts.ks_samples; ++m) {
    CompensatedSum acc;
    for (std::uint64_t j = 1; j <= opts.ks_n; ++j) acc += sample_stable(p, ks_src, m * opts.ks_n + j);
    scaled[m] = norm * acc.value();
  }
  const Label offset = static_cast<Label>(opts.ks_samples) * opts.ks_n;
  for (std::size_t m = 0; m < opts.ks_samples; ++m) direct[m] = sample_stable(p, ks_src, offset + m + 1);
  out.ks_distance = stats::ks_two_sample(scaled, direct);
  out.ks_critical = stats::ks_critical_two_sample(scaled.size(), direct.size());
  out.self_similar = out.ks_distance < out.ks_critical;
  return out;
}

}  // namespace exarray
