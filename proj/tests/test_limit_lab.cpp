#include <gtest/gtest.h>

#include <map>
#include <random>

#include "exarray/limit_lab.hpp"

using namespace exarray;

TEST(Normalization, Exponents) {
  EXPECT_DOUBLE_EQ(normalization_exponent(2, 1.5), 1 + 1 / 1.5);
  EXPECT_DOUBLE_EQ(normalization_exponent(2, 0.8), 2.5);
  EXPECT_DOUBLE_EQ(normalization_exponent(3, 1.0), 3.0);
  EXPECT_THROW(normalization_exponent(2, 0.0), std::invalid_argument);
  EXPECT_THROW(normalization_exponent(2, 2.0), std::invalid_argument);
}

TEST(StreamingSum, ConstantKernelCounts) {
  const UniformSource src(1);
  for (int k = 1; k <= 4; ++k)
    for (std::uint64_t n : {4u, 7u, 12u}) {
      if (n < static_cast<std::uint64_t>(k)) continue;
      EXPECT_EQ(streaming_sum(constant(k, 2.5), src, n, 1), 2.5 * static_cast<double>(falling_factorial(n, k)));
    }
}

TEST(StreamingSum, NaiveDoubleLoopOracle) {
  const auto m = additive(2, unary("id"), unary("id"));
  const UniformSource src(2);
  double naive = 0;
  for (Label i = 1; i <= 5; ++i)
    for (Label j = 1; j <= 5; ++j)
      if (i != j) naive += u_value(src, {i}) + u_value(src, {j}) + u_value(src, {i, j});
  const double s = streaming_sum(m, src, 5, 1);
  EXPECT_LE(std::abs(s - naive), 1e-12 * std::abs(naive));
}

TEST(StreamingSum, SymmetricFactorialIdentity) {
  for (int k = 2; k <= 3; ++k) {
    const auto m = interaction(k, unary("sin"), unary("sq"));
    const UniformSource src(3, k);
    CompensatedSum increasing;
    for (const auto& [t, v] : sample_block(m, src, 10, true)) increasing += v;
    const double s = streaming_sum(m, src, 10, 1);
    EXPECT_LE(std::abs(s - static_cast<double>(factorial(k)) * increasing.value()), 1e-12 * std::abs(s));
  }
}

TEST(StreamingSum, ThreadCountInvariance) {
  for (const auto& m : {first_label(2, unary("sin")), interaction(3, unary("id"), unary("sq")),
                        first_label(3, unary("id"))}) {
    const UniformSource src(4, m.k());
    EXPECT_EQ(nested_sums(m, src, 60, 1), nested_sums(m, src, 60, 4)) << m.name;
  }
}

TEST(StreamingSum, OverflowGuard) {
  const UniformSource src(1);
  EXPECT_THROW(streaming_sum(constant(4, 1), src, std::uint64_t{1} << 20, 1), RangeError);
  EXPECT_THROW(streaming_sum(constant(3, 1), src, 2, 1), std::invalid_argument);
}

TEST(MzSeries, ZeroKernel) {
  const auto s = mz_series(constant(2, 0.0), 1.5, dyadic_grid(2, 6), derive_seeds(1, 3), {1});
  for (const auto& rep : s.normalized)
    for (double v : rep) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(s.centered);
  EXPECT_FALSE(s.hypothesis_violated);
}

TEST(MzSeries, PreconditionsAndFlags) {
  EXPECT_THROW(mz_series(pareto_tail(2, 0.9), 1.5, {8, 16}, {1}), std::invalid_argument);
  EXPECT_THROW(mz_series(constant(2, 1), 2.0, {8, 16}, {1}), std::invalid_argument);
  EXPECT_THROW(mz_series(constant(2, 1), 1.5, {}, {1}), std::invalid_argument);
  const auto s = mz_series(stable_factor(2, 1.5), 1.5, {8, 16}, {1}, {1});
  EXPECT_TRUE(s.hypothesis_violated);
  const auto r = mz_series(pareto_tail(2, 0.9), 0.8, {8, 16}, {1}, {1});
  EXPECT_FALSE(r.centered);
  EXPECT_DOUBLE_EQ(r.exponent, 2.5);
  EXPECT_EQ(r.regime, "n^(k/r)");
}

TEST(MzSeries, EstimatedMeanCentersWhenAllowed) {
  MzOptions o{1, true, 200000, 9};
  const auto m = make_model("pareto_tail:1.8", 2);
  ArrayModel undeclared = m;
  undeclared.mean.reset();
  const auto s = mz_series(undeclared, 1.5, {8, 16}, {1}, o);
  EXPECT_NEAR(s.mean, *m.mean, 4 * s.mean_std_error);
  EXPECT_GT(s.mean_std_error, 0.0);
}

TEST(MonotoneTail, Basics) {
  const std::vector<double> down{5, 4, 3, 2, 1}, bump{5, 4, 4.5, 2, 1};
  EXPECT_TRUE(monotone_tail(down));
  EXPECT_FALSE(monotone_tail(bump));
  EXPECT_THROW(monotone_tail(std::vector<double>{1, 0}), std::invalid_argument);
}

TEST(RateFit, ConstantKernelUncentered) {
  const auto s = mz_series(constant(2, 3.0), 0.8, dyadic_grid(4, 9), derive_seeds(2, 16), {1});
  const auto f = rate_fit(s);
  EXPECT_FALSE(f.degenerate);
  EXPECT_NEAR(f.slope, 2.0, 0.05);
  EXPECT_GT(f.slope, s.exponent - 0.6);
}

TEST(RateFit, CenteredConstantIsDegenerate) {
  const auto s = mz_series(constant(2, 3.0), 1.5, dyadic_grid(4, 9), derive_seeds(2, 16), {1});
  EXPECT_TRUE(rate_fit(s).degenerate);
}

TEST(RateFit, AdditiveShowsGap) {
  const auto s = mz_series(additive(2, unary("id"), unary("id")), 1.5, dyadic_grid(4, 9), derive_seeds(3, 16), {1});
  const auto f = rate_fit(s);
  EXPECT_LT(f.slope, 1 + 1 / 1.5 - 0.05);
  EXPECT_NEAR(f.slope, 1.5, 0.1);
}

TEST(RateFit, StableFactorHasNoGap) {
  const auto s = mz_series(stable_factor(2, 1.5), 1.5, dyadic_grid(4, 9), derive_seeds(4, 32), {1});
  EXPECT_GE(rate_fit(s).slope, 1 + 1 / 1.5 - 0.05);
}

TEST(RateFit, Preconditions) {
  const auto s = mz_series(constant(2, 1.0), 0.8, dyadic_grid(4, 6), derive_seeds(2, 16), {1});
  EXPECT_THROW(rate_fit(s), std::invalid_argument);
}

TEST(EstimateV, AdditiveIsOneThird) {
  const auto v = estimate_V(additive(2, unary("id"), unary("id")), 1);
  EXPECT_LE(std::abs(v.covariance_form - 1.0 / 3), 3 * v.covariance_form_se);
  EXPECT_LE(std::abs(v.conditional_variance - 1.0 / 3), 3 * v.conditional_variance_se);
  EXPECT_TRUE(v.agree(3));
}

TEST(EstimateV, SymmetricFamilies) {
  // k^2 Var(E(X|U_1))
  const std::vector<std::pair<ArrayModel, double>> cases = {
      {additive(3, unary("id"), unary("sq")), 9.0 / 12},
      {interaction(2, unary("id"), unary("id")), 4.0 * (1.0 / 12) / 4},
      {fully_degenerate(2, unary("sin")), 0.0},
      {fully_degenerate(3, unary("id")), 0.0},
  };
  for (const auto& [m, want] : cases) {
    const auto v = estimate_V(m, 5);
    EXPECT_TRUE(v.agree(3)) << m.name;
    EXPECT_LE(std::abs(v.covariance_form - want), 3 * v.covariance_form_se + 1e-12) << m.name;
    EXPECT_LE(std::abs(v.conditional_variance - want), 3 * v.conditional_variance_se + 1e-12) << m.name;
    EXPECT_GE(v.covariance_form, -3 * v.covariance_form_se - 1e-12);
  }
}

TEST(EstimateV, NonSymmetricFirstLabel) {
  // X_ij = f(U_i): the symmetrized array gives V = Var f
  const auto v = estimate_V(first_label(2, unary("id")), 6);
  EXPECT_LE(std::abs(v.covariance_form - 1.0 / 12), 3 * v.covariance_form_se);
  EXPECT_LE(std::abs(v.conditional_variance - 1.0 / 12), 3 * v.conditional_variance_se);
  EXPECT_TRUE(v.agree(3));
}

TEST(EstimateV, MonteCarloProjections) {
  VOptions o;
  o.replications = 4000;
  o.projection = {Method::monte_carlo, 256};
  const auto v = estimate_V(interaction(2, unary("id"), unary("id")), 7, o);
  EXPECT_LE(std::abs(v.conditional_variance - 1.0 / 12), 3 * v.conditional_variance_se);
  EXPECT_TRUE(v.agree(3));
}

TEST(EstimateV, NeedsSecondMoment) {
  EXPECT_THROW(estimate_V(pareto_tail(2, 1.8), 1), std::invalid_argument);
  EXPECT_THROW(estimate_V(stable_factor(2, 1.5), 1), std::invalid_argument);
}

TEST(LilEnvelope, ZeroVarianceModel) {
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto env = lil_envelope(constant(2, 1.5), 3, 400, seeds, 0.0, 1);
  for (const auto& t : env.trajectories) {
    EXPECT_EQ(t.peak, 0.0);
    for (double s : t.statistic) EXPECT_EQ(s, 0.0);
  }
}

TEST(LilEnvelope, Preconditions) {
  const std::vector<std::uint64_t> seeds{1};
  EXPECT_THROW(lil_envelope(pareto_tail(2, 1.8), 3, 100, seeds, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(lil_envelope(constant(2, 1), 2, 100, seeds, 1.0, 1), std::invalid_argument);
}

TEST(LilEnvelope, CheckpointsAndExtremes) {
  const std::vector<std::uint64_t> seeds{3};
  const auto env = lil_envelope(additive(2, unary("id"), unary("id")), 10, 2000, seeds, 1.0 / 3, 1);
  const auto& t = env.trajectories.front();
  EXPECT_EQ(t.checkpoints.front(), 10u);
  EXPECT_EQ(t.checkpoints.back(), 2000u);
  for (double s : t.statistic) {
    EXPECT_LE(s, t.running_max);
    EXPECT_GE(s, t.running_min);
  }
  EXPECT_EQ(t.peak, std::max(t.running_max, -t.running_min));
}

namespace {

// E|sum a eps|^r from the exact law of the partial sums, built one weight at a time.
double khintchine_recursive(const std::vector<double>& w, double r) {
  std::map<double, double> law{{0.0, 1.0}};
  for (double a : w) {
    std::map<double, double> next;
    for (const auto& [x, p] : law) {
      next[x + a] += p / 2;
      next[x - a] += p / 2;
    }
    law = std::move(next);
  }
  double e = 0;
  for (const auto& [x, p] : law) e += p * std::pow(std::abs(x), r);
  return e;
}

}  // namespace

TEST(Khintchine, TrivialCases) {
  const std::vector<double> one{1.0}, two{1.0, 1.0};
  for (double r : {1.25, 1.5, 2.0}) {
    const auto res = khintchine_check(one, r, 100, 1);
    EXPECT_EQ(res.ratio, 1.0);
    EXPECT_TRUE(res.pass);
    for (double a : {-0.3, 0.7, 1.9, 3.1}) {
      const auto single = khintchine_check(std::vector<double>{a}, r, 100, 1);
      EXPECT_EQ(single.ratio, 1.0) << a << " " << r;
      EXPECT_TRUE(single.pass) << a << " " << r;
    }
  }
  EXPECT_DOUBLE_EQ(*khintchine_check(two, 2.0, 100, 1).exact_ratio, 1.0);
  EXPECT_THROW(khintchine_check(one, 1.0, 100, 1), std::invalid_argument);
  EXPECT_THROW(khintchine_check(std::vector<double>{}, 1.5, 100, 1), std::invalid_argument);
}

TEST(Khintchine, ExactOracleAndBound) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  for (int t = 0; t < 5; ++t) {
    std::vector<double> w(12);
    for (double& a : w) a = d(rng);
    for (double r : {1.25, 1.5, 2.0}) {
      double sq = 0;
      for (double a : w) sq += a * a;
      const double want = khintchine_recursive(w, r) / std::pow(sq, r / 2);
      const auto res = khintchine_check(w, r, 100000, 10 + t);
      ASSERT_TRUE(res.exact_ratio.has_value());
      EXPECT_NEAR(*res.exact_ratio, want, 1e-12);
      EXPECT_TRUE(res.pass) << res.ratio << " se " << res.std_error;
      EXPECT_LE(std::abs(res.ratio - want), 4 * res.std_error);
    }
  }
}

TEST(Counterexample, FactorizationAndSelfSimilarity) {
  CounterexampleOptions o;
  o.threads = 1;
  o.ks_samples = 1000;
  o.ks_n = 128;
  for (int k = 2; k <= 3; ++k) {
    const auto ce = counterexample(1.5, k, dyadic_grid(3, 6), derive_seeds(5, 16), o);
    EXPECT_TRUE(ce.factorization_holds) << ce.factorization_max_rel_error;
    EXPECT_TRUE(ce.self_similar) << ce.ks_distance << " vs " << ce.ks_critical;
    EXPECT_TRUE(ce.series.hypothesis_violated);
  }
}
