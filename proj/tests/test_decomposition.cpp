#include <gtest/gtest.h>

#include <random>

#include "exarray/decomposition.hpp"
#include "exarray/stats.hpp"

using namespace exarray;

namespace {

std::vector<double> random_table(int k, std::mt19937_64& rng, bool integer) {
  std::vector<double> p(std::size_t{1} << k);
  std::uniform_int_distribution<int> di(-50, 50);
  std::normal_distribution<double> dn(0.0, 3.0);
  for (double& v : p) v = integer ? di(rng) : dn(rng);
  return p;
}

// Q_e from its definition, summing over e' <= e by explicit subset test.
double q_oracle(int k, const std::vector<double>& p, Mask e) {
  double s = 0;
  const Mask full = (Mask{1} << k) - 1;
  for (Mask sub = 0; sub <= full; ++sub)
    if ((sub & ~e) == 0) s += ((std::popcount(e) - std::popcount(sub)) % 2 ? -1.0 : 1.0) * p[sub];
  return s;
}

}  // namespace

TEST(Tables, IntegerIdentitiesAreExact) {
  std::mt19937_64 rng(1);
  for (int k = 2; k <= 5; ++k)
    for (int t = 0; t < 100; ++t) {
      const auto p = random_table(k, rng, true);
      const auto q = q_table(k, p);
      for (Mask e = 0; e < p.size(); ++e) EXPECT_EQ(q[e], q_oracle(k, p, e));
      const auto h = h_from_q(k, q);
      const auto hb = h_from_p_binomial(k, p);
      double total = 0;
      for (int l = 0; l <= k; ++l) {
        EXPECT_EQ(h[l], hb[l]);
        total += h[l];
      }
      EXPECT_EQ(total, p.back());
    }
}

TEST(Tables, RealIdentitiesWithinRounding) {
  std::mt19937_64 rng(2);
  for (int k = 2; k <= 5; ++k)
    for (int t = 0; t < 100; ++t) {
      const auto p = random_table(k, rng, false);
      const auto h = h_from_q(k, q_table(k, p));
      const auto hb = h_from_p_binomial(k, p);
      double total = 0;
      for (int l = 0; l <= k; ++l) {
        EXPECT_NEAR(h[l], hb[l], 1e-12);
        total += h[l];
      }
      EXPECT_NEAR(total, p.back(), 1e-12);
    }
}

TEST(ProjectP, Extremes) {
  const UniformSource src(3);
  for (const auto& m : builtin_models(2)) {
    const IndexTuple i{3, 8};
    const auto full = project_P(m, src, i, PatternVector::ones(2));
    EXPECT_EQ(full.value, sample_entry(m, src, i)) << m.name;
    EXPECT_EQ(full.std_error, 0.0);
    if (m.mean && m.has_analytic(0)) {
      const auto zero = project_P(m, src, i, PatternVector::zeros(2));
      EXPECT_EQ(zero.value, *m.mean) << m.name;
      EXPECT_EQ(zero.method, Method::analytic);
      EXPECT_EQ(zero.mc_samples, 0);
    }
  }
  // Monte Carlo at the zero pattern: mean of fresh entries
  const auto m = interaction(2, unary("id"), unary("sq"));
  ProjectionOptions mc{Method::monte_carlo, 10000};
  const auto z = project_P(m, src, {1, 2}, PatternVector::zeros(2), mc);
  EXPECT_LE(std::abs(z.value - *m.mean), 4 * z.std_error);
}

TEST(ProjectP, AdditiveMonteCarloMatchesClosedForm) {
  const auto m = additive(2, unary("id"), unary("id"));
  const UniformSource src(10);
  const IndexTuple i{5, 6};
  const auto e = PatternVector::from_bits({1, 0});
  const auto closed = project_P(m, src, i, e);
  EXPECT_DOUBLE_EQ(closed.value, u_value(src, {5}) + 0.5 + 0.5);
  const auto mc = project_P(m, src, i, e, {Method::monte_carlo, 10000});
  EXPECT_EQ(mc.method, Method::monte_carlo);
  EXPECT_LE(std::abs(mc.value - closed.value), 4 * mc.std_error);
}

TEST(ProjectP, AllFamiliesMonteCarloAgreesWithClosedForm) {
  const UniformSource src(14);
  for (int k = 2; k <= 3; ++k)
    for (const auto& m : builtin_models(k)) {
      if (!m.finite_second_moment()) continue;
      const auto probes = disjoint_probe_tuples(k, 2);
      for (const auto& e : pattern_vectors(k)) {
        if (!m.has_analytic(e.mask()) || e == PatternVector::ones(k)) continue;
        const auto a = project_P(m, src, probes[1], e);
        const auto b = project_P(m, src, probes[1], e, {Method::monte_carlo, 4096});
        EXPECT_LE(std::abs(a.value - b.value), 4 * b.std_error + 1e-12) << m.name << " mask " << e.mask();
      }
    }
}

TEST(ProjectP, StdErrorHalvesWithFourTimesTheSamples) {
  const auto m = interaction(2, unary("id"), unary("id"));
  const UniformSource src(18);
  const auto e = PatternVector::from_bits({0, 1});
  const auto a = project_P(m, src, {1, 2}, e, {Method::monte_carlo, 4096});
  const auto b = project_P(m, src, {1, 2}, e, {Method::monte_carlo, 16384});
  EXPECT_NEAR(a.std_error / b.std_error, 2.0, 0.4);
}

TEST(ProjectP, Errors) {
  const UniformSource src(1);
  const auto heavy = pareto_tail(2, 0.9);  // no mean, no closed form
  EXPECT_THROW(project_P(heavy, src, {1, 2}, PatternVector::zeros(2), {Method::automatic, 0}), std::invalid_argument);
  EXPECT_THROW(project_P(heavy, src, {1, 2}, PatternVector::zeros(2), {Method::analytic, 10}), std::invalid_argument);
  EXPECT_THROW(project_P(heavy, src, {1, 2, 3}, PatternVector::zeros(2)), std::invalid_argument);
}

TEST(ProjectQ, SpecExamples) {
  const UniformSource src(5);
  const auto deg = fully_degenerate(3, unary("sin"));
  for (const auto& e : pattern_vectors(3)) {
    const auto q = project_Q(deg, src, {1, 2, 3}, e);
    if (e == PatternVector::ones(3))
      EXPECT_EQ(q.value, sample_entry(deg, src, {1, 2, 3}));
    else
      EXPECT_EQ(q.value, 0.0);
  }
  const auto m = interaction(2, unary("id"), unary("id"));
  EXPECT_EQ(project_Q(m, src, {1, 2}, PatternVector::zeros(2)).value, *m.mean);
}

TEST(ProjectQ, MonteCarloAgreesWithClosedForm) {
  const auto m = interaction(3, unary("id"), unary("sq"));
  const UniformSource src(6);
  for (const auto& e : pattern_vectors(3)) {
    const auto a = project_Q(m, src, {2, 4, 6}, e);
    const auto b = project_Q(m, src, {2, 4, 6}, e, {Method::monte_carlo, 4096});
    EXPECT_LE(std::abs(a.value - b.value), 4 * b.std_error + 1e-12) << e.mask();
  }
}

TEST(Hoeffding, AnalyticComponentsSumToEntry) {
  for (int k = 2; k <= 3; ++k) {
    const UniformSource src(7, k);
    for (const auto& m : {additive(k, unary("id"), unary("sq")), fully_degenerate(k, unary("id")),
                          interaction(k, unary("sin"), unary("id"))})
      for (const auto& t : disjoint_probe_tuples(k, 30)) {
        const auto h = hoeffding(m, src, t);
        double total = 0;
        for (double v : h.h) total += v;
        EXPECT_NEAR(total, h.entry, 1e-12);
        EXPECT_LE(h.recombination_gap, 1e-12);
      }
  }
}

TEST(Hoeffding, LevelTwoRecombinationAtKThree) {
  // H_2 = sum_{E_2} P - 2 sum_{E_1} P + 3 P_0 at k = 3
  const auto m = interaction(3, unary("id"), unary("sq"));
  const UniformSource src(8);
  const auto h = hoeffding(m, src, {1, 5, 9});
  double want = 0;
  for (Mask e = 0; e < 8; ++e) {
    const int l = std::popcount(e);
    if (l == 2) want += h.p[e];
    if (l == 1) want -= 2 * h.p[e];
    if (l == 0) want += 3 * h.p[e];
  }
  EXPECT_NEAR(h.h[2], want, 1e-12);
}

TEST(Hoeffding, MonteCarloSumEqualsEntry) {
  const auto m = interaction(2, unary("id"), unary("id"));
  const UniformSource src(9);
  const auto h = hoeffding(m, src, {3, 4}, {Method::monte_carlo, 2048});
  double total = 0;
  for (double v : h.h) total += v;
  EXPECT_NEAR(total, h.entry, 1e-12);
  const auto a = hoeffding(m, src, {3, 4});
  for (int l = 0; l <= 2; ++l) EXPECT_LE(std::abs(a.h[l] - h.h[l]), 4 * h.h_std_error[l] + 1e-12);
}

TEST(Symmetry, SpecExamples) {
  const UniformSource src(11);
  const auto add2 = additive(2, unary("id"), unary("id"));
  const auto exact = check_Q_symmetry(add2, src, {4, 7}, PatternVector::ones(2), {2, 1});
  EXPECT_TRUE(exact.holds);
  EXPECT_EQ(exact.discrepancy, 0.0);

  const auto m3 = interaction(3, unary("id"), unary("sq"));
  const auto mc = check_Q_symmetry(m3, src, {4, 7, 2}, PatternVector::from_bits({1, 1, 0}), {2, 1, 3},
                                   {Method::monte_carlo, 4096});
  EXPECT_TRUE(mc.holds) << mc.discrepancy << " vs " << mc.tolerance;
  EXPECT_GT(mc.tolerance, 0.0);

  EXPECT_THROW(check_Q_symmetry(m3, src, {4, 7, 2}, PatternVector::from_bits({1, 0, 1}), {2, 1, 3}),
               std::invalid_argument);
  EXPECT_THROW(check_Q_symmetry(first_label(2, unary("id")), src, {1, 2}, PatternVector::ones(2), {2, 1}),
               std::invalid_argument);
}

TEST(Degeneracy, SpecExamples) {
  const auto probes = disjoint_probe_tuples(3, 32);
  const UniformSource src(12);
  EXPECT_EQ(degeneracy_order(fully_degenerate(3, unary("id")), src, probes), 2);
  EXPECT_EQ(degeneracy_order(additive(3, unary("id"), unary("id")), src, probes), 0);
  EXPECT_EQ(degeneracy_order(constant(3, 4.0), src, probes), 3);
  EXPECT_EQ(degeneracy_order(fully_degenerate(3, unary("id")), src, probes, {Method::monte_carlo, 512}), 2);
  EXPECT_THROW(degeneracy_order(constant(3, 1.0), src, {}), std::invalid_argument);
}

TEST(Orthogonality, ComponentsUncorrelated) {
  const auto m = interaction(2, unary("id"), unary("id"));
  std::vector<std::vector<double>> h(3);
  for (std::uint64_t s = 0; s < 3000; ++s) {
    const auto c = hoeffding(m, UniformSource(derive_seed(4, s), 2), {1, 2});
    for (int l = 0; l <= 2; ++l) h[l].push_back(c.h[l]);
  }
  const auto c12 = stats::covariance(h[1], h[2]);
  EXPECT_LT(std::abs(c12.value), 4 * c12.std_error);
}
