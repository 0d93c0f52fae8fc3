// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "exarray/report.hpp"

namespace exarray {

inline std::vector<CheckResult> selftest_checks(int threads) {
  std::vector<CheckResult> out;

  // tuple counts against closed forms
  {
    bool ok = true;
    for (std::uint64_t n = 1; n <= 8; ++n)
      for (int k = 1; k <= static_cast<int>(n); ++k)
        ok = ok && enumerate_tuples(n, k, false).count() == falling_factorial(n, k) &&
             enumerate_tuples(n, k, true).count() == binomial(n, k);
    out.push_back({"tuple counts", ok, "n <= 8, all k"});
  }

  // telescoping and binomial recombination on integer tables
  {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> d(-1000, 1000);
    bool ok = true;
    for (int k = 2; k <= 5; ++k)
      for (int t = 0; t < 50; ++t) {
        std::vector<double> p(std::size_t{1} << k);
        for (double& v : p) v = d(rng);
        const auto h = h_from_q(k, q_table(k, p));
        const auto hb = h_from_p_binomial(k, p);
        double total = 0;
        for (int l = 0; l <= k; ++l) {
          total += h[l];
          ok = ok && h[l] == hb[l];
        }
        ok = ok && total == p.back();
      }
    out.push_back({"telescoping and recombination", ok, "200 integer tables, k = 2..5"});
  }

  // exact decomposition for analytic families
  {
    double worst = 0;
    for (int k = 2; k <= 3; ++k)
      for (const auto& m : {additive(k, unary("id"), unary("sq")), fully_degenerate(k, unary("sin")),
                            interaction(k, unary("id"), unary("sq"))}) {
        const UniformSource src(11, k);
        for (const auto& t : disjoint_probe_tuples(k, 20)) {
          const auto h = hoeffding(m, src, t);
          double total = 0;
          for (double v : h.h) total += v;
          worst = std::max(worst, std::abs(total - h.entry));
        }
      }
    out.push_back({"analytic components sum to the entry", worst <= 1e-12, "max gap " + fmt_double(worst)});
  }

  // Q symmetry under permutations fixing e
  {
    bool ok = true;
    const auto m = interaction(3, unary("id"), unary("sin"));
    const UniformSource src(13, 3);
    const IndexTuple i{4, 9, 2};
    for (const auto& e : pattern_vectors(3))
      for (const auto& s : all_permutations(3))
        if (permute_pattern(e, s) == e) ok = ok && check_Q_symmetry(m, src, i, e, s).discrepancy == 0.0;
    out.push_back({"Q symmetry (analytic)", ok, "interaction, k = 3"});
  }

  // Khintchine exact oracle
  {
    const std::vector<double> w{0.3, -1.2, 0.7, 2.0, 0.1};
    const auto res = khintchine_check(w, 1.5, 4000, 3);
    out.push_back({"Khintchine bound", res.pass && res.exact_ratio && *res.exact_ratio <= 1.0,
                   "ratio " + fmt_double(res.ratio) + " exact " + fmt_double(res.exact_ratio.value_or(-1))});
  }

  // thread-count invariance of streaming sums
  {
    const auto m = additive(2, unary("id"), unary("id"));
    const UniformSource src(17, 2);
    const auto a = nested_sums(m, src, 300, 1);
    const auto b = nested_sums(m, src, 300, std::max(2, threads));
    out.push_back({"thread-count invariance", a == b, "nested sums to n = 300"});
  }
  return out;
}

}  // namespace exarray
