// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "exarray/index.hpp"
#include "exarray/parallel.hpp"

namespace exarray::stats {

inline double mean(std::span<const double> x) {
  require(!x.empty(), "mean: empty sample");
  CompensatedSum s;
  for (double v : x) s += v;
  return s.value() / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> x) {
  require(x.size() >= 2, "variance: need at least two observations");
  const double m = mean(x);
  CompensatedSum s;
  for (double v : x) s += (v - m) * (v - m);
  return s.value() / static_cast<double>(x.size() - 1);
}

inline double std_error(std::span<const double> x) { return std::sqrt(variance(x) / static_cast<double>(x.size())); }

inline double median(std::vector<double> x) {
  require(!x.empty(), "median: empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

/// Sample covariance and the standard error of that estimate (delta method
/// on the mean of centered cross products).
struct CovarianceEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

inline CovarianceEstimate covariance(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "covariance: need two equal-length samples");
  const double mx = mean(x), my = mean(y);
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mx) * (y[i] - my);
  const double n = static_cast<double>(x.size());
  return {mean(z) * n / (n - 1), std_error(z)};
}

/// Kolmogorov-Smirnov distance between the sample and Uniform[0,1).
inline double ks_uniform(std::vector<double> x) {
  require(!x.empty(), "ks_uniform: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = std::clamp(x[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic Kolmogorov quantile: sqrt(-ln(level/2)/2); 1.6276 at level 0.01.
inline double kolmogorov_quantile(double level) { return std::sqrt(-std::log(level / 2) / 2); }

inline double ks_critical_one_sample(std::size_t n, double level = 0.01) {
  const double rn = std::sqrt(static_cast<double>(n));
  return kolmogorov_quantile(level) / (rn + 0.12 + 0.11 / rn);
}

inline double ks_critical_two_sample(std::size_t n, std::size_t m, double level = 0.01) {
  const double a = static_cast<double>(n), b = static_cast<double>(m);
  return kolmogorov_quantile(level) * std::sqrt((a + b) / (a * b));
}

/// Hill estimate of the tail index of |x| from the `top` largest order statistics.
inline double hill_tail_index(std::vector<double> x, std::size_t top) {
  for (double& v : x) v = std::abs(v);
  require(top >= 2 && top < x.size(), "hill_tail_index: need 2 <= top < sample size");
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(top), x.end(), std::greater<>());
  const double threshold = x[top];
  CompensatedSum s;
  for (std::size_t i = 0; i < top; ++i) s += std::log(x[i] / threshold);
  return static_cast<double>(top) / s.value();
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double half_width = 0.0;  // 95% two-sided
  bool degenerate = false;
};

/// Ordinary least squares of y on x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 3, "fit_line: need at least three points");
  LineFit out;
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0) || !std::isfinite(sxy)) {
    out.degenerate = true;
    out.slope = out.intercept = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - out.intercept - out.slope * x[i];
    rss += r * r;
  }
  const double df = static_cast<double>(x.size()) - 2;
  out.slope_se = std::sqrt(rss / df / sxx);
  const boost::math::students_t t(df);
  out.half_width = boost::math::quantile(boost::math::complement(t, 0.025)) * out.slope_se;
  return out;
}

}  // namespace exarray::stats
