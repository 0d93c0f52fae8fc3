// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include "exarray/uniform_source.hpp"

namespace exarray {

/// Parameters of an alpha-stable law in the S_alpha(scale, beta, shift)
/// parameterization (shift is the mean when alpha > 1).
struct StableParams {
  double alpha = 1.5;
  double beta = 0.0;
  double scale = 1.0;
  double shift = 0.0;

  void validate() const {
    // alpha = 2 is accepted as the Gaussian endpoint of the transform.
    require(alpha > 0.0 && alpha <= 2.0, "StableParams: alpha must lie in (0, 2]");
    require(beta >= -1.0 && beta <= 1.0, "StableParams: beta must lie in [-1, 1]");
    require(scale > 0.0, "StableParams: scale must be positive");
  }
};

/// Splits the 53-bit grid value of u into two independent uniforms on the
/// even and odd bit positions. Both land on cell midpoints, so neither is 0.
inline std::pair<double, double> deinterleave(double u) {
  const auto b = static_cast<std::uint64_t>(u * 0x1.0p53);
  auto compact = [](std::uint64_t x) {
    x &= 0x5555555555555555ULL;
    x = (x | (x >> 1)) & 0x3333333333333333ULL;
    x = (x | (x >> 2)) & 0x0f0f0f0f0f0f0f0fULL;
    x = (x | (x >> 4)) & 0x00ff00ff00ff00ffULL;
    x = (x | (x >> 8)) & 0x0000ffff0000ffffULL;
    return (x | (x >> 16)) & 0x00000000ffffffffULL;
  };
  const std::uint64_t even = compact(b);       // 27 bits
  const std::uint64_t odd = compact(b >> 1);   // 26 bits
  return {(static_cast<double>(even) + 0.5) * 0x1.0p-27, (static_cast<double>(odd) + 0.5) * 0x1.0p-26};
}

/// Chambers-Mallows-Stuck transform of (u_angle, u_exp) in (0,1)^2.
inline double cms_transform(const StableParams& p, double u_angle, double u_exp) {
  using std::numbers::pi;
  const double v = pi * (u_angle - 0.5);
  const double w = -std::log(u_exp);
  const double a = p.alpha;
  if (std::abs(a - 1.0) < 1e-12) {
    const double h = pi / 2 + p.beta * v;
    const double x = (2 / pi) * (h * std::tan(v) - p.beta * std::log((pi / 2 * w * std::cos(v)) / h));
    return p.scale * x + (2 / pi) * p.beta * p.scale * std::log(p.scale) + p.shift;
  }
  const double t = p.beta * std::tan(pi * a / 2);
  const double b = std::atan(t) / a;
  const double s = std::pow(1 + t * t, 1 / (2 * a));
  const double x = s * std::sin(a * (v + b)) / std::pow(std::cos(v), 1 / a) *
                   std::pow(std::cos(v - a * (v + b)) / w, (1 - a) / a);
  return p.scale * x + p.shift;
}

/// Stable variate attached to `label`: the two CMS uniforms are the bit
/// halves of U_{label}, so array families built on U_{label} see the same value.
inline double stable_from_uniform(const StableParams& p, double u) {
  const auto [ua, ue] = deinterleave(u);
  return cms_transform(p, ua, ue);
}

inline double sample_stable(const StableParams& p, const UniformSource& src, Label label) {
  p.validate();
  require(label > 0, "sample_stable: label must be positive");
  return stable_from_uniform(p, src.single(label));
}

/// E|X|^q for the symmetric law with characteristic function exp(-|scale t|^alpha), q < alpha.
inline double symmetric_stable_abs_moment(double alpha, double q, double scale = 1.0) {
  require(q > -1.0 && q < alpha, "symmetric_stable_abs_moment: need -1 < q < alpha");
  using std::numbers::pi;
  return std::pow(scale, q) * std::pow(2.0, q) * std::tgamma((1 + q) / 2) * std::tgamma(1 - q / alpha) /
         (std::sqrt(pi) * std::tgamma(1 - q / 2));
}

}  // namespace exarray
