// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "exarray/index.hpp"
#include "exarray/stable.hpp"

namespace exarray {

/// tau: maps the 2^k - 1 uniforms (one per nonempty pattern, canonical order)
/// to an array entry.
using KernelFn = std::function<double(std::span<const double>)>;

/// Closed-form P_e: receives the same argument list as the kernel and may
/// only read the arguments of patterns e' <= e.
using ProjectionFn = std::function<double(std::span<const double>)>;

struct Kernel {
  int k = 1;
  KernelFn eval;

  double operator()(std::span<const double> u) const { return eval(u); }
};

struct ArrayModel {
  std::string name;
  Kernel kernel;
  std::optional<double> mean;
  /// Moments E|X|^s are finite for every s below this; +inf for bounded kernels.
  std::optional<double> moment_exponent;
  /// Indexed by pattern mask; empty entries have no closed form.
  std::vector<ProjectionFn> analytic_projections;
  bool symmetric = false;
  bool dissociated = true;

  [[nodiscard]] int k() const { return kernel.k; }
  [[nodiscard]] bool has_analytic(Mask e) const {
    return e < analytic_projections.size() && static_cast<bool>(analytic_projections[e]);
  }
  [[nodiscard]] bool finite_second_moment() const { return moment_exponent && *moment_exponent > 2.0; }
};

/// Index of pattern `mask` in the kernel argument list.
class ArgLayout {
 public:
  explicit ArgLayout(int k) : k_(k), pos_(canonical_positions(k)) {}
  [[nodiscard]] int operator()(Mask m) const { return pos_[m] - 1; }
  [[nodiscard]] int slot(int s) const { return (*this)(PatternVector::slot_bit(k_, s)); }
  [[nodiscard]] int top() const { return (*this)((Mask{1} << k_) - 1); }
  [[nodiscard]] int k() const { return k_; }

 private:
  int k_;
  std::vector<int> pos_;
};

namespace detail {

/// Sum and product that do not depend on argument order, so that symmetric
/// families give bit-identical entries under any permutation of the tuple.
inline void small_sort(std::span<double> v) {
  for (std::size_t a = 1; a < v.size(); ++a) {
    const double x = v[a];
    std::size_t b = a;
    for (; b > 0 && x < v[b - 1]; --b) v[b] = v[b - 1];
    v[b] = x;
  }
}
inline double order_free_sum(std::span<double> v) {
  if (v.size() > 2) small_sort(v);
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}
inline double order_free_product(std::span<double> v) {
  if (v.size() > 2) small_sort(v);
  double s = 1.0;
  for (double x : v) s *= x;
  return s;
}

}  // namespace detail

//------------------------------------------------------------------------------
// Unary building blocks
//------------------------------------------------------------------------------

struct UnaryFn {
  std::string name;
  double (*f)(double) = nullptr;
  double mean = 0.0;
  double variance = 0.0;
};

inline UnaryFn unary(const std::string& name) {
  using std::numbers::pi;
  if (name == "id") return {name, +[](double u) { return u; }, 0.5, 1.0 / 12};
  if (name == "sq") return {name, +[](double u) { return u * u; }, 1.0 / 3, 4.0 / 45};
  if (name == "sin") return {name, +[](double u) { return std::sin(2 * pi * u); }, 0.0, 0.5};
  if (name == "zero") return {name, +[](double) { return 0.0; }, 0.0, 0.0};
  throw std::invalid_argument("unknown unary function '" + name + "' (expected id, sq, sin, zero)");
}

//------------------------------------------------------------------------------
// Built-in families
//------------------------------------------------------------------------------

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// X_i = sum_l f(U_{i_l}) + g(U_{i}).
inline ArrayModel additive(int k, const UnaryFn& f, const UnaryFn& g) {
  require(k >= 1 && k <= kMaxDimension, "additive: k out of range");
  ArgLayout lay(k);
  std::array<int, kMaxDimension> slots{};
  for (int s = 0; s < k; ++s) slots[s] = lay.slot(s);
  const int top = lay.top();
  ArrayModel m;
  m.name = "additive:" + f.name + "," + g.name;
  m.kernel = {k, [=](std::span<const double> u) {
                std::array<double, kMaxDimension> t;
                for (int s = 0; s < k; ++s) t[s] = f.f(u[slots[s]]);
                return detail::order_free_sum({t.data(), static_cast<std::size_t>(k)}) + g.f(u[top]);
              }};
  m.mean = k * f.mean + g.mean;
  m.moment_exponent = kInf;
  m.symmetric = true;
  const Mask full = (Mask{1} << k) - 1;
  m.analytic_projections.resize(full + 1);
  for (Mask e = 0; e <= full; ++e) {
    m.analytic_projections[e] = [=](std::span<const double> u) {
      std::array<double, kMaxDimension> t;
      for (int s = 0; s < k; ++s) t[s] = (e & PatternVector::slot_bit(k, s)) ? f.f(u[slots[s]]) : f.mean;
      return detail::order_free_sum({t.data(), static_cast<std::size_t>(k)}) + (e == full ? g.f(u[top]) : g.mean);
    };
  }
  return m;
}

/// X_i = phi(U_{i}) - E phi: every Hoeffding component below level k vanishes.
inline ArrayModel fully_degenerate(int k, const UnaryFn& phi) {
  require(k >= 1 && k <= kMaxDimension, "fully_degenerate: k out of range");
  const int top = ArgLayout(k).top();
  ArrayModel m;
  m.name = "fully_degenerate:" + phi.name;
  m.kernel = {k, [=](std::span<const double> u) { return phi.f(u[top]) - phi.mean; }};
  m.mean = 0.0;
  m.moment_exponent = kInf;
  m.symmetric = true;
  const Mask full = (Mask{1} << k) - 1;
  m.analytic_projections.assign(full + 1, [](std::span<const double>) { return 0.0; });
  m.analytic_projections[full] = m.kernel.eval;
  return m;
}

/// X_i = (1 - U_{i})^(-1/s): Pareto entries, E|X|^r finite exactly for r < s.
inline ArrayModel pareto_tail(int k, double s) {
  require(k >= 1 && k <= kMaxDimension, "pareto_tail: k out of range");
  require(s > 0.0, "pareto_tail: tail exponent must be positive");
  const int top = ArgLayout(k).top();
  std::ostringstream nm;
  nm << "pareto_tail:" << s;
  ArrayModel m;
  m.name = nm.str();
  m.kernel = {k, [=](std::span<const double> u) { return std::pow(1.0 - u[top], -1.0 / s); }};
  m.moment_exponent = s;
  m.symmetric = true;
  const Mask full = (Mask{1} << k) - 1;
  m.analytic_projections.resize(full + 1);
  m.analytic_projections[full] = m.kernel.eval;
  if (s > 1.0) {
    const double mu = s / (s - 1.0);
    m.mean = mu;
    for (Mask e = 0; e < full; ++e) m.analytic_projections[e] = [mu](std::span<const double>) { return mu; };
  }
  return m;
}

/// X_{i_1..i_k} = V_{i_1} with V_i alpha-stable, symmetric (beta = 0).
inline ArrayModel stable_factor(int k, double alpha) {
  require(k >= 1 && k <= kMaxDimension, "stable_factor: k out of range");
  const StableParams p{alpha, 0.0, 1.0, 0.0};
  p.validate();
  require(alpha < 2.0, "stable_factor: alpha must lie in (0, 2)");
  const int first = ArgLayout(k).slot(0);
  std::ostringstream nm;
  nm << "stable_factor:" << alpha;
  ArrayModel m;
  m.name = nm.str();
  m.kernel = {k, [=](std::span<const double> u) {
                 // two-slot memo: streaming sums revisit each first label many times
                 thread_local double last_alpha = 0.0;
                 thread_local double key[2] = {-1.0, -1.0}, val[2] = {0.0, 0.0};
                 thread_local int victim = 0;
                 const double x = u[first];
                 if (last_alpha == p.alpha) {
                   if (key[0] == x) return val[0];
                   if (key[1] == x) return val[1];
                 } else {
                   last_alpha = p.alpha;
                   key[0] = key[1] = -1.0;
                 }
                 const double v = stable_from_uniform(p, x);
                 key[victim] = x;
                 val[victim] = v;
                 victim ^= 1;
                 return v;
               }};
  m.moment_exponent = alpha;
  m.symmetric = k == 1;
  const Mask full = (Mask{1} << k) - 1;
  const Mask lead = PatternVector::slot_bit(k, 0);
  m.analytic_projections.resize(full + 1);
  for (Mask e = 0; e <= full; ++e)
    if (e & lead) m.analytic_projections[e] = m.kernel.eval;
  if (alpha > 1.0) {
    m.mean = 0.0;
    for (Mask e = 0; e <= full; ++e)
      if (!(e & lead)) m.analytic_projections[e] = [](std::span<const double>) { return 0.0; };
  }
  return m;
}

/// X_i = prod_l f(U_{i_l}) + g(U_{i}): nonzero components at every level.
inline ArrayModel interaction(int k, const UnaryFn& f, const UnaryFn& g) {
  require(k >= 1 && k <= kMaxDimension, "interaction: k out of range");
  ArgLayout lay(k);
  std::array<int, kMaxDimension> slots{};
  for (int s = 0; s < k; ++s) slots[s] = lay.slot(s);
  const int top = lay.top();
  ArrayModel m;
  m.name = "interaction:" + f.name + "," + g.name;
  m.kernel = {k, [=](std::span<const double> u) {
                std::array<double, kMaxDimension> t;
                for (int s = 0; s < k; ++s) t[s] = f.f(u[slots[s]]);
                return detail::order_free_product({t.data(), static_cast<std::size_t>(k)}) + g.f(u[top]);
              }};
  m.mean = std::pow(f.mean, k) + g.mean;
  m.moment_exponent = kInf;
  m.symmetric = true;
  const Mask full = (Mask{1} << k) - 1;
  m.analytic_projections.resize(full + 1);
  for (Mask e = 0; e <= full; ++e) {
    m.analytic_projections[e] = [=](std::span<const double> u) {
      std::array<double, kMaxDimension> t{};
      for (int s = 0; s < k; ++s) t[s] = (e & PatternVector::slot_bit(k, s)) ? f.f(u[slots[s]]) : f.mean;
      return detail::order_free_product({t.data(), static_cast<std::size_t>(k)}) +
             (e == full ? g.f(u[top]) : g.mean);
    };
  }
  return m;
}

/// X_i = f(U_{i_1}): exchangeable but not symmetric, bounded.
inline ArrayModel first_label(int k, const UnaryFn& f) {
  require(k >= 1 && k <= kMaxDimension, "first_label: k out of range");
  const int first = ArgLayout(k).slot(0);
  ArrayModel m;
  m.name = "first_label:" + f.name;
  m.kernel = {k, [=](std::span<const double> u) { return f.f(u[first]); }};
  m.mean = f.mean;
  m.moment_exponent = kInf;
  m.symmetric = k == 1;
  const Mask full = (Mask{1} << k) - 1;
  const Mask lead = PatternVector::slot_bit(k, 0);
  m.analytic_projections.resize(full + 1);
  for (Mask e = 0; e <= full; ++e) {
    if (e & lead)
      m.analytic_projections[e] = m.kernel.eval;
    else
      m.analytic_projections[e] = [mu = f.mean](std::span<const double>) { return mu; };
  }
  return m;
}

inline ArrayModel constant(int k, double c) {
  require(k >= 1 && k <= kMaxDimension, "constant: k out of range");
  std::ostringstream nm;
  nm << "constant:" << c;
  ArrayModel m;
  m.name = nm.str();
  m.kernel = {k, [c](std::span<const double>) { return c; }};
  m.mean = c;
  m.moment_exponent = kInf;
  m.symmetric = true;
  m.analytic_projections.assign((std::size_t{1} << k), [c](std::span<const double>) { return c; });
  return m;
}

//------------------------------------------------------------------------------
// Registry
//------------------------------------------------------------------------------

/// Parses "family[:p1[,p2]]", e.g. "pareto_tail:1.8" or "additive:id,sq".
inline ArrayModel make_model(const std::string& spec, int k) {
  const auto colon = spec.find(':');
  const std::string family = spec.substr(0, colon);
  std::vector<std::string> params;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    for (std::string p; std::getline(ss, p, ',');) params.push_back(p);
  }
  auto param = [&](std::size_t m, const std::string& fallback) {
    return m < params.size() && !params[m].empty() ? params[m] : fallback;
  };
  auto number = [&](std::size_t m, const std::string& fallback) {
    const std::string p = param(m, fallback);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(p, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != p.size()) throw std::invalid_argument("model '" + spec + "': bad numeric parameter '" + p + "'");
    return v;
  };
  if (family == "additive") return additive(k, unary(param(0, "id")), unary(param(1, "id")));
  if (family == "fully_degenerate") return fully_degenerate(k, unary(param(0, "id")));
  if (family == "pareto_tail") return pareto_tail(k, number(0, "1.8"));
  if (family == "stable_factor") return stable_factor(k, number(0, "1.5"));
  if (family == "interaction") return interaction(k, unary(param(0, "id")), unary(param(1, "id")));
  if (family == "first_label") return first_label(k, unary(param(0, "id")));
  if (family == "constant") return constant(k, number(0, "1"));
  throw std::invalid_argument("unknown model family '" + family + "'");
}

/// Default instance of every family at dimension k.
inline std::vector<ArrayModel> builtin_models(int k = 2) {
  return {additive(k, unary("id"), unary("id")),
          fully_degenerate(k, unary("id")),
          pareto_tail(k, 1.8),
          stable_factor(k, 1.5),
          interaction(k, unary("id"), unary("id")),
          first_label(k, unary("id")),
          constant(k, 1.0)};
}

}  // namespace exarray
