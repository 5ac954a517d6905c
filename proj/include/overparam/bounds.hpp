#pragma once

// Computable constants and empirical checkers for the convergence argument:
// descent progress, gradient lower bound under the indicator condition,
// geometric contraction, weight-Lipschitz bounds for the network and its
// gradient, and the saturated-gradient bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "overparam/core_net.hpp"
#include "overparam/risk_grad.hpp"
#include "overparam/rng.hpp"

namespace overparam {

/// A positive quantity kept as its natural logarithm.
struct LogValue {
  double log = 0.0;

  static constexpr double max_log = 709.0;  // exp(709) ~ 8.2e307

  bool overflows() const noexcept { return log > max_log; }
  std::optional<double> linear() const {
    if (overflows()) return std::nullopt;
    return std::exp(log);
  }
  std::string describe() const {
    if (auto v = linear()) return fmt::format("{:.10g}", *v);
    return fmt::format("overflow, log value {:.10g}", log);
  }
};

// ---------------------------------------------------------------------------
// Network Lipschitz bound in the weights

inline double lipschitz_scale(const WeightVector& w, std::span<const double> x) {
  return std::max({w.max_abs(), sup_norm(x), 1.0});
}

/// (2kn+1) (2k0+1)^L max{||w||,||x||,1}^{L+1} ||w - wbar||_inf
inline double weight_lipschitz_bound(const WeightVector& w, const WeightVector& wbar, std::span<const double> x) {
  const Architecture& a = w.arch();
  const double M = lipschitz_scale(w, x);
  const double L = static_cast<double>(a.L);
  return (2.0 * static_cast<double>(a.kn) + 1.0) * std::pow(2.0 * static_cast<double>(a.k0) + 1.0, L) *
         std::pow(M, L + 1.0) * max_abs_diff(w, wbar);
}

/// Single-subnetwork variant: (2k0+1)^L M^L max inner difference of subnetwork k.
inline double subnet_weight_lipschitz_bound(const WeightVector& w, const WeightVector& wbar, std::span<const double> x,
                                  std::size_t k) {
  const Architecture& a = w.arch();
  const double M = lipschitz_scale(w, x);
  const double L = static_cast<double>(a.L);
  double diff = 0.0;
  for (std::size_t idx : subnet_indices(a, k)) diff = std::max(diff, std::abs(w[idx] - wbar[idx]));
  return std::pow(2.0 * static_cast<double>(a.k0) + 1.0, L) * std::pow(M, L) * diff;
}

// ---------------------------------------------------------------------------
// Smoothness constants of the empirical risk

struct SmoothnessConstants {
  double c3 = 1.0;
  double c4 = 1.0;
  LogValue radius;    // c3 n^{c4}
  LogValue Ln;        // 45 L 3^L max{k0,L,d}^{3/2} k0^{2L} kn^{3/2} R^{4L+1}
  LogValue Lbar;      // 4 L 3^L k0^{2L-2} R^{4L}
  LogValue grad_sup;  // Ln * R
};

/// Same formulas with c3 n^{c4} replaced by an explicit norm radius R >= 1.
inline SmoothnessConstants smoothness_constants_for_radius(const Architecture& a, double radius) {
  if (!(radius >= 1.0)) throw std::invalid_argument(fmt::format("norm radius must be >= 1, got {}", radius));
  const double L = static_cast<double>(a.L);
  const double k0 = static_cast<double>(a.k0);
  const double logR = std::log(radius);
  const double widest = static_cast<double>(std::max({a.k0, a.L, a.d}));
  SmoothnessConstants s;
  s.radius.log = logR;
  s.Ln.log = std::log(45.0) + std::log(L) + L * std::log(3.0) + 1.5 * std::log(widest) + 2.0 * L * std::log(k0) +
             1.5 * std::log(static_cast<double>(a.kn)) + (4.0 * L + 1.0) * logR;
  s.Lbar.log = std::log(4.0) + std::log(L) + L * std::log(3.0) + (2.0 * L - 2.0) * std::log(k0) + 4.0 * L * logR;
  s.grad_sup.log = s.Ln.log + logR;
  s.c3 = radius;
  s.c4 = 0.0;
  return s;
}

inline SmoothnessConstants smoothness_constants(const Architecture& a, double n, double c3, double c4) {
  if (c3 < 1.0 || c4 < 1.0) throw std::invalid_argument("smoothness_constants needs c3 >= 1 and c4 >= 1");
  if (!(n >= 1.0)) throw std::invalid_argument("smoothness_constants needs n >= 1");
  auto s = smoothness_constants_for_radius(a, c3 * std::pow(n, c4));
  s.c3 = c3;
  s.c4 = c4;
  s.radius.log = std::log(c3) + c4 * std::log(n);
  return s;
}

/// Norm radius certifying the smoothness preconditions for weights, inputs and responses.
inline double precondition_radius(const WeightVector& w, const Dataset& data) {
  return std::max({w.max_abs(), data.max_abs_x(), data.max_abs_y(), 1.0});
}

// ---------------------------------------------------------------------------
// Indicator condition and gradient lower bound

struct IndicatorConditionReport {
  bool holds = true;
  double threshold = 0.0;          // 2/n^2
  double worst_on = 1.0;           // min_i f_{j_i}(X_i)
  double worst_off = 0.0;          // max over X_t != X_i of f_{j_i}(X_t)
  std::optional<std::size_t> first_failure;
};

/// f_{j_i}(X_i) >= 1 - 2/n^2 and f_{j_i}(X_t) <= 2/n^2 for all X_t != X_i.
inline IndicatorConditionReport check_indicator_condition(const WeightVector& w, const Dataset& data,
                                                          std::span<const std::size_t> assignment, double n) {
  if (assignment.size() != data.size()) throw std::invalid_argument("assignment must have one slot per sample");
  const Architecture& a = w.arch();
  IndicatorConditionReport rep;
  rep.threshold = 2.0 / (n * n);
  ActivationTrace tr(a);
  // top[k][t] = f_{k,k}^{(L)}(X_t), computed once per used slot
  std::vector<std::vector<double>> top(a.kn);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t k = assignment[i];
    if (k >= a.kn) throw std::out_of_range(fmt::format("assignment slot {} >= kn={}", k, a.kn));
    if (top[k].empty())
      for (std::size_t t = 0; t < data.size(); ++t) top[k].push_back(forward_subnet(w, data.x(t), k, tr));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& f = top[assignment[i]];
    bool ok = f[i] >= 1.0 - rep.threshold;
    rep.worst_on = std::min(rep.worst_on, f[i]);
    for (std::size_t t = 0; t < data.size(); ++t) {
      if (same_point(data.x(t), data.x(i))) continue;
      rep.worst_off = std::max(rep.worst_off, f[t]);
      if (f[t] > rep.threshold) ok = false;
    }
    if (!ok && !rep.first_failure) rep.first_failure = i;
  }
  rep.holds = !rep.first_failure.has_value();
  return rep;
}

/// Coefficient (2/n)(1 - 2/n^2)^2 - 16/n^3 from the gradient lower-bound chain; >= 1/n for n >= 5.
inline double gradient_bound_coefficient(double n) {
  return 2.0 / n - 8.0 / (n * n * n) + 8.0 / (n * n * n * n * n) - 16.0 / (n * n * n);
}

struct GradientBoundComparison {
  double grad_sq = 0.0;  // ||grad F_n||^2
  double rhs = 0.0;      // (1/n)(F_n - optimum)
  double margin = 0.0;
  bool holds = true;
};

inline GradientBoundComparison gradient_lower_bound_compare(std::span<const double> grad, double risk, double optimum, double n) {
  GradientBoundComparison c;
  for (double g : grad) c.grad_sq += g * g;
  c.rhs = (risk - optimum) / n;
  c.margin = c.grad_sq - c.rhs;
  c.holds = c.margin >= 0.0;
  return c;
}

/// ||grad F_n(w)||^2 >= (1/n)(F_n(w) - optimum), valid under the indicator condition for n >= 5.
inline GradientBoundComparison gradient_lower_bound_check(const WeightVector& w, const Dataset& data,
                                                 std::span<const std::size_t> assignment) {
  const double n = static_cast<double>(data.size());
  if (n < 5) throw std::domain_error("gradient lower bound needs n >= 5");
  const auto cond = check_indicator_condition(w, data, assignment, n);
  if (!cond.holds)
    throw std::domain_error(fmt::format("indicator condition fails at sample {}", *cond.first_failure));
  std::vector<double> grad(w.size());
  GradientWorkspace ws;
  const double risk = risk_and_gradient(w, data, grad, ws);
  return gradient_lower_bound_compare(grad, risk, interpolation_optimum(data), n);
}

// ---------------------------------------------------------------------------
// Geometric contraction

struct ContractionPrediction {
  double geometric = 0.0;    // (1 - 1/(2 n Ln))^t (F0 - optimum)
  double exponential = 0.0;  // exp(-t/(2 n Ln)) (F0 - optimum)
};

inline ContractionPrediction contraction_predict(double F0, double optimum, double n, double Ln, double t) {
  if (!(Ln > 0.0)) throw std::invalid_argument("Ln must be > 0");
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  const double gap = F0 - optimum;
  const double rate = 1.0 / (2.0 * n * Ln);
  ContractionPrediction p;
  p.geometric = t == 0.0 ? gap : std::exp(t * std::log1p(-rate)) * gap;
  p.exponential = std::exp(-t * rate) * gap;
  return p;
}

// ---------------------------------------------------------------------------
// Saturated-gradient bound

struct SaturationReport {
  double bound = 0.0;         // 2 sqrt(F_n) k0^L R^{L+1} e^{-n}
  double max_partial = 0.0;   // over inner weights of subnetwork k
  double saturation = 0.0;    // max_t f(1-f)
  bool holds = true;
};

inline SaturationReport saturated_gradient_bound(const WeightVector& w, const Dataset& data, std::size_t k, double n,
                                                double c3, double c4) {
  const Architecture& a = w.arch();
  if (k >= a.kn) throw std::out_of_range("subnetwork index out of range");
  const double R = c3 * std::pow(n, c4);
  if (w.max_abs() > R || data.max_abs_x() > R || data.max_abs_y() > R)
    throw std::domain_error(fmt::format("norm precondition fails: need ||c||, ||X||, |Y| <= {}", R));
  SaturationReport rep;
  ActivationTrace tr(a);
  for (std::size_t t = 0; t < data.size(); ++t) {
    const double f = forward_subnet(w, data.x(t), k, tr);
    rep.saturation = std::max(rep.saturation, f * (1.0 - f));
  }
  if (rep.saturation > std::exp(-n))
    throw std::domain_error(fmt::format("subnetwork {} is not saturated: max f(1-f) = {:.6g} > e^-n", k, rep.saturation));
  std::vector<double> grad(w.size());
  GradientWorkspace ws;
  const double risk = risk_and_gradient(w, data, grad, ws);
  const double L = static_cast<double>(a.L);
  rep.bound = 2.0 * std::sqrt(risk) * std::pow(static_cast<double>(a.k0), L) * std::pow(R, L + 1.0) * std::exp(-n);
  for (std::size_t idx : subnet_indices(a, k)) rep.max_partial = std::max(rep.max_partial, std::abs(grad[idx]));
  rep.holds = rep.max_partial <= rep.bound;
  return rep;
}

// ---------------------------------------------------------------------------
// Lipschitz composition rules for products and sums

/// sum_l L_l prod_{k != l} ||g_k||  for the product of s functions.
inline double product_lipschitz(std::span<const double> lips, std::span<const double> sups) {
  double total = 0.0;
  for (std::size_t l = 0; l < lips.size(); ++l) {
    double term = lips[l];
    for (std::size_t k = 0; k < sups.size(); ++k)
      if (k != l) term *= sups[k];
    total += term;
  }
  return total;
}

/// Relaxed form s * max_l L_l * (max_k ||g_k||)^{s-1}.
inline double product_lipschitz_relaxed(std::span<const double> lips, std::span<const double> sups) {
  const double s = static_cast<double>(lips.size());
  const double lmax = *std::max_element(lips.begin(), lips.end());
  const double gmax = *std::max_element(sups.begin(), sups.end());
  return s * lmax * std::pow(gmax, s - 1.0);
}

inline double sum_lipschitz(std::span<const double> lips) {
  double total = 0.0;
  for (double l : lips) total += l;
  return total;
}

// ---------------------------------------------------------------------------
// Randomized sweeps

struct CheckRow {
  std::size_t trial = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool violated = false;
  double margin() const noexcept { return rhs - lhs; }
};

inline void write_check_csv(std::ostream& os, std::span<const CheckRow> rows) {
  os << "trial,lhs,rhs,margin,violated\n";
  for (const auto& r : rows)
    os << fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", r.trial, r.lhs, r.rhs, r.margin(), r.violated ? 1 : 0);
}

inline std::size_t count_violations(std::span<const CheckRow> rows) {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const CheckRow& r) { return r.violated; }));
}

inline Architecture random_small_arch(Rng& rng, bool need_half_cover) {
  Architecture a;
  a.d = 1 + rng.index(3);
  const std::size_t k0_min = need_half_cover ? (a.d + 1) / 2 : 1;  // 2 k0 >= d
  a.k0 = k0_min + rng.index(4 - k0_min + 1);
  a.L = 2 + rng.index(3);
  a.kn = 1 + rng.index(4);
  return a;
}

inline WeightVector random_weights(const Architecture& a, Rng& rng, double bound) {
  WeightVector w(a);
  for (auto& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

inline Dataset random_dataset(std::size_t n, std::size_t d, Rng& rng, double x_bound, double y_bound) {
  std::vector<double> xs(n * d), ys(n);
  for (auto& v : xs) v = rng.uniform(-x_bound, x_bound);
  for (auto& v : ys) v = rng.uniform(-y_bound, y_bound);
  return Dataset(d, std::move(xs), std::move(ys));
}

/// |f_w(x) - f_wbar(x)| against the weight-Lipschitz bound on random triples.
inline std::vector<CheckRow> weight_lipschitz_sweep(std::size_t trials, std::uint64_t seed) {
  std::vector<CheckRow> rows;
  rows.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, StreamKey::trial, t);
    const Architecture a = random_small_arch(rng, true);
    const double scale = rng.uniform(0.5, 3.0);
    const WeightVector w = random_weights(a, rng, scale);
    WeightVector wbar = w;
    // alternate between local perturbations and independent draws
    const double eps = (t % 2 == 0) ? std::pow(10.0, -rng.uniform(1.0, 6.0)) : scale;
    for (auto& v : wbar.values()) v += rng.uniform(-eps, eps);
    std::vector<double> x(a.d);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const double lhs = std::abs(evaluate(w, x) - evaluate(wbar, x));
    const double rhs = weight_lipschitz_bound(w, wbar, x);
    rows.push_back({t, lhs, rhs, !(lhs <= rhs)});
  }
  return rows;
}

struct SmoothnessTrial {
  Architecture arch;
  Dataset data;
  double n = 1.0;
  double c3 = 1.0;
  double c4 = 1.0;
  SmoothnessConstants constants;
};

inline SmoothnessTrial random_smoothness_trial(Rng& rng) {
  SmoothnessTrial tr;
  tr.arch = random_small_arch(rng, true);
  const std::size_t n = 2 + rng.index(5);
  tr.n = static_cast<double>(n);
  tr.c3 = rng.uniform(1.0, 2.0);
  tr.c4 = 1.0;
  const double R = tr.c3 * std::pow(tr.n, tr.c4);
  tr.data = random_dataset(n, tr.arch.d, rng, R, R);
  tr.constants = smoothness_constants(tr.arch, tr.n, tr.c3, tr.c4);
  return tr;
}

/// ||grad F_n(c)||_inf <= Ln * c3 n^{c4} for ||c||_inf <= c3 n^{c4}.
inline std::vector<CheckRow> gradient_sup_sweep(std::size_t trials, std::uint64_t seed) {
  std::vector<CheckRow> rows;
  rows.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, StreamKey::trial, t);
    const auto tr = random_smoothness_trial(rng);
    const double R = std::exp(tr.constants.radius.log);
    const WeightVector w = random_weights(tr.arch, rng, R);
    const double lhs = sup_norm(analytic_gradient(w, tr.data));
    const double rhs = tr.constants.grad_sup.linear().value_or(std::numeric_limits<double>::infinity());
    rows.push_back({t, lhs, rhs, !(lhs <= rhs)});
  }
  return rows;
}

/// ||grad F_n(c1) - grad F_n(c2)|| <= Ln ||c1 - c2|| for c1, c2 in the norm ball.
inline std::vector<CheckRow> gradient_lipschitz_sweep(std::size_t pairs, std::uint64_t seed) {
  std::vector<CheckRow> rows;
  rows.reserve(pairs);
  for (std::size_t t = 0; t < pairs; ++t) {
    Rng rng = make_rng(seed ^ 0x5eedULL, StreamKey::trial, t);
    const auto tr = random_smoothness_trial(rng);
    const double R = std::exp(tr.constants.radius.log);
    const WeightVector w1 = random_weights(tr.arch, rng, R);
    WeightVector w2 = w1;
    if (t % 2 == 0) {
      const double eps = std::pow(10.0, -rng.uniform(1.0, 6.0));
      for (auto& v : w2.values()) v = std::clamp(v + rng.uniform(-eps, eps), -R, R);
    } else {
      w2 = random_weights(tr.arch, rng, R);
    }
    const auto g1 = analytic_gradient(w1, tr.data);
    const auto g2 = analytic_gradient(w2, tr.data);
    std::vector<double> dg(g1.size()), dw(g1.size());
    for (std::size_t q = 0; q < g1.size(); ++q) {
      dg[q] = g1[q] - g2[q];
      dw[q] = w1[q] - w2[q];
    }
    const double lhs = l2_norm(dg);
    const double Ln = tr.constants.Ln.linear().value_or(std::numeric_limits<double>::infinity());
    const double rhs = Ln * l2_norm(dw);
    rows.push_back({t, lhs, rhs, !(lhs <= rhs)});
  }
  return rows;
}

}  // namespace overparam
