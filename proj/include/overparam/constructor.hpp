#pragma once

// Indicator subnetworks for a hyperrectangle [a, b] with margin delta:
//
//   f(x) >= 1 - e^{-n}   on  [a + delta, b - delta]
//   f(x) <= e^{-n}       off [a - delta, b + delta]
//
// for x in [-1,1]^d. Neurons 1..d of the first layer switch off once
// x_l >= a_l, neurons d+1..2d once x_l <= b_l; middle layers pass these gates
// through; the top neuron fires only when every gate is off.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "overparam/core_net.hpp"

namespace overparam {

struct RectangleSpec {
  std::vector<double> a;
  std::vector<double> b;
  double delta = 0.0;
  double n = 1.0;       // sharpness: bounds are e^{-n}
  bool robust = false;  // doubled magnitudes and halved tolerances

  void validate(std::size_t d) const {
    if (a.size() != d || b.size() != d)
      throw std::invalid_argument(fmt::format("rectangle corners must have dimension {}", d));
    if (!(delta > 0.0)) throw std::invalid_argument("rectangle margin delta must be > 0");
    if (!(n >= 0.0)) throw std::invalid_argument("saturation parameter n must be >= 0");
    for (std::size_t l = 0; l < d; ++l)
      if (!(b[l] - a[l] >= 2.0 * delta))
        throw std::invalid_argument(
            fmt::format("degenerate rectangle: b[{0}] - a[{0}] = {1} < 2*delta = {2}", l, b[l] - a[l], 2.0 * delta));
  }
};

/// Rectangle used to isolate one sample point whose neighbours are at sup-distance >= separation.
inline RectangleSpec isolating_rectangle(std::span<const double> point, double separation, double n) {
  RectangleSpec r;
  for (double v : point) {
    r.a.push_back(v - separation / 2.0);
    r.b.push_back(v + separation / 2.0);
  }
  r.delta = separation / 4.0;
  r.n = n;
  r.robust = true;
  return r;
}

inline double log_8d_minus_1(std::size_t d) { return std::log(8.0 * static_cast<double>(d) - 1.0); }

inline void require_indicator_arch(const Architecture& a) {
  a.validate();
  if (a.k0 < 2 * a.d)
    throw std::invalid_argument(fmt::format("indicator construction needs k0 >= 2d (k0={}, d={})", a.k0, a.d));
}

/// A single-subnetwork (kn = 1) weight vector with output weights (0, 1), so
/// that evaluate() returns f_{1,1}^{(L)} directly.
struct IndicatorWeights {
  WeightVector weights;
  RectangleSpec spec;
};

/// Canonical assignment: bias conditions at the centres of their intervals,
/// cross weights zero, gate magnitudes exactly at their bounds.
inline IndicatorWeights build_indicator(const Architecture& arch, const RectangleSpec& spec) {
  Architecture a = arch;
  a.kn = 1;
  require_indicator_arch(a);
  spec.validate(a.d);

  const double g = log_8d_minus_1(a.d);
  const double m = spec.robust ? 2.0 : 1.0;
  WeightVector w(a);

  for (std::size_t k = 0; k < a.d; ++k) {
    const double lo = -m * (2.0 / spec.delta) * g;
    w.inner(0, 0, k, k + 1) = lo;
    w.inner(0, 0, k, 0) = -spec.a[k] * lo;
    const double hi = m * (2.0 / spec.delta) * g;
    w.inner(0, 0, a.d + k, k + 1) = hi;
    w.inner(0, 0, a.d + k, 0) = -spec.b[k] * hi;
  }
  for (std::size_t s = 1; s + 1 < a.L; ++s) {
    for (std::size_t k = 0; k < 2 * a.d; ++k) {
      const double pass = m * 8.0 * g;
      w.inner(s, 0, k, k + 1) = pass;
      w.inner(s, 0, k, 0) = -pass / 2.0;
    }
  }
  const double top = -m * 4.0 * (spec.n + 1.0);
  for (std::size_t j = 0; j < 2 * a.d; ++j) w.inner(a.L - 1, 0, 0, j + 1) = top;
  w.inner(a.L - 1, 0, 0, 0) = -top / 2.0;

  w.output(1) = 1.0;
  return {std::move(w), spec};
}

/// Upper bound on the magnitude of any constructed weight.
inline double indicator_weight_bound(const RectangleSpec& spec, std::size_t d) {
  double corner = 0.0;
  for (std::size_t l = 0; l < spec.a.size(); ++l) corner = std::max({corner, std::abs(spec.a[l]), std::abs(spec.b[l])});
  const double g = log_8d_minus_1(d);
  return std::max({8.0 * (spec.n + 1.0), (4.0 / spec.delta) * g * (1.0 + corner), 16.0 * g});
}

struct HypothesisViolation {
  std::string condition;
  std::size_t level;
  std::size_t neuron;
  std::size_t source;
  double value;
  double limit;
};

/// Checks the indicator hypothesis inequalities on subnetwork `slot` of w.
/// tightened = true checks the doubled/halved list that survives two
/// perturbations below perturbation_radius().
inline std::vector<HypothesisViolation> indicator_hypotheses(const WeightVector& w, std::size_t slot,
                                                             const RectangleSpec& spec, bool tightened) {
  const Architecture& a = w.arch();
  require_indicator_arch(a);
  spec.validate(a.d);
  const double g = log_8d_minus_1(a.d);
  const double m = tightened ? 2.0 : 1.0;
  const double k0 = static_cast<double>(a.k0);
  const double d = static_cast<double>(a.d);
  std::vector<HypothesisViolation> out;
  auto at_most = [&](const char* name, std::size_t s, std::size_t i, std::size_t j, double v, double lim) {
    if (!(v <= lim)) out.push_back({name, s, i, j, v, lim});
  };
  auto at_least = [&](const char* name, std::size_t s, std::size_t i, std::size_t j, double v, double lim) {
    if (!(v >= lim)) out.push_back({name, s, i, j, v, lim});
  };

  // top neuron, level L-1
  const std::size_t top = a.L - 1;
  const double c11 = w.inner(top, slot, 0, 1);
  at_most("top_gate_gain", top, 0, 1, c11, -m * 4.0 * (spec.n + 1.0));
  for (std::size_t j = 2; j <= 2 * a.d; ++j)
    at_most("top_gate_spread", top, 0, j, std::abs(w.inner(top, slot, 0, j) - c11), 1.0 / (2.0 * k0 * m));
  for (std::size_t j = 2 * a.d + 1; j <= a.k0; ++j)
    at_most("top_unused_inputs", top, 0, j, std::abs(w.inner(top, slot, 0, j)), 1.0 / (2.0 * k0 * m));
  at_most("top_bias", top, 0, 0, std::abs(w.inner(top, slot, 0, 0) + 0.5 * c11), 0.5 / m);

  // pass-through levels 1..L-2
  for (std::size_t s = 1; s + 1 < a.L; ++s) {
    for (std::size_t k = 0; k < 2 * a.d; ++k) {
      const double ckk = w.inner(s, slot, k, k + 1);
      at_least("pass_gain", s, k, k + 1, ckk, m * 8.0 * g);
      at_most("pass_bias", s, k, 0, std::abs(w.inner(s, slot, k, 0) + 0.5 * ckk), g / (k0 * m));
      for (std::size_t j = 1; j <= a.k0; ++j)
        if (j != k + 1) at_most("pass_cross", s, k, j, std::abs(w.inner(s, slot, k, j)), g / (k0 * m));
    }
  }

  // first level
  for (std::size_t k = 0; k < a.d; ++k) {
    const double lo = w.inner(0, slot, k, k + 1);
    at_most("lower_gate_gain", 0, k, k + 1, lo, -m * (2.0 / spec.delta) * g);
    at_most("lower_gate_bias", 0, k, 0, std::abs(w.inner(0, slot, k, 0) + spec.a[k] * lo), g / (d * m));
    const double hi = w.inner(0, slot, a.d + k, k + 1);
    at_least("upper_gate_gain", 0, a.d + k, k + 1, hi, m * (2.0 / spec.delta) * g);
    at_most("upper_gate_bias", 0, a.d + k, 0, std::abs(w.inner(0, slot, a.d + k, 0) + spec.b[k] * hi), g / (d * m));
    for (std::size_t j = 1; j <= a.d; ++j) {
      if (j == k + 1) continue;
      at_most("lower_gate_cross", 0, k, j, std::abs(w.inner(0, slot, k, j)), g / (d * m));
      at_most("upper_gate_cross", 0, a.d + k, j, std::abs(w.inner(0, slot, a.d + k, j)), g / (d * m));
    }
  }
  return out;
}

inline std::vector<HypothesisViolation> indicator_hypotheses(const IndicatorWeights& iw, bool tightened) {
  return indicator_hypotheses(iw.weights, 0, iw.spec, tightened);
}

enum class ProbeZone { inside, outside, margin };

inline ProbeZone classify_probe(const RectangleSpec& spec, std::span<const double> x) {
  bool inside = true;
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (x[l] < spec.a[l] - spec.delta || x[l] > spec.b[l] + spec.delta) return ProbeZone::outside;
    if (x[l] < spec.a[l] + spec.delta || x[l] > spec.b[l] - spec.delta) inside = false;
  }
  return inside ? ProbeZone::inside : ProbeZone::margin;
}

struct ProbeViolation {
  std::size_t probe;
  ProbeZone zone;
  double value;
  double bound;
};

struct IndicatorReport {
  std::size_t inside = 0;
  std::size_t outside = 0;
  std::size_t margin = 0;
  double worst_inside = 1.0;   // min f over inside probes
  double worst_outside = 0.0;  // max f over outside probes
  std::vector<ProbeViolation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// Evaluates subnetwork `slot` at each probe and checks the bound for its zone.
/// probes is row-major with d coordinates per probe.
inline IndicatorReport verify_indicator(const WeightVector& w, std::size_t slot, const RectangleSpec& spec,
                                        std::span<const double> probes) {
  const Architecture& a = w.arch();
  spec.validate(a.d);
  if (probes.size() % a.d != 0) throw std::invalid_argument("probe buffer is not a multiple of d");
  const double hi_bound = 1.0 - std::exp(-spec.n);
  const double lo_bound = std::exp(-spec.n);
  IndicatorReport rep;
  ActivationTrace tr(a);
  const std::size_t count = probes.size() / a.d;
  for (std::size_t p = 0; p < count; ++p) {
    const auto x = probes.subspan(p * a.d, a.d);
    for (double v : x)
      if (!(v >= -1.0 && v <= 1.0))
        throw std::invalid_argument(fmt::format("probe {} lies outside [-1,1]^d", p));
    const ProbeZone zone = classify_probe(spec, x);
    if (zone == ProbeZone::margin) {
      ++rep.margin;
      continue;
    }
    const double f = forward_subnet(w, x, slot, tr);
    if (zone == ProbeZone::inside) {
      ++rep.inside;
      rep.worst_inside = std::min(rep.worst_inside, f);
      if (!(f >= hi_bound)) rep.violations.push_back({p, zone, f, hi_bound});
    } else {
      ++rep.outside;
      rep.worst_outside = std::max(rep.worst_outside, f);
      if (!(f <= lo_bound)) rep.violations.push_back({p, zone, f, lo_bound});
    }
  }
  return rep;
}

inline IndicatorReport verify_indicator(const IndicatorWeights& iw, std::span<const double> probes) {
  return verify_indicator(iw.weights, 0, iw.spec, probes);
}

/// min{2(n+1), 1/(16 k0), 1/16, log(8d-1)/(24 k0)}; the first term never binds for n >= 0.
inline double perturbation_radius(std::size_t d, std::size_t k0, double n = 0.0) {
  if (d < 1 || k0 < 2 * d) throw std::invalid_argument("perturbation_radius needs d >= 1 and k0 >= 2d");
  const double kk = static_cast<double>(k0);
  return std::min({2.0 * (n + 1.0), 1.0 / (16.0 * kk), 1.0 / 16.0, log_8d_minus_1(d) / (24.0 * kk)});
}

/// Copies the inner weights of a kn = 1 indicator into subnetwork `slot` of target.
inline void embed_indicator(WeightVector& target, std::size_t slot, const IndicatorWeights& iw) {
  const Architecture& ta = target.arch();
  const Architecture& sa = iw.weights.arch();
  if (ta.d != sa.d || ta.k0 != sa.k0 || ta.L != sa.L)
    throw std::invalid_argument("indicator architecture does not match target (d, k0, L)");
  if (slot >= ta.kn) throw std::out_of_range(fmt::format("subnetwork slot {} >= kn={}", slot, ta.kn));
  const auto src = subnet_indices(sa, 0);
  const auto dst = subnet_indices(ta, slot);
  for (std::size_t t = 0; t < src.size(); ++t) target[dst[t]] = iw.weights[src[t]];
}

}  // namespace overparam
