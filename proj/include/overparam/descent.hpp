#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "overparam/constructor.hpp"
#include "overparam/core_net.hpp"
#include "overparam/risk_grad.hpp"
#include "overparam/rng.hpp"

namespace overparam {

// ---------------------------------------------------------------------------
// Event conditions on the training data

struct EventReport {
  double min_separation = std::numeric_limits<double>::infinity();  // over distinct pairs
  double separation_floor = 0.0;
  double max_abs_x = 0.0;
  double max_abs_y = 0.0;
  double response_ceiling = 0.0;
  bool separation_ok = true;
  bool domain_ok = true;
  bool response_ok = true;

  bool ok() const noexcept { return separation_ok && domain_ok && response_ok; }
};

/// Smallest sup-norm distance between two distinct sample points (infinity if < 2 distinct).
inline double min_distinct_separation(const Dataset& data) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = i + 1; j < data.size(); ++j) {
      if (same_point(data.x(i), data.x(j))) continue;
      double dist = 0.0;
      for (std::size_t l = 0; l < data.dim(); ++l) dist = std::max(dist, std::abs(data.x(i)[l] - data.x(j)[l]));
      best = std::min(best, dist);
    }
  return best;
}

inline double default_separation(double n) { return 1.0 / ((n + 1.0) * (n + 1.0) * (n + 1.0)); }

/// separation >= 1/(n+1)^3, max ||X_i||_inf <= 1, max |Y_i| <= n^2.
inline EventReport validate_event(const Dataset& data, double n) {
  EventReport r;
  r.min_separation = min_distinct_separation(data);
  r.separation_floor = default_separation(n);
  r.max_abs_x = data.max_abs_x();
  r.max_abs_y = data.max_abs_y();
  r.response_ceiling = n * n;
  r.separation_ok = r.min_separation >= r.separation_floor;
  r.domain_ok = r.max_abs_x <= 1.0;
  r.response_ok = r.max_abs_y <= r.response_ceiling;
  return r;
}

// ---------------------------------------------------------------------------
// Initialization

enum class InitMode { random, planted };

struct InitSpec {
  double bound = 1.0;  // weights below the output layer ~ U[-bound, bound]
  std::uint64_t seed = 0;
  InitMode mode = InitMode::random;
  // Planted mode only: isolation width around each point; defaults to 1/(n+1)^3.
  std::optional<double> separation;
};

/// Subnetwork slot carrying the planted indicator of each sample (points sorted
/// lexicographically, slot l for the l-th distinct point).
inline std::vector<std::size_t> planted_assignment(const Dataset& data) {
  const auto pts = distinct_points(data);
  std::vector<std::size_t> slot(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> p(data.x(i).begin(), data.x(i).end());
    auto it = std::lower_bound(pts.begin(), pts.end(), p, PointLess{});
    slot[i] = static_cast<std::size_t>(it - pts.begin());
  }
  return slot;
}

inline WeightVector initialize(const Architecture& arch, const InitSpec& init, const Dataset& data) {
  arch.validate();
  if (!(init.bound > 0.0) || !std::isfinite(init.bound))
    throw std::invalid_argument(fmt::format("init bound must be positive and finite, got {}", init.bound));
  WeightVector w(arch);
  for (std::size_t k = 0; k < arch.kn; ++k) {
    Rng rng = make_rng(init.seed, StreamKey::init, k);
    for (std::size_t idx : subnet_indices(arch, k)) w[idx] = rng.uniform(-init.bound, init.bound);
  }
  if (init.mode == InitMode::random) return w;

  require_nonempty(data);
  require_indicator_arch(arch);
  const double n = static_cast<double>(data.size());
  const double sep = init.separation.value_or(default_separation(n));
  if (!(sep > 0.0)) throw std::invalid_argument("planted separation must be > 0");
  const auto pts = distinct_points(data);
  if (pts.size() > arch.kn)
    throw std::invalid_argument(
        fmt::format("planted init: {} distinct points but only kn={} subnetworks", pts.size(), arch.kn));
  const double attained = min_distinct_separation(data);
  if (attained < sep)
    throw std::invalid_argument(
        fmt::format("planted init: distinct points are {} apart, need separation >= {}", attained, sep));
  if (data.max_abs_x() > 1.0) throw std::invalid_argument("planted init: sample points must lie in [-1,1]^d");
  for (std::size_t l = 0; l < pts.size(); ++l)
    embed_indicator(w, l, build_indicator(arch, isolating_rectangle(pts[l], sep, n)));
  return w;
}

// ---------------------------------------------------------------------------
// Gradient descent

struct TrainOptions {
  double lambda = 1e-3;
  std::size_t steps = 0;
  bool monitors = true;
  std::optional<double> iterate_bound;  // e.g. 2 c3 n^{c4}
  // Called at every t = 0..steps with c^{(t)}, F_n(c^{(t)}) and its gradient.
  std::function<void(std::size_t, const WeightVector&, double, std::span<const double>)> observer;
};

struct TrainRun {
  std::vector<double> risk;       // F_n(c^{(t)}), t = 0..steps
  std::vector<double> grad_norm;  // ||grad F_n(c^{(t)})||_2
  std::vector<double> max_abs;    // ||c^{(t)}||_inf
  std::vector<std::pair<std::size_t, WeightVector>> checkpoints;
  WeightVector final_weights;
  std::vector<std::size_t> monotonicity_violations;  // t with F(t+1) > F(t)
  std::vector<std::size_t> iterate_violations;       // t with ||c^{(t)}||_inf > bound
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t step, const std::string& what)
      : std::runtime_error(fmt::format("step {}: {}", step, what)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

inline std::size_t checkpoint_stride(std::size_t steps) { return std::max<std::size_t>(1, steps / 100); }

/// Full-batch descent c^{(t+1)} = c^{(t)} - lambda * grad F_n(c^{(t)}).
inline TrainRun train(const WeightVector& w0, const Dataset& data, const TrainOptions& opt) {
  if (!(opt.lambda > 0.0) || !std::isfinite(opt.lambda))
    throw std::invalid_argument(fmt::format("step size must be > 0, got {}", opt.lambda));
  require_nonempty(data);
  TrainRun run;
  run.risk.reserve(opt.steps + 1);
  run.grad_norm.reserve(opt.steps + 1);
  run.max_abs.reserve(opt.steps + 1);

  WeightVector w = w0;
  std::vector<double> grad(w.size());
  GradientWorkspace ws;
  const std::size_t stride = checkpoint_stride(opt.steps);

  for (std::size_t t = 0;; ++t) {
    const double risk = risk_and_gradient(w, data, grad, ws);
    if (!std::isfinite(risk)) throw TrainingError(t, "empirical risk is not finite");
    for (double g : grad)
      if (!std::isfinite(g)) throw TrainingError(t, "gradient has a non-finite entry");
    const double wmax = w.max_abs();
    run.risk.push_back(risk);
    run.grad_norm.push_back(l2_norm(grad));
    run.max_abs.push_back(wmax);
    if (opt.monitors) {
      if (t > 0 && risk > run.risk[t - 1]) run.monotonicity_violations.push_back(t - 1);
      if (opt.iterate_bound && wmax > *opt.iterate_bound) run.iterate_violations.push_back(t);
    }
    if (t % stride == 0 || t == opt.steps) run.checkpoints.emplace_back(t, w);
    if (opt.observer) opt.observer(t, w, risk, grad);
    if (t == opt.steps) break;
    auto vals = w.values();
    for (std::size_t q = 0; q < vals.size(); ++q) vals[q] -= opt.lambda * grad[q];
  }
  run.final_weights = std::move(w);
  return run;
}

inline void write_risk_trace_csv(std::ostream& os, const TrainRun& run) {
  os << "step,F_n,grad_norm,maxabs_weight\n";
  for (std::size_t t = 0; t < run.risk.size(); ++t)
    os << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", t, run.risk[t], run.grad_norm[t], run.max_abs[t]);
}

// ---------------------------------------------------------------------------
// Theoretical schedule (exponents of n; log-domain values)

struct TheoreticalSchedule {
  long long kn_exponent = 0;
  long long lambda_exponent = 0;  // lambda_n = n^{lambda_exponent}
  long long tn_exponent = 0;      // t_n = tn_coefficient * n^{tn_exponent}
  double tn_coefficient = 2.0;
  long long Ln_exponent = 0;
  double c3 = 1.0;
  double c4 = 4.0;

  double log_n = 0.0;
  double log_kn() const noexcept { return static_cast<double>(kn_exponent) * log_n; }
  double log_lambda() const noexcept { return static_cast<double>(lambda_exponent) * log_n; }
  double log_tn() const noexcept { return std::log(tn_coefficient) + static_cast<double>(tn_exponent) * log_n; }
  double log_Ln() const noexcept { return static_cast<double>(Ln_exponent) * log_n; }

  // t_n * lambda_n = 2 n^{tn_lambda_exponent}
  long long tn_lambda_exponent() const noexcept { return tn_exponent + lambda_exponent; }
  // t_n / (2 n L_n) = n^{contraction_exponent}
  long long contraction_exponent() const noexcept { return tn_exponent - 1 - Ln_exponent; }
};

inline TheoreticalSchedule theoretical_schedule(const Architecture& arch, double n) {
  if (arch.L < 2) throw std::invalid_argument("schedule needs L >= 2");
  if (arch.d < 1 || arch.k0 < 2 * arch.d)
    throw std::invalid_argument(fmt::format("schedule needs k0 >= 2d (k0={}, d={})", arch.k0, arch.d));
  if (!(n >= 1.0)) throw std::invalid_argument("schedule needs n >= 1");
  const long long d = static_cast<long long>(arch.d);
  const long long k0 = static_cast<long long>(arch.k0);
  const long long L = static_cast<long long>(arch.L);
  const long long width = (L - 2) * (k0 * k0 + k0);
  TheoreticalSchedule s;
  s.kn_exponent = 5 * width + 5 * k0 * (d + 2) + 7;
  s.Ln_exponent = 8 * width + 8 * k0 * (d + 2) + 16 * L + 15;
  s.lambda_exponent = -s.Ln_exponent;
  s.tn_exponent = 8 * width + 8 * k0 * (d + 2) + 16 * L + 17;
  s.log_n = std::log(n);
  return s;
}

}  // namespace overparam
