#pragma once

// Adversarial design for the generalization lower bound: X uniform on the n
// grid points x_k = (k/n, 0, ..., 0), Y = +-1 with equal probability, true
// regression function m = 0. Any estimator that nearly interpolates the
// sample inherits the noise at every observed point.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "overparam/risk_grad.hpp"
#include "overparam/rng.hpp"

namespace overparam {

struct AdversarialDistribution {
  std::size_t n = 10;  // support size (and sample size)
  std::size_t d = 1;

  std::vector<double> support_point(std::size_t k) const {  // k = 1..n
    std::vector<double> x(d, 0.0);
    x[0] = static_cast<double>(k) / static_cast<double>(n);
    return x;
  }
  double probability(std::size_t) const { return 1.0 / static_cast<double>(n); }

  void validate() const {
    if (n < 1 || d < 1) throw std::invalid_argument("adversarial distribution needs n >= 1 and d >= 1");
  }
};

/// n i.i.d. draws from the adversarial distribution.
inline Dataset sample(const AdversarialDistribution& dist, std::uint64_t seed) {
  dist.validate();
  Rng rng = make_rng(seed, StreamKey::data);
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(dist.n * dist.d);
  ys.reserve(dist.n);
  for (std::size_t i = 0; i < dist.n; ++i) {
    const auto x = dist.support_point(1 + rng.index(dist.n));
    xs.insert(xs.end(), x.begin(), x.end());
    ys.push_back(rng.sign());
  }
  return Dataset(dist.d, std::move(xs), std::move(ys));
}

using RegressionFunction = std::function<double(std::span<const double>)>;

/// integral |m_hat - m|^2 dP_X = (1/n) sum_k m_hat(x_k)^2 since m = 0.
inline double exact_risk(const AdversarialDistribution& dist, const RegressionFunction& m_hat) {
  dist.validate();
  double s = 0.0;
  for (std::size_t k = 1; k <= dist.n; ++k) {
    const double v = m_hat(dist.support_point(k));
    if (!std::isfinite(v)) throw std::domain_error(fmt::format("estimate is not finite at support point {}", k));
    s += v * v * dist.probability(k);
  }
  return s;
}

/// Fitted estimate; `success` marks the good-randomization event.
struct Fit {
  RegressionFunction predict;
  bool success = true;
};

/// Deterministic given (sample, seed).
using Estimator = std::function<Fit(const Dataset&, std::uint64_t)>;

/// Conditional-mean interpolator: m_bar on the sample, 0 elsewhere.
inline Estimator conditional_mean_estimator() {
  return [](const Dataset& data, std::uint64_t) {
    auto m = std::make_shared<ConditionalMean>(data);
    return Fit{[m](std::span<const double> x) { return (*m)(x); }, true};
  };
}

inline Estimator zero_estimator() {
  return [](const Dataset&, std::uint64_t) { return Fit{[](std::span<const double>) { return 0.0; }, true}; };
}

struct ReplicationRow {
  std::size_t replication = 0;
  double risk = 0.0;
  double kappa = 0.0;  // training risk minus interpolation optimum
  bool success = true;
};

struct BinomialIdentity {
  double exact = 0.0;         // E[1/Bin(n,1/n) ; Bin > 0]
  double intermediate = 0.0;  // (n/(n+1)) (1 - ((2n+1)/n)(1-1/n)^n)
  double final_bound = 0.0;   // (10/11)(1 - 21/(10 e))
  bool chain_ordered = false;
};

/// Exact sum over i = 1..n of (1/i) C(n,i) p^i (1-p)^{n-i} with p = 1/n,
/// evaluated with log-gamma binomials and long double accumulation.
inline BinomialIdentity binomial_identity(std::size_t n_count) {
  if (n_count < 1) throw std::invalid_argument("binomial identity needs n >= 1");
  const long double n = static_cast<long double>(n_count);
  const long double logp = -std::log(n);
  const long double logq = n_count == 1 ? 0.0L : std::log1p(-1.0L / n);
  long double sum = 0.0L;
  for (std::size_t i = 1; i <= n_count; ++i) {
    const long double li = static_cast<long double>(i);
    const long double logc = std::lgamma(n + 1.0L) - std::lgamma(li + 1.0L) - std::lgamma(n - li + 1.0L);
    const long double tail = n_count == i ? 0.0L : (n - li) * logq;
    sum += std::exp(logc + li * logp + tail) / li;
  }
  BinomialIdentity b;
  b.exact = static_cast<double>(sum);
  const double nd = static_cast<double>(n_count);
  b.intermediate = (nd / (nd + 1.0)) * (1.0 - ((2.0 * nd + 1.0) / nd) * std::pow(1.0 - 1.0 / nd, nd));
  b.final_bound = (10.0 / 11.0) * (1.0 - 21.0 / (10.0 * std::exp(1.0)));
  b.chain_ordered = b.exact >= b.intermediate && b.intermediate >= b.final_bound;
  return b;
}

struct RiskReport {
  std::vector<ReplicationRow> rows;
  double mean_risk = 0.0;
  std::optional<double> std_error;  // absent for a single replication
  double failure_rate = 0.0;
  double kappa_hat = 0.0;  // worst kappa over successful replications
  double composed_bound = 0.0;  // 1/5 - n kappa_hat - failure_rate / 2
  double exact_reference = 0.0;
};

inline RiskReport mc_lower_bound_experiment(const AdversarialDistribution& dist, const Estimator& estimator,
                                            std::size_t replications, std::uint64_t seed) {
  if (replications < 1) throw std::invalid_argument("need at least one replication");
  dist.validate();
  RiskReport rep;
  rep.rows.reserve(replications);
  std::size_t failures = 0;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t r = 0; r < replications; ++r) {
    const std::uint64_t rep_seed = derive_seed(seed, {static_cast<std::uint64_t>(StreamKey::replication), r});
    const Dataset data = sample(dist, rep_seed);
    const Fit fit = estimator(data, derive_seed(rep_seed, {static_cast<std::uint64_t>(StreamKey::estimator)}));
    ReplicationRow row;
    row.replication = r;
    row.success = fit.success;
    row.risk = exact_risk(dist, fit.predict);
    row.kappa = empirical_risk_of(fit.predict, data) - interpolation_optimum(data);
    if (!row.success) ++failures;
    else rep.kappa_hat = std::max(rep.kappa_hat, row.kappa);
    sum += row.risk;
    sum_sq += row.risk * row.risk;
    rep.rows.push_back(row);
  }
  if (failures == replications) throw std::runtime_error("estimator failed on every replication");
  const double m = static_cast<double>(replications);
  rep.mean_risk = sum / m;
  if (replications > 1) {
    const double var = std::max(0.0, (sum_sq - m * rep.mean_risk * rep.mean_risk) / (m - 1.0));
    rep.std_error = std::sqrt(var / m);
  }
  rep.failure_rate = static_cast<double>(failures) / m;
  rep.composed_bound = 0.2 - static_cast<double>(dist.n) * rep.kappa_hat - 0.5 * rep.failure_rate;
  rep.exact_reference = binomial_identity(dist.n).exact;
  return rep;
}

inline void write_replications_csv(std::ostream& os, const RiskReport& rep) {
  os << "replication,risk,kappa_attained,success_flag\n";
  for (const auto& r : rep.rows)
    os << fmt::format("{},{:.17g},{:.17g},{}\n", r.replication, r.risk, r.kappa, r.success ? 1 : 0);
}

inline void write_risk_summary(std::ostream& os, const RiskReport& rep) {
  os << fmt::format("mean_risk = {:.17g}\n", rep.mean_risk);
  os << "stderr = " << (rep.std_error ? fmt::format("{:.17g}", *rep.std_error) : std::string("n/a")) << '\n';
  os << fmt::format("failure_rate = {:.17g}\n", rep.failure_rate);
  os << fmt::format("kappa_hat = {:.17g}\n", rep.kappa_hat);
  os << fmt::format("composed_bound = {:.17g}\n", rep.composed_bound);
  os << fmt::format("exact_reference = {:.17g}\n", rep.exact_reference);
}

struct DeviationPoint {
  std::size_t index = 0;
  double deviation = 0.0;  // |f(X_i) - m_bar(X_i)|
};

struct NearInterpolatorReport {
  double kappa = 0.0;
  double attained_gap = 0.0;  // (1/n) sum (f - Y)^2 - optimum
  double bound = 0.0;         // sqrt(n kappa)
  std::vector<DeviationPoint> points;
  bool holds = true;
};

/// Per-point closeness of a kappa-near-interpolator to the conditional mean.
inline NearInterpolatorReport near_interpolator_check(const RegressionFunction& f, const Dataset& data, double kappa) {
  require_nonempty(data);
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be >= 0");
  NearInterpolatorReport rep;
  rep.kappa = kappa;
  rep.attained_gap = empirical_risk_of(f, data) - interpolation_optimum(data);
  // tolerate roundoff in the optimum itself
  const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, data.max_abs_y() * data.max_abs_y());
  if (rep.attained_gap > kappa + slack)
    throw std::domain_error(
        fmt::format("not a kappa-near-interpolator: training gap {:.6g} exceeds kappa {:.6g}", rep.attained_gap, kappa));
  const ConditionalMean m(data);
  const double n = static_cast<double>(data.size());
  rep.bound = std::sqrt(n * kappa);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double dev = std::abs(f(data.x(i)) - m(data.x(i)));
    rep.points.push_back({i, dev});
    if (dev > rep.bound + std::sqrt(slack)) rep.holds = false;
  }
  return rep;
}

}  // namespace overparam
