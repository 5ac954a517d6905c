#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/float128.hpp>
#include <fmt/format.h>

#include "overparam/core_net.hpp"

namespace overparam {

class Dataset {
 public:
  Dataset() = default;

  // xs is row-major, n rows of d coordinates.
  Dataset(std::size_t d, std::vector<double> xs, std::vector<double> ys)
      : d_(d), xs_(std::move(xs)), ys_(std::move(ys)) {
    if (d_ == 0) throw std::invalid_argument("dataset dimension must be >= 1");
    if (xs_.size() != d_ * ys_.size())
      throw std::invalid_argument(fmt::format("dataset: {} coordinates for {} points of dimension {}", xs_.size(),
                                              ys_.size(), d_));
    for (double v : xs_)
      if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite coordinate");
    for (double v : ys_)
      if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite response");
  }

  std::size_t size() const noexcept { return ys_.size(); }
  std::size_t dim() const noexcept { return d_; }
  bool empty() const noexcept { return ys_.empty(); }

  std::span<const double> x(std::size_t i) const noexcept { return {xs_.data() + i * d_, d_}; }
  double y(std::size_t i) const noexcept { return ys_[i]; }
  std::span<const double> ys() const noexcept { return ys_; }

  double max_abs_x() const noexcept {
    double m = 0.0;
    for (double v : xs_) m = std::max(m, std::abs(v));
    return m;
  }
  double max_abs_y() const noexcept {
    double m = 0.0;
    for (double v : ys_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t d_ = 1;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

inline void require_nonempty(const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("dataset is empty");
}

// Points are equal iff every coordinate is bitwise equal. The ordering sorts by
// value first so that "lexicographic" has its numeric meaning.
struct PointLess {
  bool operator()(const std::vector<double>& a, const std::vector<double>& b) const noexcept {
    for (std::size_t t = 0; t < a.size(); ++t) {
      if (a[t] < b[t]) return true;
      if (b[t] < a[t]) return false;
      const auto ba = std::bit_cast<std::uint64_t>(a[t]);
      const auto bb = std::bit_cast<std::uint64_t>(b[t]);
      if (ba != bb) return ba < bb;
    }
    return false;
  }
};

inline bool same_point(std::span<const double> a, std::span<const double> b) noexcept {
  for (std::size_t t = 0; t < a.size(); ++t)
    if (std::bit_cast<std::uint64_t>(a[t]) != std::bit_cast<std::uint64_t>(b[t])) return false;
  return true;
}

/// Distinct sample points in lexicographic order.
inline std::vector<std::vector<double>> distinct_points(const Dataset& data) {
  std::vector<std::vector<double>> pts;
  pts.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) pts.emplace_back(data.x(i).begin(), data.x(i).end());
  std::sort(pts.begin(), pts.end(), PointLess{});
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return same_point(a, b); }),
            pts.end());
  return pts;
}

/// Per-distinct-point response average; 0 at points not in the sample (0/0 = 0).
class ConditionalMean {
 public:
  explicit ConditionalMean(const Dataset& data) {
    std::map<std::vector<double>, std::pair<double, std::size_t>, PointLess> acc;
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto& slot = acc[std::vector<double>(data.x(i).begin(), data.x(i).end())];
      slot.first += data.y(i);
      slot.second += 1;
    }
    for (auto& [pt, sc] : acc) means_.emplace(pt, sc.first / static_cast<double>(sc.second));
  }

  double operator()(std::span<const double> x) const {
    auto it = means_.find(std::vector<double>(x.begin(), x.end()));
    return it == means_.end() ? 0.0 : it->second;
  }

  const std::map<std::vector<double>, double, PointLess>& table() const noexcept { return means_; }

 private:
  std::map<std::vector<double>, double, PointLess> means_;
};

inline ConditionalMean conditional_mean(const Dataset& data) { return ConditionalMean(data); }

/// min over all g of (1/n) sum (g(X_i) - Y_i)^2, attained by the conditional mean.
inline double interpolation_optimum(const Dataset& data) {
  require_nonempty(data);
  const ConditionalMean m(data);
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = m(data.x(i)) - data.y(i);
    s += r * r;
  }
  return s / static_cast<double>(data.size());
}

/// (1/n) sum (f(X_i) - Y_i)^2 for an arbitrary callable f.
template <class Fn>
double empirical_risk_of(Fn&& f, const Dataset& data) {
  require_nonempty(data);
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = f(data.x(i)) - data.y(i);
    s += r * r;
  }
  return s / static_cast<double>(data.size());
}

inline double empirical_risk(const WeightVector& w, const Dataset& data) {
  require_nonempty(data);
  ActivationTrace tr(w.arch());
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(w, data.x(i), tr);
    const double r = tr.output - data.y(i);
    s += r * r;
  }
  return s / static_cast<double>(data.size());
}

/// Reusable buffers for gradient evaluation inside a training loop.
struct GradientWorkspace {
  ActivationTrace trace;
  std::vector<double> delta;
  std::vector<double> next_delta;
};

/// Writes dF_n/dc into grad (same indexing as the weights) and returns F_n(c).
/// Reverse accumulation over the activation trace with sigma' = f (1 - f).
inline double risk_and_gradient(const WeightVector& w, const Dataset& data, std::span<double> grad,
                                GradientWorkspace& ws) {
  require_nonempty(data);
  const Architecture& a = w.arch();
  check_dimension(a, data.x(0));
  if (grad.size() != w.size()) throw std::invalid_argument("gradient buffer has wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);
  if (!(ws.trace.arch() == a)) ws.trace.reset(a);
  ws.delta.assign(a.k0, 0.0);
  ws.next_delta.assign(a.k0, 0.0);
  auto& tr = ws.trace;

  const double n = static_cast<double>(data.size());
  double risk = 0.0;
  for (std::size_t l = 0; l < data.size(); ++l) {
    const auto x = data.x(l);
    forward(w, x, tr);
    const double e = tr.output - data.y(l);
    risk += e * e;
    const double scale = 2.0 / n * e;

    grad[output_index(a, 0)] += scale;
    for (std::size_t k = 0; k < a.kn; ++k) {
      grad[output_index(a, k + 1)] += scale * tr.top(k);
      const double c_out = w.output(k + 1);
      if (c_out == 0.0) continue;  // every inner partial of this subnetwork carries this factor

      const double ftop = tr.top(k);
      const double dtop = scale * c_out * ftop * (1.0 - ftop);
      const std::size_t top = a.L - 1;
      grad[weight_index(a, top, k, 0, 0)] += dtop;
      for (std::size_t j = 0; j < a.k0; ++j) {
        const double f = tr.value(k, a.L - 1, j);
        grad[weight_index(a, top, k, 0, j + 1)] += dtop * f;
        ws.delta[j] = dtop * w.inner(top, k, 0, j + 1) * f * (1.0 - f);
      }
      // ws.delta holds dF/dz for layer s+1 neurons when processing level s.
      for (std::size_t s = a.L - 2; s >= 1; --s) {
        std::fill(ws.next_delta.begin(), ws.next_delta.end(), 0.0);
        for (std::size_t i = 0; i < a.k0; ++i) {
          const double di = ws.delta[i];
          grad[weight_index(a, s, k, i, 0)] += di;
          for (std::size_t j = 0; j < a.k0; ++j) {
            grad[weight_index(a, s, k, i, j + 1)] += di * tr.value(k, s, j);
            ws.next_delta[j] += di * w.inner(s, k, i, j + 1);
          }
        }
        for (std::size_t j = 0; j < a.k0; ++j) {
          const double f = tr.value(k, s, j);
          ws.delta[j] = ws.next_delta[j] * f * (1.0 - f);
        }
      }
      for (std::size_t i = 0; i < a.k0; ++i) {
        const double di = ws.delta[i];
        grad[weight_index(a, 0, k, i, 0)] += di;
        for (std::size_t j = 0; j < a.d; ++j) grad[weight_index(a, 0, k, i, j + 1)] += di * x[j];
      }
    }
  }
  return risk / n;
}

inline std::vector<double> analytic_gradient(const WeightVector& w, const Dataset& data) {
  std::vector<double> g(w.size());
  GradientWorkspace ws;
  risk_and_gradient(w, data, g, ws);
  return g;
}

/// Central differences of an arbitrary scalar function; step h * max(1, |p_t|) per coordinate.
template <class Fn>
std::vector<double> central_difference(Fn&& f, std::span<const double> point, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument(fmt::format("finite-difference step must be > 0, got {}", h));
  std::vector<double> p(point.begin(), point.end());
  std::vector<double> g(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) {
    const double orig = p[t];
    const double step = h * std::max(1.0, std::abs(orig));
    p[t] = orig + step;
    const double up = f(std::span<const double>(p));
    p[t] = orig - step;
    const double down = f(std::span<const double>(p));
    p[t] = orig;
    g[t] = (up - down) / (2.0 * step);
  }
  return g;
}

using extended_real = boost::multiprecision::float128;

/// F_n evaluated in quad precision through the plain recursion.
inline extended_real empirical_risk_extended(const WeightVector& w, const Dataset& data) {
  require_nonempty(data);
  extended_real s = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const extended_real r = evaluate_as<extended_real>(w, data.x(i)) - extended_real(data.y(i));
    s += r * r;
  }
  return s / extended_real(data.size());
}

/// Central differences of F_n. The risk is evaluated in quad precision: in
/// double (or long double) the cancellation F(c+h) - F(c-h) loses too many
/// digits when F is O(100) and a partial is O(1e-8).
inline std::vector<double> finite_difference_gradient(const WeightVector& w, const Dataset& data, double h = 1e-6) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument(fmt::format("finite-difference step must be > 0, got {}", h));
  WeightVector probe = w;
  std::vector<double> g(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) {
    const double orig = w[t];
    const double step = h * std::max(1.0, std::abs(orig));
    probe[t] = orig + step;
    const extended_real up = empirical_risk_extended(probe, data);
    probe[t] = orig - step;
    const extended_real down = empirical_risk_extended(probe, data);
    probe[t] = orig;
    // the realized step (orig+step)-(orig-step) may differ from 2*step by rounding
    const extended_real span = extended_real(orig + step) - extended_real(orig - step);
    g[t] = static_cast<double>((up - down) / span);
  }
  return g;
}

/// Coordinatewise relative error with an absolute floor: |a-b| / max(|a|, |b|, floor).
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-10) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double denom = std::max({std::abs(a[t]), std::abs(b[t]), floor});
    worst = std::max(worst, std::abs(a[t] - b[t]) / denom);
  }
  return worst;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double t : v) s += t * t;
  return std::sqrt(s);
}

inline double sup_norm(std::span<const double> v) {
  double s = 0.0;
  for (double t : v) s = std::max(s, std::abs(t));
  return s;
}

// CSV: d feature columns then the response; optional header line.

inline Dataset read_dataset_csv(std::istream& is, bool has_header = false) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t d = 0;
  std::vector<double> xs, ys;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (has_header && lineno == 1) continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(fmt::format("dataset csv line {}: '{}' is not a number", lineno, cell));
      }
    }
    if (row.size() < 2) throw std::runtime_error(fmt::format("dataset csv line {}: need >= 2 columns", lineno));
    if (d == 0) d = row.size() - 1;
    if (row.size() != d + 1)
      throw std::runtime_error(fmt::format("dataset csv line {}: expected {} columns, got {}", lineno, d + 1, row.size()));
    xs.insert(xs.end(), row.begin(), row.end() - 1);
    ys.push_back(row.back());
  }
  if (ys.empty()) throw std::runtime_error("dataset csv: no rows");
  return Dataset(d, std::move(xs), std::move(ys));
}

inline Dataset read_dataset_csv(const std::string& path, bool has_header = false) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open dataset '{}'", path));
  return read_dataset_csv(in, has_header);
}

inline void write_dataset_csv(std::ostream& os, const Dataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x(i)) os << fmt::format("{:.17g},", v);
    os << fmt::format("{:.17g}\n", data.y(i));
  }
}

}  // namespace overparam
