#pragma once

// Network of kn parallel fully connected logistic subnetworks combined by a
// linear output layer:
//
//   f_c(x) = sum_{k=1}^{kn} c_out[k] * f_{k,k}^{(L)}(x) + c_out[0]
//
// Each subnetwork has L hidden layers with k0 neurons, except layer L which
// holds the single neuron (k,k) that feeds the output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace overparam {

/// Numerically stable logistic squasher 1/(1+exp(-x)).
inline double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct Architecture {
  std::size_t d = 1;   // input dimension
  std::size_t k0 = 1;  // neurons per hidden layer
  std::size_t L = 2;   // hidden layers per subnetwork
  std::size_t kn = 1;  // parallel subnetworks

  void validate() const {
    if (d < 1 || k0 < 1 || L < 2 || kn < 1)
      throw std::invalid_argument(
          fmt::format("invalid architecture (d={}, k0={}, L={}, kn={}): need d>=1, k0>=1, L>=2, kn>=1", d, k0, L, kn));
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Weights of one subnetwork: (L-2)(k0^2+k0) + k0(d+2) + 1.
constexpr std::size_t subnet_weight_count(const Architecture& a) noexcept {
  return (a.L - 2) * (a.k0 * a.k0 + a.k0) + a.k0 * (a.d + 2) + 1;
}

constexpr std::size_t count_weights(const Architecture& a) noexcept {
  return a.kn * subnet_weight_count(a) + a.kn + 1;
}

// Flat layout. Levels s = 0..L are stored in ascending order; inside a level,
// subnetworks k ascending, destination neurons i ascending, sources j ascending
// with j = 0 the bias. Level L-1 stores only the single top neuron of each
// subnetwork; level L is the output layer (j = 0 constant, j = 1..kn).
// k and i are 0-based; j keeps the bias-at-zero convention.

constexpr std::size_t level_rows(const Architecture& a, std::size_t s) noexcept {
  return s + 1 == a.L ? 1 : a.k0;
}

constexpr std::size_t level_fan_in(const Architecture& a, std::size_t s) noexcept {
  return s == 0 ? a.d : a.k0;
}

constexpr std::size_t level_offset(const Architecture& a, std::size_t s) noexcept {
  if (s == 0) return 0;
  std::size_t off = a.kn * a.k0 * (a.d + 1);
  if (s <= a.L - 1) return off + (s - 1) * a.kn * a.k0 * (a.k0 + 1);
  off += (a.L - 2) * a.kn * a.k0 * (a.k0 + 1);
  return off + a.kn * (a.k0 + 1);
}

/// Index of c_{k,i,j}^{(s)} for s < L.
constexpr std::size_t weight_index(const Architecture& a, std::size_t s, std::size_t k, std::size_t i,
                                   std::size_t j) noexcept {
  const std::size_t cols = level_fan_in(a, s) + 1;
  const std::size_t rows = level_rows(a, s);
  return level_offset(a, s) + (k * rows + i) * cols + j;
}

/// Index of the output weight c_{1,1,j}^{(L)}, j = 0..kn.
constexpr std::size_t output_index(const Architecture& a, std::size_t j) noexcept {
  return level_offset(a, a.L) + j;
}

/// Flat indices of all inner weights (s < L) of subnetwork k, in (s, i, j) order.
inline std::vector<std::size_t> subnet_indices(const Architecture& a, std::size_t k) {
  std::vector<std::size_t> out;
  out.reserve(subnet_weight_count(a));
  for (std::size_t s = 0; s < a.L; ++s)
    for (std::size_t i = 0; i < level_rows(a, s); ++i)
      for (std::size_t j = 0; j <= level_fan_in(a, s); ++j) out.push_back(weight_index(a, s, k, i, j));
  return out;
}

class WeightVector {
 public:
  WeightVector() = default;

  explicit WeightVector(const Architecture& arch) : arch_(arch) {
    arch_.validate();
    values_.assign(count_weights(arch_), 0.0);
  }

  WeightVector(const Architecture& arch, std::vector<double> values) : arch_(arch), values_(std::move(values)) {
    arch_.validate();
    if (values_.size() != count_weights(arch_))
      throw std::invalid_argument(
          fmt::format("weight vector has {} values, architecture needs {}", values_.size(), count_weights(arch_)));
    for (std::size_t t = 0; t < values_.size(); ++t)
      if (!std::isfinite(values_[t])) throw std::invalid_argument(fmt::format("weight {} is not finite", t));
  }

  const Architecture& arch() const noexcept { return arch_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double operator[](std::size_t t) const noexcept { return values_[t]; }
  double& operator[](std::size_t t) noexcept { return values_[t]; }

  double inner(std::size_t s, std::size_t k, std::size_t i, std::size_t j) const noexcept {
    return values_[weight_index(arch_, s, k, i, j)];
  }
  double& inner(std::size_t s, std::size_t k, std::size_t i, std::size_t j) noexcept {
    return values_[weight_index(arch_, s, k, i, j)];
  }
  double output(std::size_t j) const noexcept { return values_[output_index(arch_, j)]; }
  double& output(std::size_t j) noexcept { return values_[output_index(arch_, j)]; }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  Architecture arch_{};
  std::vector<double> values_;
};

inline double max_abs_diff(const WeightVector& a, const WeightVector& b) {
  if (!(a.arch() == b.arch())) throw std::invalid_argument("architectures differ");
  double m = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) m = std::max(m, std::abs(a[t] - b[t]));
  return m;
}

/// All hidden values f_{k,i}^{(r)}(x), r = 1..L, plus the network output.
class ActivationTrace {
 public:
  ActivationTrace() { reset(Architecture{}); }
  explicit ActivationTrace(const Architecture& a) { reset(a); }

  void reset(const Architecture& a) {
    arch_ = a;
    per_subnet_ = (a.L - 1) * a.k0 + 1;
    values_.assign(a.kn * per_subnet_, 0.0);
  }

  const Architecture& arch() const noexcept { return arch_; }

  // r in 1..L; at r == L only i == 0 exists.
  double value(std::size_t k, std::size_t r, std::size_t i) const noexcept { return values_[slot(k, r, i)]; }
  double& value(std::size_t k, std::size_t r, std::size_t i) noexcept { return values_[slot(k, r, i)]; }

  double top(std::size_t k) const noexcept { return value(k, arch_.L, 0); }

  std::span<const double> all_hidden() const noexcept { return values_; }

  double output = 0.0;

 private:
  std::size_t slot(std::size_t k, std::size_t r, std::size_t i) const noexcept {
    return k * per_subnet_ + (r - 1) * arch_.k0 + i;
  }

  Architecture arch_{};
  std::size_t per_subnet_ = 0;
  std::vector<double> values_;
};

/// Layer-L output of subnetwork k only; trace slots of other subnetworks are untouched.
inline double forward_subnet(const WeightVector& w, std::span<const double> x, std::size_t k, ActivationTrace& tr) {
  const Architecture& a = w.arch();
  for (std::size_t i = 0; i < a.k0; ++i) {
    double z = w.inner(0, k, i, 0);
    for (std::size_t j = 0; j < a.d; ++j) z += w.inner(0, k, i, j + 1) * x[j];
    tr.value(k, 1, i) = logistic(z);
  }
  for (std::size_t r = 2; r <= a.L; ++r) {
    const std::size_t rows = level_rows(a, r - 1);
    for (std::size_t i = 0; i < rows; ++i) {
      double z = w.inner(r - 1, k, i, 0);
      for (std::size_t j = 0; j < a.k0; ++j) z += w.inner(r - 1, k, i, j + 1) * tr.value(k, r - 1, j);
      tr.value(k, r, i) = logistic(z);
    }
  }
  return tr.top(k);
}

inline void check_dimension(const Architecture& a, std::span<const double> x) {
  if (x.size() != a.d)
    throw std::invalid_argument(fmt::format("input has dimension {}, architecture expects d={}", x.size(), a.d));
}

/// Evaluates the network into a caller-owned trace (no allocation when the trace is reused).
inline void forward(const WeightVector& w, std::span<const double> x, ActivationTrace& tr) {
  const Architecture& a = w.arch();
  check_dimension(a, x);
  if (!(tr.arch() == a)) tr.reset(a);
  double out = w.output(0);
  for (std::size_t k = 0; k < a.kn; ++k) out += w.output(k + 1) * forward_subnet(w, x, k, tr);
  tr.output = out;
}

inline ActivationTrace forward(const WeightVector& w, std::span<const double> x) {
  ActivationTrace tr(w.arch());
  forward(w, x, tr);
  return tr;
}

inline double evaluate(const WeightVector& w, std::span<const double> x) { return forward(w, x).output; }

/// Plain recursive evaluation in scalar type T (no trace); used by the
/// extended-precision finite-difference oracle.
template <class T>
T evaluate_as(const WeightVector& w, std::span<const double> x) {
  const Architecture& a = w.arch();
  check_dimension(a, x);
  auto sig = [](T z) -> T {
    using std::exp;
    if (z >= T(0)) return T(1) / (T(1) + exp(-z));
    const T e = exp(z);
    return e / (T(1) + e);
  };
  std::vector<T> prev(a.k0), next(a.k0);
  T out = static_cast<T>(w.output(0));
  for (std::size_t k = 0; k < a.kn; ++k) {
    for (std::size_t i = 0; i < a.k0; ++i) {
      T z = static_cast<T>(w.inner(0, k, i, 0));
      for (std::size_t j = 0; j < a.d; ++j) z += static_cast<T>(w.inner(0, k, i, j + 1)) * static_cast<T>(x[j]);
      prev[i] = sig(z);
    }
    for (std::size_t s = 1; s < a.L; ++s) {
      const std::size_t rows = level_rows(a, s);
      for (std::size_t i = 0; i < rows; ++i) {
        T z = static_cast<T>(w.inner(s, k, i, 0));
        for (std::size_t j = 0; j < a.k0; ++j) z += static_cast<T>(w.inner(s, k, i, j + 1)) * prev[j];
        next[i] = sig(z);
      }
      std::swap(prev, next);
    }
    out += static_cast<T>(w.output(k + 1)) * prev[0];
  }
  return out;
}

// Serialization: header line "arch d k0 L kn", then one value per line.

inline void write_weights(std::ostream& os, const WeightVector& w) {
  const auto& a = w.arch();
  os << fmt::format("arch {} {} {} {}\n", a.d, a.k0, a.L, a.kn);
  for (double v : w.values()) os << fmt::format("{:.17g}\n", v);
}

inline WeightVector read_weights(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("weights: missing header line");
  std::istringstream hs(line);
  std::string tag;
  Architecture a;
  if (!(hs >> tag >> a.d >> a.k0 >> a.L >> a.kn) || tag != "arch")
    throw std::runtime_error(fmt::format("weights: malformed header '{}'", line));
  std::vector<double> vals;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(line, &used));
    } catch (const std::exception&) {
      throw std::runtime_error(fmt::format("weights: line {}: not a number '{}'", lineno, line));
    }
  }
  return WeightVector(a, std::move(vals));
}

}  // namespace overparam
