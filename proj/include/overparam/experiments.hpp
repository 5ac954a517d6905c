#pragma once

// Named experiments driven by an ExperimentConfig. Each writes its CSVs and a
// summary.txt into the output directory and returns pass/fail verdicts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "overparam/bounds.hpp"
#include "overparam/config.hpp"
#include "overparam/constructor.hpp"
#include "overparam/core_net.hpp"
#include "overparam/descent.hpp"
#include "overparam/lower_bound.hpp"
#include "overparam/risk_grad.hpp"
#include "overparam/rng.hpp"

namespace overparam {

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentResult {
  std::vector<Verdict> verdicts;
  std::vector<std::pair<std::string, std::string>> results;  // summary key/value lines
  std::vector<std::string> files;                            // written artifacts, relative to the output dir

  bool all_pass() const noexcept {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }
  int exit_code() const noexcept { return all_pass() ? 0 : 1; }

  void verdict(std::string name, bool pass, std::string detail = {}) {
    verdicts.push_back({std::move(name), pass, std::move(detail)});
  }
  void result(std::string key, std::string value) { results.emplace_back(std::move(key), std::move(value)); }
  void result(std::string key, double value) { results.emplace_back(std::move(key), fmt::format("{:.17g}", value)); }
};

/// Raised for numerical breakdown inside an experiment (non-finite values).
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Content hashing (git blob convention: sha1("blob <len>\0" + bytes))

inline std::string git_blob_sha1(const std::string& bytes) {
  const std::string payload = fmt::format("blob {}", bytes.size()) + std::string(1, '\0') + bytes;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("sha1 digest failed");
  std::string hex;
  for (unsigned int t = 0; t < len; ++t) hex += fmt::format("{:02x}", md[t]);
  return hex;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Helpers

namespace detail {

inline std::filesystem::path out_path(const ExperimentConfig& c, const std::string& name) {
  return std::filesystem::path(c.output_dir) / name;
}

template <class Fn>
void write_artifact(const ExperimentConfig& c, ExperimentResult& res, const std::string& name, Fn&& body) {
  std::filesystem::create_directories(c.output_dir);
  std::ofstream os(out_path(c, name), std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error(fmt::format("cannot write '{}'", out_path(c, name).string()));
  body(os);
  if (!os) throw std::runtime_error(fmt::format("write to '{}' failed", out_path(c, name).string()));
  res.files.push_back(name);
}

}  // namespace detail

/// Training sample for the configured generator.
///   grid: x_i = (i/n, 0, ..., 0), i = 1..n, Y_i = +-1
///   uniform: X uniform on [-1,1]^d, Y uniform on [-1,1]
///   adversarial: n draws from the adversarial design
///   file: CSV with d features then the response
inline Dataset make_dataset(const ExperimentConfig& c) {
  if (c.generator == "file") {
    Dataset data = read_dataset_csv(c.data_file, c.data_header);
    if (data.dim() != c.arch.d)
      throw std::invalid_argument(
          fmt::format("data file has dimension {}, architecture expects d={}", data.dim(), c.arch.d));
    return data;
  }
  if (c.generator == "adversarial") return sample(AdversarialDistribution{c.n, c.arch.d}, c.seed);
  Rng rng = make_rng(c.seed, StreamKey::data);
  std::vector<double> xs, ys;
  for (std::size_t i = 1; i <= c.n; ++i) {
    if (c.generator == "grid") {
      xs.push_back(static_cast<double>(i) / static_cast<double>(c.n));
      for (std::size_t l = 1; l < c.arch.d; ++l) xs.push_back(0.0);
      ys.push_back(rng.sign());
    } else {
      for (std::size_t l = 0; l < c.arch.d; ++l) xs.push_back(rng.uniform(-1.0, 1.0));
      ys.push_back(rng.uniform(-1.0, 1.0));
    }
  }
  return Dataset(c.arch.d, std::move(xs), std::move(ys));
}

// ---------------------------------------------------------------------------
// gradcheck

inline void run_gradcheck(const ExperimentConfig& c, ExperimentResult& res) {
  std::size_t failures = 0;
  double worst = 0.0;
  detail::write_artifact(c, res, "gradcheck.csv", [&](std::ostream& os) {
    os << "config,d,k0,L,kn,n,weights,max_rel_error,pass\n";
    for (std::size_t t = 0; t < c.configs; ++t) {
      Rng rng = make_rng(c.seed, StreamKey::trial, t);
      Architecture a;
      a.d = 1 + rng.index(3);
      a.k0 = 1 + rng.index(4);
      a.L = 2 + rng.index(3);
      a.kn = 1 + rng.index(8);
      const WeightVector w = random_weights(a, rng, 2.0);
      const Dataset data = random_dataset(1 + rng.index(5), a.d, rng, 1.0, 1.0);
      const double err = max_relative_error(analytic_gradient(w, data), finite_difference_gradient(w, data));
      if (!std::isfinite(err)) throw NumericsError(fmt::format("gradcheck config {}: non-finite error", t));
      const bool ok = err <= c.gradcheck_tol;
      if (!ok) ++failures;
      worst = std::max(worst, err);
      os << fmt::format("{},{},{},{},{},{},{},{:.6e},{}\n", t, a.d, a.k0, a.L, a.kn, data.size(), w.size(), err,
                        ok ? 1 : 0);
    }
  });
  res.result("configurations", std::to_string(c.configs));
  res.result("worst_relative_error", worst);
  res.verdict("analytic and finite-difference gradients agree", failures == 0,
              fmt::format("{}/{} within {:.3g}", c.configs - failures, c.configs, c.gradcheck_tol));
}

// ---------------------------------------------------------------------------
// bounds-sweep

inline void run_bounds_sweep(const ExperimentConfig& c, ExperimentResult& res) {
  const auto l5 = weight_lipschitz_sweep(c.trials, c.seed);
  const auto sup = gradient_sup_sweep(c.trials, c.seed);
  const auto lip = gradient_lipschitz_sweep(c.pairs, c.seed);
  detail::write_artifact(c, res, "weight_lipschitz.csv", [&](std::ostream& os) { write_check_csv(os, l5); });
  detail::write_artifact(c, res, "gradient_sup.csv", [&](std::ostream& os) { write_check_csv(os, sup); });
  detail::write_artifact(c, res, "gradient_lipschitz.csv", [&](std::ostream& os) { write_check_csv(os, lip); });
  const auto v5 = count_violations(l5), vs = count_violations(sup), vl = count_violations(lip);
  res.verdict("network output is Lipschitz in the weights", v5 == 0, fmt::format("{} violations in {}", v5, l5.size()));
  res.verdict("gradient sup-norm bound", vs == 0, fmt::format("{} violations in {}", vs, sup.size()));
  res.verdict("gradient Lipschitz bound", vl == 0, fmt::format("{} violations in {}", vl, lip.size()));
}

// ---------------------------------------------------------------------------
// indicator

namespace detail {

struct RandomRectangle {
  Architecture arch;
  RectangleSpec spec;
};

inline RandomRectangle random_rectangle(Rng& rng, double n, bool robust) {
  RandomRectangle r;
  r.arch.d = 1 + rng.index(2);
  r.arch.k0 = 2 * r.arch.d;
  r.arch.L = 2 + rng.index(2);
  r.arch.kn = 1;
  r.spec.delta = rng.uniform(0.02, 0.1);
  r.spec.n = n;
  r.spec.robust = robust;
  for (std::size_t l = 0; l < r.arch.d; ++l) {
    const double a = rng.uniform(-0.9, 0.3);
    const double width = 2.0 * r.spec.delta + rng.uniform(0.05, 0.5);
    r.spec.a.push_back(a);
    r.spec.b.push_back(std::min(a + width, 0.95));
  }
  return r;
}

// Half the probes uniform on [-1,1]^d, half concentrated around the rectangle.
inline std::vector<double> indicator_probes(Rng& rng, const RectangleSpec& spec, std::size_t count) {
  const std::size_t d = spec.a.size();
  std::vector<double> p;
  p.reserve(count * d);
  for (std::size_t q = 0; q < count; ++q)
    for (std::size_t l = 0; l < d; ++l) {
      if (q % 2 == 0) {
        p.push_back(rng.uniform(-1.0, 1.0));
      } else {
        const double lo = std::max(-1.0, spec.a[l] - 2.0 * spec.delta);
        const double hi = std::min(1.0, spec.b[l] + 2.0 * spec.delta);
        p.push_back(rng.uniform(lo, hi));
      }
    }
  return p;
}

}  // namespace detail

inline void run_indicator(const ExperimentConfig& c, ExperimentResult& res) {
  const double n = 5.0;
  std::size_t violations = 0, hypothesis_failures = 0, undetected = 0;
  detail::write_artifact(c, res, "indicator.csv", [&](std::ostream& os) {
    os << "rectangle,d,L,delta,inside,outside,margin,worst_inside,worst_outside,violations,"
          "hypothesis_violations,corrupted_violations\n";
    for (std::size_t t = 0; t < c.rectangles; ++t) {
      Rng rng = make_rng(c.seed, StreamKey::trial, t);
      const auto rect = detail::random_rectangle(rng, n, false);
      const auto iw = build_indicator(rect.arch, rect.spec);
      const auto hyp = indicator_hypotheses(iw, false);
      Rng prng = make_rng(c.seed, StreamKey::probe, t);
      const auto probes = detail::indicator_probes(prng, rect.spec, c.probes);
      const auto rep = verify_indicator(iw, probes);
      // negative control: flip the sign of the top neuron's first incoming weight
      IndicatorWeights bad = iw;
      bad.weights.inner(rect.arch.L - 1, 0, 0, 1) *= -1.0;
      const auto bad_rep = verify_indicator(bad, probes);
      const bool detected = !bad_rep.ok() || !indicator_hypotheses(bad, false).empty();
      violations += rep.violations.size();
      hypothesis_failures += hyp.size();
      if (!detected) ++undetected;
      os << fmt::format("{},{},{},{:.17g},{},{},{},{:.17g},{:.17g},{},{},{}\n", t, rect.arch.d, rect.arch.L,
                        rect.spec.delta, rep.inside, rep.outside, rep.margin, rep.worst_inside, rep.worst_outside,
                        rep.violations.size(), hyp.size(), bad_rep.violations.size());
    }
  });

  std::size_t pert_violations = 0;
  double radius_seen = 0.0;
  detail::write_artifact(c, res, "perturbation.csv", [&](std::ostream& os) {
    os << "trial,d,L,radius,hypothesis_violations,probe_violations,worst_inside,worst_outside\n";
    for (std::size_t t = 0; t < c.perturbations; ++t) {
      Rng rng = make_rng(c.seed, StreamKey::perturbation, t);
      const auto rect = detail::random_rectangle(rng, n, true);
      IndicatorWeights iw = build_indicator(rect.arch, rect.spec);
      const double r = perturbation_radius(rect.arch.d, rect.arch.k0, n);
      radius_seen = std::max(radius_seen, r);
      // two independent perturbations, each strictly inside the radius
      for (auto& v : iw.weights.values()) v += rng.uniform(-r, r) + rng.uniform(-r, r);
      iw.weights.output(0) = 0.0;
      iw.weights.output(1) = 1.0;
      const auto hyp = indicator_hypotheses(iw, false);
      const auto probes = detail::indicator_probes(rng, rect.spec, 1000);
      const auto rep = verify_indicator(iw, probes);
      pert_violations += hyp.size() + rep.violations.size();
      os << fmt::format("{},{},{},{:.17g},{},{},{:.17g},{:.17g}\n", t, rect.arch.d, rect.arch.L, r, hyp.size(),
                        rep.violations.size(), rep.worst_inside, rep.worst_outside);
    }
  });

  res.result("rectangles", std::to_string(c.rectangles));
  res.result("probes_per_rectangle", std::to_string(c.probes));
  res.result("perturbations", std::to_string(c.perturbations));
  res.verdict("indicator bounds hold on every probe", violations == 0, fmt::format("{} violations", violations));
  res.verdict("canonical weights satisfy the hypotheses", hypothesis_failures == 0,
              fmt::format("{} violated inequalities", hypothesis_failures));
  res.verdict("corrupted-weight control is detected", undetected == 0,
              fmt::format("{} of {} corruptions undetected", undetected, c.rectangles));
  res.verdict("robust construction survives double perturbation", pert_violations == 0,
              fmt::format("{} violations in {} trials", pert_violations, c.perturbations));
}

// ---------------------------------------------------------------------------
// planted-train

struct PlantedRun {
  Dataset data;
  WeightVector w0;
  TrainRun run;
  double optimum = 0.0;
  double lambda = 0.0;
  std::optional<SmoothnessConstants> smoothness;  // set when lambda = 1/L
  std::size_t condition_steps = 0;                // steps where the indicator condition held
  std::size_t lower_bound_violations = 0;         // among those steps
  std::size_t contraction_violations = 0;
  bool condition_every_step = true;
  struct StepRow {
    std::size_t step;
    double grad_sq;
    double rhs;
    bool condition;
  };
  std::vector<StepRow> steps;
};

inline double default_filler_bound(double n) { return std::pow(n, 4.0); }

inline PlantedRun planted_training(const ExperimentConfig& c) {
  PlantedRun pr;
  pr.data = make_dataset(c);
  const double n = static_cast<double>(pr.data.size());
  InitSpec init;
  init.seed = c.seed;
  init.mode = c.init_mode == "planted" ? InitMode::planted : InitMode::random;
  init.bound = c.init_bound.value_or(init.mode == InitMode::planted ? default_filler_bound(n) : 1.0);
  init.separation = c.separation;
  pr.w0 = initialize(c.arch, init, pr.data);
  pr.optimum = interpolation_optimum(pr.data);

  TrainOptions opt;
  opt.steps = c.steps;
  opt.monitors = c.monitors;
  if (c.lambda_mode == LambdaMode::smoothness) {
    // radius with a factor-2 margin for the iterates; checked after the run
    const double R = 2.0 * precondition_radius(pr.w0, pr.data);
    pr.smoothness = smoothness_constants_for_radius(c.arch, R);
    pr.lambda = std::exp(-pr.smoothness->Ln.log);
    if (!(pr.lambda > 0.0)) throw NumericsError("step size 1/L underflows double precision");
    opt.iterate_bound = R;
  } else {
    pr.lambda = c.lambda;
  }
  opt.lambda = pr.lambda;

  const bool track = n >= 5.0 && init.mode == InitMode::planted;
  const auto assignment = planted_assignment(pr.data);
  const double F0 = empirical_risk(pr.w0, pr.data);
  const double Ln = pr.smoothness ? std::exp(pr.smoothness->Ln.log) : 0.0;
  opt.observer = [&](std::size_t t, const WeightVector& w, double risk, std::span<const double> grad) {
    if (!track) return;
    const auto cond = check_indicator_condition(w, pr.data, assignment, n);
    const auto cmp = gradient_lower_bound_compare(grad, risk, pr.optimum, n);
    pr.steps.push_back({t, cmp.grad_sq, cmp.rhs, cond.holds});
    if (cond.holds) {
      ++pr.condition_steps;
      if (!cmp.holds) ++pr.lower_bound_violations;
    } else {
      pr.condition_every_step = false;
    }
    if (pr.smoothness) {
      const auto pred = contraction_predict(F0, pr.optimum, n, Ln, static_cast<double>(t));
      // small relative slack for roundoff in F itself
      if (risk - pr.optimum > pred.geometric + 1e-12 * std::max(1.0, F0)) ++pr.contraction_violations;
    }
  };
  pr.run = train(pr.w0, pr.data, opt);
  return pr;
}

inline void run_planted_train(const ExperimentConfig& c, ExperimentResult& res) {
  PlantedRun pr = planted_training(c);
  const double n = static_cast<double>(pr.data.size());
  const double final_gap = pr.run.risk.back() - pr.optimum;

  detail::write_artifact(c, res, "risk_trace.csv", [&](std::ostream& os) { write_risk_trace_csv(os, pr.run); });
  detail::write_artifact(c, res, "gradient_lower_bound.csv", [&](std::ostream& os) {
    os << "step,grad_sq,rhs,margin,condition_holds,violated\n";
    for (const auto& s : pr.steps)
      os << fmt::format("{},{:.17g},{:.17g},{:.17g},{},{}\n", s.step, s.grad_sq, s.rhs, s.grad_sq - s.rhs,
                        s.condition ? 1 : 0, (s.condition && s.grad_sq < s.rhs) ? 1 : 0);
  });
  detail::write_artifact(c, res, "final_weights.txt",
                         [&](std::ostream& os) { write_weights(os, pr.run.final_weights); });

  res.result("n", std::to_string(pr.data.size()));
  res.result("lambda", pr.lambda);
  if (pr.smoothness) res.result("log_smoothness_constant", pr.smoothness->Ln.log);
  res.result("initial_risk", pr.run.risk.front());
  res.result("final_risk", pr.run.risk.back());
  res.result("interpolation_optimum", pr.optimum);
  res.result("final_gap", final_gap);
  res.result("indicator_condition_steps", fmt::format("{}/{}", pr.condition_steps, pr.run.risk.size()));

  res.verdict("risk trace is monotone nonincreasing", pr.run.monotonicity_violations.empty(),
              fmt::format("{} increases", pr.run.monotonicity_violations.size()));
  if (n >= 5.0)
    res.verdict("gradient lower bound holds wherever the indicator condition holds", pr.lower_bound_violations == 0,
                fmt::format("{} violations over {} condition steps", pr.lower_bound_violations, pr.condition_steps));
  res.verdict("final training gap within tolerance", final_gap <= c.final_gap,
              fmt::format("gap {:.6g} vs {:.3g}", final_gap, c.final_gap));
  if (pr.smoothness) {
    res.verdict("iterates stay inside the certified norm radius", pr.run.iterate_violations.empty(),
                fmt::format("{} steps outside", pr.run.iterate_violations.size()));
    if (pr.condition_every_step)
      res.verdict("geometric contraction bound holds", pr.contraction_violations == 0,
                  fmt::format("{} violations", pr.contraction_violations));
  }

  // deviations of the trained network from the conditional mean
  const WeightVector& wf = pr.run.final_weights;
  const RegressionFunction f = [&wf](std::span<const double> x) { return evaluate(wf, x); };
  try {
    const auto l9 = near_interpolator_check(f, pr.data, c.kappa);
    detail::write_artifact(c, res, "deviations.csv", [&](std::ostream& os) {
      os << "point,deviation,bound,within\n";
      for (const auto& p : l9.points)
        os << fmt::format("{},{:.17g},{:.17g},{}\n", p.index, p.deviation, l9.bound, p.deviation <= l9.bound ? 1 : 0);
    });
    double worst = 0.0;
    for (const auto& p : l9.points) worst = std::max(worst, p.deviation);
    res.verdict("per-point deviations within sqrt(n kappa)", l9.holds,
                fmt::format("worst {:.6g} vs bound {:.6g}", worst, l9.bound));
  } catch (const std::domain_error& e) {
    res.verdict("per-point deviations within sqrt(n kappa)", false, e.what());
  }
}

// ---------------------------------------------------------------------------
// schedule

inline void run_schedule(const ExperimentConfig& c, ExperimentResult& res) {
  const auto s = theoretical_schedule(c.arch, static_cast<double>(c.n));
  detail::write_artifact(c, res, "schedule.csv", [&](std::ostream& os) {
    os << "quantity,coefficient,exponent,log_value\n";
    os << fmt::format("kn,1,{},{:.17g}\n", s.kn_exponent, s.log_kn());
    os << fmt::format("lambda,1,{},{:.17g}\n", s.lambda_exponent, s.log_lambda());
    os << fmt::format("tn,{},{},{:.17g}\n", s.tn_coefficient, s.tn_exponent, s.log_tn());
    os << fmt::format("Ln,1,{},{:.17g}\n", s.Ln_exponent, s.log_Ln());
  });
  res.result("kn_exponent", std::to_string(s.kn_exponent));
  res.result("lambda_exponent", std::to_string(s.lambda_exponent));
  res.result("tn", fmt::format("{}*n^{}", s.tn_coefficient, s.tn_exponent));
  res.result("Ln_exponent", std::to_string(s.Ln_exponent));
  res.result("exponents", fmt::format("({}, {}, {}, {})", s.kn_exponent, s.lambda_exponent, s.tn_exponent,
                                      s.Ln_exponent));
  res.verdict("t_n * lambda_n = 2 n^2", s.tn_coefficient == 2.0 && s.tn_lambda_exponent() == 2,
              fmt::format("{} n^{}", s.tn_coefficient, s.tn_lambda_exponent()));
  res.verdict("t_n / (2 n L_n) = n", s.tn_coefficient == 2.0 && s.contraction_exponent() == 1,
              fmt::format("n^{}", s.contraction_exponent()));
  auto expect = [&](const char* name, const std::optional<long long>& want, long long got) {
    if (want) res.verdict(fmt::format("{} exponent matches", name), *want == got, fmt::format("{} vs {}", got, *want));
  };
  expect("kn", c.expect_kn_exponent, s.kn_exponent);
  expect("lambda", c.expect_lambda_exponent, s.lambda_exponent);
  expect("tn", c.expect_tn_exponent, s.tn_exponent);
  expect("Ln", c.expect_Ln_exponent, s.Ln_exponent);
}

// ---------------------------------------------------------------------------
// lower-bound and corollary

/// Planted-initialized network trained by gradient descent; fails when the
/// sample violates the planted preconditions or training breaks down.
inline Estimator network_estimator(const ExperimentConfig& c) {
  return [c](const Dataset& data, std::uint64_t seed) {
    const double n = static_cast<double>(data.size());
    InitSpec init;
    init.seed = seed;
    init.mode = InitMode::planted;
    init.bound = c.init_bound.value_or(default_filler_bound(n));
    init.separation = c.separation;
    try {
      const WeightVector w0 = initialize(c.arch, init, data);
      TrainOptions opt;
      opt.lambda = c.lambda;
      opt.steps = c.steps;
      opt.monitors = false;
      auto w = std::make_shared<WeightVector>(train(w0, data, opt).final_weights);
      return Fit{[w](std::span<const double> x) { return evaluate(*w, x); }, true};
    } catch (const std::invalid_argument&) {
    } catch (const TrainingError&) {
    }
    return Fit{[](std::span<const double>) { return 0.0; }, false};
  };
}

inline void report_lower_bound(const ExperimentConfig& c, ExperimentResult& res, const RiskReport& rep,
                               bool compare_exact) {
  const double n = static_cast<double>(c.n);
  detail::write_artifact(c, res, "replications.csv", [&](std::ostream& os) { write_replications_csv(os, rep); });
  res.result("replications", std::to_string(rep.rows.size()));
  res.result("mean_risk", rep.mean_risk);
  res.result("stderr", rep.std_error ? fmt::format("{:.17g}", *rep.std_error) : std::string("n/a"));
  res.result("failure_rate", rep.failure_rate);
  res.result("kappa_hat", rep.kappa_hat);
  res.result("composed_bound", rep.composed_bound);
  res.result("exact_reference", rep.exact_reference);

  if (compare_exact && rep.std_error) {
    const double dev = std::abs(rep.mean_risk - rep.exact_reference);
    res.verdict("mean risk matches the exact binomial value", dev <= c.se_multiple * *rep.std_error,
                fmt::format("|{:.6g} - {:.6g}| = {:.3g} vs {:.3g} standard errors", rep.mean_risk,
                            rep.exact_reference, dev, c.se_multiple));
  }
  res.verdict("mean risk at least the lower bound", rep.mean_risk >= c.min_mean_risk,
              fmt::format("{:.6g} vs {:.6g}", rep.mean_risk, c.min_mean_risk));
  const double kappa_limit = n > 1.0 ? 1.0 / (n * std::log(n)) : std::numeric_limits<double>::infinity();
  const bool near = rep.kappa_hat <= kappa_limit;
  res.verdict("estimator is a near-interpolator", near,
              fmt::format("kappa_hat {:.6g} vs 1/(n log n) = {:.6g}", rep.kappa_hat, kappa_limit));
  if (near)
    res.verdict("composed bound at least the threshold", rep.composed_bound >= c.composed_min,
                fmt::format("{:.6g} vs {:.6g}", rep.composed_bound, c.composed_min));
}

inline void run_lower_bound(const ExperimentConfig& c, ExperimentResult& res) {
  const AdversarialDistribution dist{c.n, c.arch.d};
  Estimator est = c.estimator == "zero"      ? zero_estimator()
                  : c.estimator == "network" ? network_estimator(c)
                                             : conditional_mean_estimator();
  const RiskReport rep = mc_lower_bound_experiment(dist, est, c.replications, c.seed);
  report_lower_bound(c, res, rep, c.estimator == "conditional-mean");

  std::size_t disordered = 0;
  detail::write_artifact(c, res, "binomial.csv", [&](std::ostream& os) {
    os << "n,exact,intermediate,final_bound,ordered\n";
    for (std::size_t m = 10; m <= 1000; ++m) {
      const auto b = binomial_identity(m);
      if (!b.chain_ordered) ++disordered;
      os << fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", m, b.exact, b.intermediate, b.final_bound,
                        b.chain_ordered ? 1 : 0);
    }
  });
  res.verdict("binomial chain ordered for n = 10..1000", disordered == 0, fmt::format("{} disordered", disordered));
}

inline void run_network_lower_bound(const ExperimentConfig& c, ExperimentResult& res) {
  const AdversarialDistribution dist{c.n, c.arch.d};
  const RiskReport rep = mc_lower_bound_experiment(dist, network_estimator(c), c.replications, c.seed);
  report_lower_bound(c, res, rep, false);
}

// ---------------------------------------------------------------------------

inline void write_summary(const ExperimentConfig& c, const ExperimentResult& res) {
  std::string s;
  s += fmt::format("experiment = {}\n", c.experiment);
  s += fmt::format("seed = {}\n", c.seed);
  if (!c.source_text.empty() || !c.source_path.empty())
    s += fmt::format("config_sha1 = {}\n", git_blob_sha1(c.source_text));
  if (c.generator == "file" && c.experiment == "planted-train")
    s += fmt::format("data_sha1 = {}\n", git_blob_sha1(read_file_bytes(c.data_file)));
  s += "\n[config]\n" + format_config(c);
  s += "\n[results]\n";
  for (const auto& [k, v] : res.results) s += fmt::format("{} = {}\n", k, v);
  s += "\n[verdicts]\n";
  for (const auto& v : res.verdicts)
    s += fmt::format("{} {}{}\n", v.pass ? "PASS" : "FAIL", v.name, v.detail.empty() ? "" : " (" + v.detail + ")");
  s += fmt::format("\noverall = {}\n", res.all_pass() ? "PASS" : "FAIL");
  std::ofstream os(detail::out_path(c, "summary.txt"), std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write summary.txt");
  os << s;
}

/// Runs the configured experiment and writes summary.txt. Throws on unknown
/// experiments and on numerical breakdown.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  if (!known_experiment(c.experiment)) throw std::invalid_argument(fmt::format("unknown experiment '{}'", c.experiment));
  std::filesystem::create_directories(c.output_dir);
  ExperimentResult res;
  try {
    if (c.experiment == "gradcheck") run_gradcheck(c, res);
    else if (c.experiment == "bounds-sweep") run_bounds_sweep(c, res);
    else if (c.experiment == "indicator") run_indicator(c, res);
    else if (c.experiment == "planted-train") run_planted_train(c, res);
    else if (c.experiment == "schedule") run_schedule(c, res);
    else if (c.experiment == "lower-bound") run_lower_bound(c, res);
    else run_network_lower_bound(c, res);
  } catch (const TrainingError& e) {
    throw NumericsError(fmt::format("{}: training broke down at {}", c.experiment, e.what()));
  }
  write_summary(c, res);
  res.files.push_back("summary.txt");
  return res;
}

}  // namespace overparam
