#pragma once

// Experiment configuration: flat "key = value" lines grouped under [section]
// headers. '#' and ';' start comments. Parsing collects every error with its
// line number; a config is either fully valid or rejected.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "overparam/core_net.hpp"

namespace overparam {

inline constexpr std::array<std::string_view, 7> experiment_names = {
    "gradcheck", "bounds-sweep", "indicator", "planted-train", "schedule", "lower-bound", "corollary"};

inline bool known_experiment(std::string_view name) {
  return std::find(experiment_names.begin(), experiment_names.end(), name) != experiment_names.end();
}

/// Experiments that build indicator subnetworks and therefore need k0 >= 2d.
inline bool needs_indicator_arch(std::string_view name) {
  return name == "indicator" || name == "planted-train" || name == "schedule" || name == "corollary";
}

enum class LambdaMode { fixed, smoothness };  // smoothness: 1/L at the run's norm radius

struct ExperimentConfig {
  std::string experiment;
  Architecture arch{1, 2, 2, 10};

  // [data]
  std::string generator = "grid";  // grid | uniform | adversarial | file
  std::string data_file;
  bool data_header = false;
  std::size_t n = 10;

  // [run]
  std::uint64_t seed = 1;
  LambdaMode lambda_mode = LambdaMode::fixed;
  double lambda = 0.05;
  std::size_t steps = 1000;
  std::size_t replications = 1000;
  std::size_t trials = 1000;  // bounds-sweep triples / configurations
  std::size_t pairs = 500;    // bounds-sweep Lipschitz pairs
  std::size_t configs = 100;  // gradcheck
  std::size_t rectangles = 50;
  std::size_t probes = 10000;
  std::size_t perturbations = 1000;
  std::string init_mode = "planted";  // planted | random
  std::optional<double> init_bound;   // default: 1 for random mode, n^4 for the filler subnetworks
  std::optional<double> separation;   // planted isolation width, default 1/(n+1)^3
  bool monitors = true;
  std::string estimator = "conditional-mean";  // conditional-mean | zero | network

  // [expect] thresholds the verdicts are judged against
  double gradcheck_tol = 1e-6;
  double final_gap = 1e-3;
  double kappa = 1e-3;
  double min_mean_risk = 0.2;
  double composed_min = 1.0 / 6.0;
  double se_multiple = 3.0;
  std::optional<long long> expect_kn_exponent;
  std::optional<long long> expect_lambda_exponent;
  std::optional<long long> expect_tn_exponent;
  std::optional<long long> expect_Ln_exponent;

  // [output]
  std::string output_dir = "out";

  // provenance
  std::string source_path;
  std::string source_text;
};

struct ConfigResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const noexcept { return config.has_value(); }
};

/// Values that replace config entries (command-line flags).
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> experiment;
  std::optional<std::string> output_dir;
};

namespace detail {

struct Entry {
  std::string value;
  std::size_t line = 0;  // 0 for values injected by overrides
};

using EntryMap = std::map<std::string, Entry>;  // "section.key"

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline const std::map<std::string, std::vector<std::string>>& schema() {
  static const std::map<std::string, std::vector<std::string>> s = {
      {"experiment", {"name"}},
      {"architecture", {"d", "k0", "L", "kn"}},
      {"data", {"generator", "file", "header", "n"}},
      {"run",
       {"seed", "lambda", "steps", "replications", "trials", "pairs", "configs", "rectangles", "probes",
        "perturbations", "init_mode", "init_bound", "separation", "monitors", "estimator"}},
      {"expect",
       {"gradcheck_tol", "final_gap", "kappa", "min_mean_risk", "composed_min", "se_multiple", "kn_exponent",
        "lambda_exponent", "tn_exponent", "Ln_exponent"}},
      {"output", {"dir"}},
  };
  return s;
}

inline void parse_entries(const std::string& text, EntryMap& out, std::vector<std::string>& errors) {
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(fmt::format("line {}: malformed section header '{}'", lineno, line));
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!schema().count(section)) errors.push_back(fmt::format("line {}: unknown section [{}]", lineno, section));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back(fmt::format("line {}: expected 'key = value', got '{}'", lineno, line));
      continue;
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (section.empty()) {
      errors.push_back(fmt::format("line {}: key '{}' appears before any [section]", lineno, key));
      continue;
    }
    const auto sit = schema().find(section);
    if (sit == schema().end()) continue;  // already reported
    if (std::find(sit->second.begin(), sit->second.end(), key) == sit->second.end()) {
      errors.push_back(fmt::format("line {}: unknown key '{}' in [{}]", lineno, key, section));
      continue;
    }
    if (value.empty()) {
      errors.push_back(fmt::format("line {}: key '{}' has an empty value", lineno, key));
      continue;
    }
    const std::string full = section + "." + key;
    if (auto prev = out.find(full); prev != out.end()) {
      errors.push_back(
          fmt::format("line {}: duplicate key '{}' (first set on line {})", lineno, full, prev->second.line));
      continue;
    }
    out.emplace(full, Entry{value, lineno});
  }
}

inline std::string where(const Entry& e) {
  return e.line == 0 ? std::string("command line") : fmt::format("line {}", e.line);
}

static_assert(sizeof(std::size_t) == sizeof(std::uint64_t), "seeds are read through the size_t path");

class Reader {
 public:
  Reader(const EntryMap& m, std::vector<std::string>& errors) : m_(m), errors_(errors) {}

  const Entry* find(const std::string& key) const {
    auto it = m_.find(key);
    return it == m_.end() ? nullptr : &it->second;
  }

  std::string anchor(const std::string& key) const {
    const Entry* e = find(key);
    return e ? where(*e) : std::string("default");
  }

  void get(const std::string& key, std::string& out) const {
    if (const Entry* e = find(key)) out = e->value;
  }

  void get(const std::string& key, std::size_t& out) const {
    const Entry* e = find(key);
    if (!e) return;
    unsigned long long v = 0;
    const auto* first = e->value.data();
    const auto* last = first + e->value.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last)
      errors_.push_back(fmt::format("{}: '{}' expects a non-negative integer, got '{}'", where(*e), key, e->value));
    else
      out = static_cast<std::size_t>(v);
  }

  void get(const std::string& key, long long& out) const {
    const Entry* e = find(key);
    if (!e) return;
    const auto* first = e->value.data();
    const auto* last = first + e->value.size();
    auto [p, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || p != last)
      errors_.push_back(fmt::format("{}: '{}' expects an integer, got '{}'", where(*e), key, e->value));
  }

  void get(const std::string& key, std::optional<long long>& out) const {
    if (!find(key)) return;
    long long v = 0;
    get(key, v);
    out = v;
  }

  void get(const std::string& key, double& out) const {
    const Entry* e = find(key);
    if (!e) return;
    if (!parse_double(e->value, out))
      errors_.push_back(fmt::format("{}: '{}' expects a finite number, got '{}'", where(*e), key, e->value));
  }

  void get(const std::string& key, std::optional<double>& out) const {
    if (!find(key)) return;
    double v = 0.0;
    get(key, v);
    out = v;
  }

  void get(const std::string& key, bool& out) const {
    const Entry* e = find(key);
    if (!e) return;
    if (e->value == "true" || e->value == "yes" || e->value == "1")
      out = true;
    else if (e->value == "false" || e->value == "no" || e->value == "0")
      out = false;
    else
      errors_.push_back(fmt::format("{}: '{}' expects true or false, got '{}'", where(*e), key, e->value));
  }

  static bool parse_double(const std::string& s, double& out) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) return false;
      out = v;
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }

 private:
  const EntryMap& m_;
  std::vector<std::string>& errors_;
};

}  // namespace detail

/// Parses and validates config text. Overrides replace file values before validation.
/// No filesystem side effects.
inline ConfigResult parse_config(const std::string& text, const ConfigOverrides& overrides = {},
                                 const std::string& source_path = {}) {
  ConfigResult res;
  detail::EntryMap entries;
  detail::parse_entries(text, entries, res.errors);
  if (overrides.seed) entries["run.seed"] = {std::to_string(*overrides.seed), 0};
  if (overrides.experiment) entries["experiment.name"] = {*overrides.experiment, 0};
  if (overrides.output_dir) entries["output.dir"] = {*overrides.output_dir, 0};

  ExperimentConfig c;
  c.source_path = source_path;
  c.source_text = text;
  std::vector<std::string>& err = res.errors;
  const detail::Reader r(entries, err);

  r.get("experiment.name", c.experiment);
  r.get("architecture.d", c.arch.d);
  r.get("architecture.k0", c.arch.k0);
  r.get("architecture.L", c.arch.L);
  r.get("architecture.kn", c.arch.kn);
  r.get("data.generator", c.generator);
  r.get("data.file", c.data_file);
  r.get("data.header", c.data_header);
  r.get("data.n", c.n);
  {
    std::size_t seed = c.seed;
    r.get("run.seed", seed);
    c.seed = seed;
  }
  if (const auto* e = r.find("run.lambda")) {
    if (e->value == "smoothness") {
      c.lambda_mode = LambdaMode::smoothness;
    } else {
      r.get("run.lambda", c.lambda);
    }
  }
  r.get("run.steps", c.steps);
  r.get("run.replications", c.replications);
  r.get("run.trials", c.trials);
  r.get("run.pairs", c.pairs);
  r.get("run.configs", c.configs);
  r.get("run.rectangles", c.rectangles);
  r.get("run.probes", c.probes);
  r.get("run.perturbations", c.perturbations);
  r.get("run.init_mode", c.init_mode);
  r.get("run.init_bound", c.init_bound);
  r.get("run.separation", c.separation);
  r.get("run.monitors", c.monitors);
  r.get("run.estimator", c.estimator);
  r.get("expect.gradcheck_tol", c.gradcheck_tol);
  r.get("expect.final_gap", c.final_gap);
  r.get("expect.kappa", c.kappa);
  r.get("expect.min_mean_risk", c.min_mean_risk);
  r.get("expect.composed_min", c.composed_min);
  r.get("expect.se_multiple", c.se_multiple);
  r.get("expect.kn_exponent", c.expect_kn_exponent);
  r.get("expect.lambda_exponent", c.expect_lambda_exponent);
  r.get("expect.tn_exponent", c.expect_tn_exponent);
  r.get("expect.Ln_exponent", c.expect_Ln_exponent);
  r.get("output.dir", c.output_dir);

  // constraints
  if (c.experiment.empty())
    err.push_back("missing [experiment] name");
  else if (!known_experiment(c.experiment))
    err.push_back(fmt::format("{}: unknown experiment '{}'", r.anchor("experiment.name"), c.experiment));

  auto positive = [&](const char* key, std::size_t v) {
    if (v < 1) err.push_back(fmt::format("{}: '{}' must be >= 1", r.anchor(key), key));
  };
  positive("architecture.d", c.arch.d);
  positive("architecture.k0", c.arch.k0);
  positive("architecture.kn", c.arch.kn);
  if (c.arch.L < 2) err.push_back(fmt::format("{}: 'architecture.L' must be >= 2", r.anchor("architecture.L")));
  if (needs_indicator_arch(c.experiment) && c.arch.k0 < 2 * c.arch.d)
    err.push_back(fmt::format("{}: experiment '{}' needs k0 >= 2d (k0={}, d={})", r.anchor("architecture.k0"),
                              c.experiment, c.arch.k0, c.arch.d));

  static const std::array<std::string_view, 4> generators = {"grid", "uniform", "adversarial", "file"};
  if (std::find(generators.begin(), generators.end(), c.generator) == generators.end())
    err.push_back(fmt::format("{}: unknown data generator '{}'", r.anchor("data.generator"), c.generator));
  if (c.generator == "file") {
    if (c.data_file.empty()) {
      err.push_back(fmt::format("{}: generator 'file' needs data.file", r.anchor("data.generator")));
    } else {
      std::filesystem::path p(c.data_file);
      if (p.is_relative() && !source_path.empty()) p = std::filesystem::path(source_path).parent_path() / p;
      if (!std::filesystem::is_regular_file(p))
        err.push_back(fmt::format("{}: data file '{}' does not exist", r.anchor("data.file"), p.string()));
      else
        c.data_file = p.string();
    }
  }
  positive("data.n", c.n);

  if (c.lambda_mode == LambdaMode::fixed && !(c.lambda > 0.0))
    err.push_back(fmt::format("{}: 'run.lambda' must be > 0 or 'smoothness'", r.anchor("run.lambda")));
  positive("run.replications", c.replications);
  positive("run.trials", c.trials);
  positive("run.pairs", c.pairs);
  positive("run.configs", c.configs);
  positive("run.rectangles", c.rectangles);
  positive("run.probes", c.probes);
  positive("run.perturbations", c.perturbations);
  if (c.init_mode != "planted" && c.init_mode != "random")
    err.push_back(fmt::format("{}: init_mode must be 'planted' or 'random'", r.anchor("run.init_mode")));
  if (c.init_bound && !(*c.init_bound > 0.0))
    err.push_back(fmt::format("{}: 'run.init_bound' must be > 0", r.anchor("run.init_bound")));
  if (c.separation && !(*c.separation > 0.0))
    err.push_back(fmt::format("{}: 'run.separation' must be > 0", r.anchor("run.separation")));
  if (c.estimator != "conditional-mean" && c.estimator != "zero" && c.estimator != "network")
    err.push_back(fmt::format("{}: estimator must be conditional-mean, zero or network", r.anchor("run.estimator")));
  const bool samples_own_data = c.experiment == "lower-bound" || c.experiment == "corollary";
  if (samples_own_data && !r.find("data.generator")) c.generator = "adversarial";
  if (samples_own_data && c.generator != "adversarial")
    err.push_back(fmt::format("{}: experiment '{}' samples its own adversarial data", r.anchor("data.generator"),
                              c.experiment));
  if (!(c.gradcheck_tol > 0.0)) err.push_back(fmt::format("{}: gradcheck_tol must be > 0", r.anchor("expect.gradcheck_tol")));
  if (!(c.final_gap >= 0.0)) err.push_back(fmt::format("{}: final_gap must be >= 0", r.anchor("expect.final_gap")));
  if (!(c.kappa >= 0.0)) err.push_back(fmt::format("{}: kappa must be >= 0", r.anchor("expect.kappa")));
  if (!(c.se_multiple > 0.0)) err.push_back(fmt::format("{}: se_multiple must be > 0", r.anchor("expect.se_multiple")));
  if (c.output_dir.empty()) err.push_back("output.dir must not be empty");

  if (err.empty()) res.config = std::move(c);
  return res;
}

/// Reads and validates a config file. A missing output directory is created
/// (with a warning) once the config is otherwise valid.
inline ConfigResult validate_config(const std::string& path, const ConfigOverrides& overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ConfigResult res;
    res.errors.push_back(fmt::format("cannot read config '{}'", path));
    return res;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  ConfigResult res = parse_config(ss.str(), overrides, path);
  if (!res.config) return res;
  const std::filesystem::path out(res.config->output_dir);
  std::error_code ec;
  if (!std::filesystem::exists(out, ec)) {
    std::filesystem::create_directories(out, ec);
    if (ec) {
      res.errors.push_back(fmt::format("cannot create output directory '{}': {}", out.string(), ec.message()));
      res.config.reset();
      return res;
    }
    res.warnings.push_back(fmt::format("output directory '{}' did not exist and was created", out.string()));
  } else if (!std::filesystem::is_directory(out, ec)) {
    res.errors.push_back(fmt::format("output path '{}' exists and is not a directory", out.string()));
    res.config.reset();
  }
  return res;
}

/// Canonical "key = value" dump of every field; parse_config(format_config(c)) reproduces c.
inline std::string format_config(const ExperimentConfig& c) {
  std::string s;
  auto line = [&](std::string_view k, const std::string& v) { s += fmt::format("{} = {}\n", k, v); };
  auto num = [](double v) { return fmt::format("{:.17g}", v); };
  s += "[experiment]\n";
  line("name", c.experiment);
  s += "[architecture]\n";
  line("d", std::to_string(c.arch.d));
  line("k0", std::to_string(c.arch.k0));
  line("L", std::to_string(c.arch.L));
  line("kn", std::to_string(c.arch.kn));
  s += "[data]\n";
  line("generator", c.generator);
  if (!c.data_file.empty()) line("file", c.data_file);
  line("header", c.data_header ? "true" : "false");
  line("n", std::to_string(c.n));
  s += "[run]\n";
  line("seed", std::to_string(c.seed));
  line("lambda", c.lambda_mode == LambdaMode::smoothness ? std::string("smoothness") : num(c.lambda));
  line("steps", std::to_string(c.steps));
  line("replications", std::to_string(c.replications));
  line("trials", std::to_string(c.trials));
  line("pairs", std::to_string(c.pairs));
  line("configs", std::to_string(c.configs));
  line("rectangles", std::to_string(c.rectangles));
  line("probes", std::to_string(c.probes));
  line("perturbations", std::to_string(c.perturbations));
  line("init_mode", c.init_mode);
  if (c.init_bound) line("init_bound", num(*c.init_bound));
  if (c.separation) line("separation", num(*c.separation));
  line("monitors", c.monitors ? "true" : "false");
  line("estimator", c.estimator);
  s += "[expect]\n";
  line("gradcheck_tol", num(c.gradcheck_tol));
  line("final_gap", num(c.final_gap));
  line("kappa", num(c.kappa));
  line("min_mean_risk", num(c.min_mean_risk));
  line("composed_min", num(c.composed_min));
  line("se_multiple", num(c.se_multiple));
  if (c.expect_kn_exponent) line("kn_exponent", std::to_string(*c.expect_kn_exponent));
  if (c.expect_lambda_exponent) line("lambda_exponent", std::to_string(*c.expect_lambda_exponent));
  if (c.expect_tn_exponent) line("tn_exponent", std::to_string(*c.expect_tn_exponent));
  if (c.expect_Ln_exponent) line("Ln_exponent", std::to_string(*c.expect_Ln_exponent));
  s += "[output]\n";
  line("dir", c.output_dir);
  return s;
}

}  // namespace overparam
