// overparam: run one named experiment from a config file.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "overparam/overparam.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Run an over-parametrized network experiment"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> experiment;
  bool quiet = false;
  app.add_option("--config", config_path, "experiment config file")->required();
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out, "override the output directory");
  app.add_option("--experiment", experiment, "override the experiment name");
  app.add_flag("--quiet", quiet, "print only warnings and errors");
  CLI11_PARSE(app, argc, argv);

  overparam::ConfigOverrides ov;
  ov.seed = seed;
  ov.output_dir = out;
  ov.experiment = experiment;
  const auto parsed = overparam::validate_config(config_path, ov);
  for (const auto& w : parsed.warnings) fmt::print(stderr, "warning: {}\n", w);
  if (!parsed.ok()) {
    for (const auto& e : parsed.errors) fmt::print(stderr, "{}: {}\n", config_path, e);
    return 2;
  }
  const auto& cfg = *parsed.config;

  try {
    const auto res = overparam::run_experiment(cfg);
    if (!quiet) {
      for (const auto& [k, v] : res.results) fmt::print("{} = {}\n", k, v);
      for (const auto& v : res.verdicts)
        fmt::print("{} {}{}\n", v.pass ? "PASS" : "FAIL", v.name, v.detail.empty() ? "" : " (" + v.detail + ")");
      fmt::print("wrote {} files to {}\n", res.files.size(), cfg.output_dir);
    }
    return res.exit_code();
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 3;
  }
}
