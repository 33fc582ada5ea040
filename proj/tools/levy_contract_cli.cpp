#include "levy_contract/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <sstream>

using namespace levy_contract;

namespace {

std::pair<std::string, std::vector<double>> parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError({"--sweep: expected PARAM=v1,v2,..., got '" + text + "'"});
  }
  std::vector<double> values;
  std::vector<std::string> problems;
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      problems.push_back("--sweep: '" + item + "' is not a number");
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  return {text.substr(0, eq), values};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic contraction bounds for white, shot and Levy noise, with Monte Carlo audits"};
  std::string config_path, experiment, out, sweep_spec, strategy;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  app.add_option("--config", config_path, "Flat key = value configuration file");
  app.add_option("--experiment", experiment, "Preset: nonlinear_2d, tracking_1d, ltv_2d_diagonal, ltv_2d_triangular, custom");
  auto* seed_opt = app.add_option("--seed", seed, "Base seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--sweep", sweep_spec, "PARAM=v1,v2,... with PARAM in lambda, eta, alpha, condition_number");
  app.add_option("--strategy", strategy, "psi_k strategy: quadrature, mc, loose_first_term, loose_max_nng, loose_sum_exp");
  app.add_option("--paths", paths, "Monte Carlo paths per audit cell");
  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (!experiment.empty()) cfg.experiment = experiment;
    if (*seed_opt) cfg.seed = seed;
    if (!out.empty()) cfg.out = out;
    if (!strategy.empty()) cfg.strategy = strategy;
    if (paths > 0) cfg.n_paths = paths;
    cfg.validate();

    if (!sweep_spec.empty()) {
      const auto [parameter, values] = parse_sweep(sweep_spec);
      const int code = sweep(cfg, parameter, values);
      std::cout << fmt::format("sweep {} over {} values written to {}/sweep.csv (exit {})\n", parameter, values.size(),
                               cfg.out, code);
      return code;
    }
    const ExperimentResult result = run_experiment(cfg);
    std::cout << result.report;
    return result.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return exit_config_error;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return exit_config_error;
  }
}
