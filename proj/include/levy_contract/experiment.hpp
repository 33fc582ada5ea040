#ifndef LEVY_CONTRACT_EXPERIMENT_HPP
#define LEVY_CONTRACT_EXPERIMENT_HPP

#include "levy_contract/verify.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace levy_contract {

/// Configuration problems, all of them, one per line.
class ConfigError : public InvalidInput {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
  std::string experiment = "ltv_2d_diagonal";
  std::uint64_t seed = 1;
  std::string out = "out";
  std::size_t n_paths = 200;
  std::vector<int> k_values{0, 1, 2, 3};
  double dt = 5e-3;
  double s = 0.0;
  double t_end = 2.0;
  int grid_points = 10;
  std::string strategy = "quadrature";
  TimeLaw time_law = TimeLaw::uniform_order_statistics;
  std::size_t mc_samples = 100000;
  /// Preset noise overrides.
  std::optional<double> lambda;
  std::optional<double> eta;
  std::optional<double> gamma;
  std::optional<std::string> mark_law;
  /// Overrides the preset contraction rate claimed by the certificate.
  std::optional<double> alpha;
  /// Multiplies the claimed rate (certificate and bound).
  double alpha_scale = 1.0;
  /// Multiplies eta inside the bound only.
  double eta_scale = 1.0;
  /// LTV presets use P = diag(1, condition_number).
  double condition_number = 1.0;
  /// Decay rate of the custom scalar system.
  double a = 1.0;
  std::size_t sample_paths = 5;
  double hard_sigma = 3.0;

  /// Throws ConfigError listing every problem.
  void validate() const;
  /// Flat key = value text that parses back to this configuration.
  std::string to_ini() const;
};

/// Parses flat `key = value` text; unknown keys and bad values are all reported.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::filesystem::path& path);
/// Applies one `key=value` assignment, e.g. from a sweep.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

enum ExitCode : int { exit_ok = 0, exit_config_error = 1, exit_hard_violation = 2, exit_certification_failure = 3 };

struct ExperimentResult {
  int exit_code = exit_ok;
  bool certified = false;
  std::string certification;
  std::vector<BoundRow> bounds;
  AuditReport audit;
  std::vector<ConditionalMseEstimate> ensemble_summary;
  std::string report;
  double alpha = 0.0;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double lambda = 0.0;
  double eta = 0.0;
};

/// Grid of grid_points times in (s, t_end].
std::vector<double> audit_times(const ExperimentConfig& cfg);

/// certify -> bound -> simulate -> audit, without touching the filesystem.
ExperimentResult evaluate_experiment(const ExperimentConfig& cfg);

/// evaluate_experiment plus paths.csv, bounds.csv, audit.csv,
/// ensemble_summary.csv, config.ini and report.txt in cfg.out.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// One row per (value, k) at t_end, written to <out>/sweep.csv. Returns the
/// worst exit code over the values.
int sweep(const ExperimentConfig& cfg, const std::string& parameter, const std::vector<double>& values);

}  // namespace levy_contract

#endif  // LEVY_CONTRACT_EXPERIMENT_HPP
