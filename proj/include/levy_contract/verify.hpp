#ifndef LEVY_CONTRACT_VERIFY_HPP
#define LEVY_CONTRACT_VERIFY_HPP

#include "levy_contract/bounds.hpp"
#include "levy_contract/simulate.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace levy_contract {

enum class CiMethod { normal, bootstrap, degenerate };

struct EstimateOptions {
  /// Strata smaller than this are flagged low_confidence.
  std::size_t floor = 200;
  /// Percentile bootstrap replaces the normal interval below this sample size.
  std::size_t bootstrap_below = 1000;
  int bootstrap_resamples = 1000;
  std::uint64_t bootstrap_seed = 0;
};

/// Empirical E_k||y(t) - x(t)||^2 with a 95% interval.
struct ConditionalMseEstimate {
  int k = 0;
  double t = 0.0;
  std::size_t n_paths = 0;
  double mse = 0.0;
  double std_err = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  CiMethod ci_method = CiMethod::normal;
  bool low_confidence = false;
  /// No path in the stratum; mse and the interval are NaN.
  bool insufficient = false;
  double bound_rhs = std::numeric_limits<double>::quiet_NaN();
  /// bound_rhs - ci_high.
  double margin = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and 95% interval of squared deviations.
ConditionalMseEstimate summarize_squares(std::span<const double> squares, const EstimateOptions& options = {});

/// Conditional ensembles keep every path (the conditioning is on the ensemble
/// window); unconditional ensembles are stratified by the jump count in
/// (window start, t] separately for every evaluation time.
std::vector<ConditionalMseEstimate> estimate_conditional_mse(const PairedEnsemble& ensemble, int k,
                                                             std::span<const double> eval_times,
                                                             const EstimateOptions& options = {});

/// Builds the bound audited for jump count k.
using BoundFactory = std::function<BoundParams(int k)>;

struct AuditConfig {
  std::vector<int> k_values{0};
  /// Grid times, all strictly after horizon start s.
  std::vector<double> times;
  double s = 0.0;
  std::size_t n_paths = 200;
  std::uint64_t seed = 0;
  double dt = 5e-3;
  InitLaw init = MatchedInit{Vector::Zero(1)};
  /// Exceedance beyond this many standard errors is a hard violation.
  double hard_sigma = 3.0;
  EstimateOptions estimate;
  std::string model_id;
};

struct AuditReport {
  std::vector<ConditionalMseEstimate> cells;
  /// Indices into cells with margin < 0.
  std::vector<std::size_t> violations;
  /// Indices into cells with mse - bound_rhs > hard_sigma * std_err.
  std::vector<std::size_t> hard_violations;
  std::uint64_t seed = 0;
  std::string model_id;
  BoundKind kind = BoundKind::white;
  std::string strategy;
  std::vector<std::string> warnings;

  bool passed() const { return hard_violations.empty(); }
  std::string summary() const;
};

/// Audits white, shot and Levy bounds. Models without jumps are audited at
/// k = 0 only; jump models use one conditional ensemble per (k, t) on [s, t].
AuditReport audit_bound(const LevySystemModel& model, const BoundFactory& bound, const AuditConfig& config);

/// Audits the LTV shot bound on the model's jump-driven paths.
AuditReport audit_bound(const LtvSystemModel& model, const BoundFactory& bound, const AuditConfig& config);

struct DecayReport {
  bool passed = true;
  /// Largest ||x2 - x1|| / (sqrt(m_upper/m_lower) ||x2(0) - x1(0)|| e^{-alpha (t - s)}).
  double worst_ratio = 0.0;
  double worst_time = 0.0;
  std::size_t worst_pair = 0;
  std::size_t points_checked = 0;
  std::string message;
};

/// Checks the incremental-stability envelope on nominal trajectories.
DecayReport check_incremental_decay(const LevySystemModel& model, const ContractionCertificate& cert,
                                    std::span<const std::pair<Vector, Vector>> initial_pairs,
                                    const Window& horizon, double dt = 1e-3, double tol = 1e-6);

/// Columns: experiment,seed,version,k,t,n,mse,ci_low,ci_high,bound_rhs,margin.
void write_audit_csv(std::ostream& out, const AuditReport& report, const std::string& experiment,
                     bool header = true);

/// Columns: experiment,seed,version,k,count,E_k_mse,ci_low,ci_high.
void write_ensemble_summary_csv(std::ostream& out, std::span<const ConditionalMseEstimate> estimates,
                                const std::string& experiment, std::uint64_t seed);

}  // namespace levy_contract

#endif  // LEVY_CONTRACT_VERIFY_HPP
