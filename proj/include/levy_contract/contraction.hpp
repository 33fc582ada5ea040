#ifndef LEVY_CONTRACT_CONTRACTION_HPP
#define LEVY_CONTRACT_CONTRACTION_HPP

#include "levy_contract/systems.hpp"

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace levy_contract {

using MetricFn = std::function<Matrix(double, const Vector&)>;

/// Tensor grid over [time] x [x_lower, x_upper].
struct SamplingBox {
  Window time{0.0, 0.0};
  Vector x_lower;
  Vector x_upper;
  int time_points = 5;
  int points_per_axis = 21;

  std::vector<double> time_samples() const;
  std::vector<Vector> state_samples() const;
  double spacing() const;
};

/// Eigenvalue extrema and derivative sups of a metric over a sampling box.
///
/// m_prime is the largest Euclidean norm of grad_x M_ij and m_double_prime the
/// largest spectral norm of the Hessian of M_ij, over samples and entries.
struct MetricConstants {
  double m_lower = 1.0;
  double m_upper = 1.0;
  double m_prime = 0.0;
  double m_double_prime = 0.0;
  double grid_spacing = 0.0;
};

struct ContractionCertificate {
  MetricFn metric;
  double alpha = 0.0;
  MetricConstants constants;
  SamplingBox checked_domain;
  bool state_independent = false;
};

/// Constant metric M (e.g. the identity) with exact constants.
ContractionCertificate constant_metric_certificate(const Matrix& m, double alpha);

/// Certificate with constants estimated on the box.
ContractionCertificate make_certificate(MetricFn metric, double alpha, const SamplingBox& box,
                                        bool state_independent = false);

MetricConstants estimate_metric_constants(const MetricFn& metric, const SamplingBox& box,
                                          bool state_independent = false);

enum class MetricDerivative { total, partial };

struct ContractionReport {
  bool passed = false;
  bool structural_failure = false;
  /// Largest eigenvalue of F^T M + M F + Mdot + 2 alpha M over the samples.
  double worst_slack = 0.0;
  double worst_time = 0.0;
  Vector worst_state;
  Vector worst_direction;
  std::size_t samples_checked = 0;
  std::string message;

  std::string to_json() const;
};

ContractionReport check_basic_contraction(const LevySystemModel& model,
                                          const ContractionCertificate& cert,
                                          const SamplingBox& samples, double tol = 1e-8,
                                          MetricDerivative derivative = MetricDerivative::total);

struct RiccatiReport {
  bool passed = false;
  bool structural_failure = false;
  double worst_slack = 0.0;
  double worst_time = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  std::string message;

  std::string to_json() const;
};

/// Checks dP/dt + P A + A^T P + 2 alpha P <= tol I at each time sample.
RiccatiReport check_riccati_tv(const LtvSystemModel& model, const MatrixFn& p_matrix, double alpha,
                               std::span<const double> time_samples, double tol = 1e-8);

struct GivenEnvelope {
  double kappa = 1.0;
  double beta = 1.0;
};

/// Log-grid search over beta then Brent refinement of kappa(beta) * (1 - e^{-beta H}) / beta.
struct OptimizeEnvelope {
  double horizon = 1.0;
  double beta_min = 1e-3;
  double beta_max = 1e2;
  int grid = 200;
};

using EnvelopeStrategy = std::variant<GivenEnvelope, OptimizeEnvelope>;

struct TransitionEnvelope {
  double kappa = 1.0;
  double beta = 1.0;
  /// min over samples of kappa e^{-beta (t - tau)} - ||Phi(t, tau)||.
  double margin = 0.0;
  bool passed = false;
  double worst_tau = 0.0;
  double worst_t = 0.0;
  std::size_t samples = 0;

  std::string to_json() const;
};

/// All (tau, t) pairs with tau <= t on an n-point grid of the window.
std::vector<std::pair<double, double>> envelope_samples(const Window& window, int n);

TransitionEnvelope fit_transition_envelope(const LtvSystemModel& model,
                                           std::span<const std::pair<double, double>> samples,
                                           const EnvelopeStrategy& strategy, double tol = 1e-10);

}  // namespace levy_contract

#endif  // LEVY_CONTRACT_CONTRACTION_HPP
