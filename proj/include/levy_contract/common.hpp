#ifndef LEVY_CONTRACT_COMMON_HPP
#define LEVY_CONTRACT_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace levy_contract {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Version string stamped into every emitted CSV row.
const char* artifact_version();

/// Closed time interval [start, end] in seconds.
struct Window {
  double start = 0.0;
  double end = 1.0;

  double length() const { return end - start; }
  bool contains(double t) const { return t >= start && t <= end; }
};

/// Rejected input: violated precondition or malformed configuration.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A metric or P(t) that is not symmetric positive definite where sampled.
class StructuralFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical routine stopped short of its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (achieved residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Simulated state norm crossed the configured blow-up threshold.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, double time, double norm)
      : std::runtime_error(what), time_(time), norm_(norm) {}

  double time() const { return time_; }
  double norm() const { return norm_; }

 private:
  double time_;
  double norm_;
};

/// White-noise rate beta_w = 2 alpha - (gamma^2/m_lower)(m' + m''/2) is not positive.
class ContractionMarginError : public std::domain_error {
 public:
  ContractionMarginError(const std::string& what, double margin)
      : std::domain_error(what), margin_(margin) {}

  double margin() const { return margin_; }

 private:
  double margin_;
};

}  // namespace levy_contract

#endif  // LEVY_CONTRACT_COMMON_HPP
