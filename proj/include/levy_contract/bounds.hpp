#ifndef LEVY_CONTRACT_BOUNDS_HPP
#define LEVY_CONTRACT_BOUNDS_HPP

#include "levy_contract/contraction.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace levy_contract {

/// P(N(t) - N(s) = k) for a rate-lambda Poisson process, evaluated in log space.
double poisson_prob(double lambda, double s, double t, int k);

/// Truncation index ceil(lambda D + 10 sqrt(lambda D) + 10) beyond which the
/// remaining Poisson mass is below 1e-10 for the intensities used here.
int poisson_truncation(double lambda, double duration);

enum class HProvenance { user_supplied, psi_k_ltv };

/// Deterministic, nonnegative, continuously differentiable h(t) bounding the
/// one-jump growth of the Lyapunov function.
struct HFunction {
  std::function<double(double)> h;
  /// Optional analytic derivative; central differences are used otherwise.
  std::function<double(double)> dh;
  HProvenance provenance = HProvenance::user_supplied;

  double value(double t) const { return h(t); }
  double derivative(double t) const;
};

HFunction constant_h(double c);
HFunction linear_h(double c0, double c1);

enum class BoundKind { white, shot, levy, shot_ltv };

const char* to_string(BoundKind kind);

/// One theorem instance: E_k||y(t) - x(t)||^2 <= msq(s) e^{-beta (t-s)} / m_lower + ball(s, t).
struct BoundParams {
  BoundKind kind = BoundKind::white;
  double beta = 0.0;
  /// Error-ball term kappa(beta, s, t) of the theorem.
  std::function<double(double, double)> kappa_fn;
  double m_lower = 1.0;
  int k = 0;
  std::string strategy = "exact";
  /// Monte Carlo standard error carried into kappa (zero for deterministic strategies).
  double std_err = 0.0;
  std::vector<std::string> warnings;

  double kappa(double s, double t) const { return kappa_fn(s, t); }
  /// Second RHS term: kappa / (m_lower beta) for white noise, kappa / m_lower otherwise.
  double ball(double s, double t) const;
  double rhs(double initial_msq, double s, double t) const;
};

/// Throws ContractionMarginError when beta_w <= 0.
double white_rate(const ContractionCertificate& cert, double gamma);
double white_kappa(const ContractionCertificate& cert, double gamma, double beta, double s, double t);

/// k int_{s}^{t} h'(tau) e^{-beta (t - tau)} dtau + k h(s) e^{-beta (t - s)}.
double shot_kappa(const HFunction& h, int k, double beta, double s, double t);

BoundParams white_bound(const ContractionCertificate& cert, double gamma);
BoundParams shot_bound(const ContractionCertificate& cert, HFunction h, int k);
BoundParams levy_bound(const ContractionCertificate& cert, HFunction h, double gamma, int k);

enum class TimeLaw { gamma_unconditional, uniform_order_statistics };

const char* to_string(TimeLaw law);
TimeLaw time_law_from_string(const std::string& name);

/// Parameters of psi_k(s, t). kappa and beta are the transition-matrix
/// envelope constants and d0 is the first moment E_k||y(s) - x(s)||.
struct PsiSpec {
  double alpha2 = 1.0;
  double eta = 1.0;
  double kappa = 1.0;
  double beta = 1.0;
  double lambda = 1.0;
  double d0 = 0.0;
  int k = 0;
  Window window{0.0, 1.0};
  TimeLaw time_law = TimeLaw::uniform_order_statistics;

  void validate() const;
};

enum class PsiMethod { quadrature, monte_carlo, loose_first_term, loose_max_nng, loose_sum_exp };

const char* to_string(PsiMethod method);
/// Accepts the method names above plus "mc".
PsiMethod psi_method_from_string(const std::string& name);

struct PsiStrategy {
  PsiMethod method = PsiMethod::quadrature;
  /// Monte Carlo sample count (at least 1000).
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

struct PsiValue {
  double value = 0.0;
  double std_err = 0.0;
  /// True for the loose relaxations, which bound psi_k from above.
  bool is_upper_bound = false;
};

/// psi_k(s, tau) as a function of the window end tau, with derivative.
///
/// Monte Carlo draws are made once on the unit window and rescaled, so values
/// at different tau share random numbers. Under the Gamma law psi_k does not
/// depend on tau.
class PsiEvaluator {
 public:
  PsiEvaluator(const PsiSpec& spec, const PsiStrategy& strategy);
  ~PsiEvaluator();
  PsiEvaluator(PsiEvaluator&&) noexcept;
  PsiEvaluator& operator=(PsiEvaluator&&) noexcept;

  const PsiSpec& spec() const;
  const PsiStrategy& strategy() const;

  PsiValue value(double tau) const;
  /// d psi_k(s, tau) / d tau: analytic where psi_k is constant in tau, else
  /// central differences with step 1e-3 (t - s).
  PsiValue derivative(double tau) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

PsiValue psi_k(const PsiSpec& spec, const PsiStrategy& strategy = {});

/// h(tau) = psi_k(s, tau) for use with shot_bound and levy_bound.
HFunction psi_h_function(const PsiSpec& spec, const PsiStrategy& strategy = {});

struct RiccatiConstants {
  double alpha = 0.0;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
};

/// LTV shot bound: beta_s = 2 alpha and
/// kappa_s = int_{s+}^{t} psi_k'(s, tau) e^{-beta_s (t - tau)} dtau + k alpha2 eta^2 e^{-beta_s (t - s)}.
/// The envelope and Riccati constants overwrite kappa, beta and alpha2 in spec.
BoundParams shot_ltv_bound(const RiccatiConstants& riccati, const TransitionEnvelope& envelope,
                           PsiSpec spec, const PsiStrategy& strategy = {});

/// y0 e^{-mu t} + zeta e^{-mu t} + int_0^t theta'(s) e^{-mu (t - s)} ds.
double comparison_rhs(double y0, double zeta, double mu, const HFunction& theta, double t);

struct BoundRow {
  BoundKind kind = BoundKind::white;
  int k = 0;
  double s = 0.0;
  double t = 0.0;
  double beta = 0.0;
  double kappa = 0.0;
  double rhs_total = 0.0;
  std::string strategy;
  double std_err = 0.0;
};

BoundRow bound_row(const BoundParams& bound, double initial_msq, double s, double t);

/// Columns: experiment,seed,version,kind,k,s,t,beta,kappa,rhs_total,strategy,std_err.
void write_bounds_csv(std::ostream& out, std::span<const BoundRow> rows, const std::string& experiment,
                      std::uint64_t seed, bool header = true);

}  // namespace levy_contract

#endif  // LEVY_CONTRACT_BOUNDS_HPP
