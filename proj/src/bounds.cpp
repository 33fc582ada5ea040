#include "levy_contract/bounds.hpp"

#include "quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace levy_contract {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

}  // namespace

double poisson_prob(double lambda, double s, double t, int k) {
  require(s <= t, "poisson_prob requires s <= t");
  require(k >= 0, "poisson_prob requires k >= 0");
  require(lambda >= 0.0, "poisson_prob requires lambda >= 0");
  const double mean = lambda * (t - s);
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
}

int poisson_truncation(double lambda, double duration) {
  const double mean = lambda * duration;
  return static_cast<int>(std::ceil(mean + 10.0 * std::sqrt(mean) + 10.0));
}

double HFunction::derivative(double t) const {
  if (dh) return dh(t);
  const double step = 1e-6 * (1.0 + std::abs(t));
  return (h(t + step) - h(t - step)) / (2.0 * step);
}

HFunction constant_h(double c) {
  require(c >= 0.0, "h must be nonnegative");
  return {[c](double) { return c; }, [](double) { return 0.0; }, HProvenance::user_supplied};
}

HFunction linear_h(double c0, double c1) {
  return {[c0, c1](double t) { return c0 + c1 * t; }, [c1](double) { return c1; },
          HProvenance::user_supplied};
}

const char* to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::white: return "white";
    case BoundKind::shot: return "shot";
    case BoundKind::levy: return "levy";
    case BoundKind::shot_ltv: return "shot_ltv";
  }
  return "unknown";
}

double BoundParams::ball(double s, double t) const {
  if (kind == BoundKind::white) return kappa(s, t) / (m_lower * beta);
  return kappa(s, t) / m_lower;
}

double BoundParams::rhs(double initial_msq, double s, double t) const {
  return initial_msq * std::exp(-beta * (t - s)) / m_lower + ball(s, t);
}

double white_rate(const ContractionCertificate& cert, double gamma) {
  require(gamma >= 0.0, "gamma must be >= 0");
  const auto& c = cert.constants;
  require(c.m_lower > 0.0, "certificate has m_lower <= 0");
  const double beta = 2.0 * cert.alpha - gamma * gamma / c.m_lower * (c.m_prime + 0.5 * c.m_double_prime);
  if (!(beta > 0.0)) {
    throw ContractionMarginError(
        fmt::format("noise dominates contraction: beta_w = 2 alpha - (gamma^2/m_lower)(m' + m''/2) = {:.6g} <= 0",
                    beta),
        beta);
  }
  return beta;
}

double white_kappa(const ContractionCertificate& cert, double gamma, double beta, double s, double t) {
  const auto& c = cert.constants;
  return gamma * gamma * (c.m_prime + c.m_upper) * (1.0 - std::exp(-beta * (t - s)));
}

double shot_kappa(const HFunction& h, int k, double beta, double s, double t) {
  require(k >= 0, "jump count k must be >= 0");
  require(s <= t, "shot_kappa requires s <= t");
  if (k == 0) return 0.0;
  const double integral = detail::integrate(
      [&](double tau) { return h.derivative(tau) * std::exp(-beta * (t - tau)); }, s, t, "kappa_s integral");
  return k * integral + k * h.value(s) * std::exp(-beta * (t - s));
}

BoundParams white_bound(const ContractionCertificate& cert, double gamma) {
  BoundParams b;
  b.kind = BoundKind::white;
  b.beta = white_rate(cert, gamma);
  b.m_lower = cert.constants.m_lower;
  b.kappa_fn = [cert, gamma, beta = b.beta](double s, double t) { return white_kappa(cert, gamma, beta, s, t); };
  return b;
}

BoundParams shot_bound(const ContractionCertificate& cert, HFunction h, int k) {
  require(cert.alpha > 0.0, "shot bound requires alpha > 0");
  require(k >= 0, "jump count k must be >= 0");
  require(static_cast<bool>(h.h), "shot bound requires h");
  BoundParams b;
  b.kind = BoundKind::shot;
  b.beta = 2.0 * cert.alpha;
  b.m_lower = cert.constants.m_lower;
  b.k = k;
  b.strategy = h.provenance == HProvenance::psi_k_ltv ? "psi_k" : "user_h";
  b.kappa_fn = [h = std::move(h), k, beta = b.beta](double s, double t) { return shot_kappa(h, k, beta, s, t); };
  return b;
}

BoundParams levy_bound(const ContractionCertificate& cert, HFunction h, double gamma, int k) {
  require(k >= 0, "jump count k must be >= 0");
  require(static_cast<bool>(h.h), "Levy bound requires h");
  BoundParams b;
  b.kind = BoundKind::levy;
  b.beta = white_rate(cert, gamma);
  b.m_lower = cert.constants.m_lower;
  b.k = k;
  b.strategy = h.provenance == HProvenance::psi_k_ltv ? "psi_k" : "user_h";
  b.kappa_fn = [cert, h = std::move(h), gamma, k, beta = b.beta](double s, double t) {
    return shot_kappa(h, k, beta, s, t) + white_kappa(cert, gamma, beta, s, t) / beta;
  };
  return b;
}

const char* to_string(TimeLaw law) {
  return law == TimeLaw::gamma_unconditional ? "gamma_unconditional" : "uniform_order_statistics";
}

TimeLaw time_law_from_string(const std::string& name) {
  if (name == "gamma_unconditional" || name == "gamma") return TimeLaw::gamma_unconditional;
  if (name == "uniform_order_statistics" || name == "uniform") return TimeLaw::uniform_order_statistics;
  throw InvalidInput("unknown time law '" + name + "' (allowed: gamma_unconditional, uniform_order_statistics)");
}

void PsiSpec::validate() const {
  require(k >= 0, "psi_k requires k >= 0");
  require(alpha2 > 0.0 && kappa > 0.0 && beta > 0.0, "psi_k requires alpha2, kappa, beta > 0");
  require(eta >= 0.0 && d0 >= 0.0, "psi_k requires eta, d0 >= 0");
  require(lambda > 0.0, "psi_k requires lambda > 0");
  require(window.start <= window.end, "psi_k requires s <= t");
}

const char* to_string(PsiMethod method) {
  switch (method) {
    case PsiMethod::quadrature: return "quadrature";
    case PsiMethod::monte_carlo: return "monte_carlo";
    case PsiMethod::loose_first_term: return "loose_first_term";
    case PsiMethod::loose_max_nng: return "loose_max_nng";
    case PsiMethod::loose_sum_exp: return "loose_sum_exp";
  }
  return "unknown";
}

PsiMethod psi_method_from_string(const std::string& name) {
  if (name == "quadrature") return PsiMethod::quadrature;
  if (name == "mc" || name == "monte_carlo") return PsiMethod::monte_carlo;
  if (name == "loose_first_term") return PsiMethod::loose_first_term;
  if (name == "loose_max_nng") return PsiMethod::loose_max_nng;
  if (name == "loose_sum_exp") return PsiMethod::loose_sum_exp;
  throw InvalidInput("unknown psi strategy '" + name +
                     "' (allowed: quadrature, mc, loose_first_term, loose_max_nng, loose_sum_exp)");
}

// psi_k = sum_{r=1}^{k} (c1 + c2 (k - r)) E[e^{-beta D_r}], where D_r is the gap
// spanned by r consecutive interarrivals: Gamma(r, lambda) under the
// unconditional law, Delta * Beta(r, k - r + 1) under uniform order statistics.
// The first term contributes every T_i - s (r = i) and the pair term every
// T_i - T_j (r = i - j, which occurs k - r times).
struct PsiEvaluator::Impl {
  PsiSpec spec;
  PsiStrategy strategy;
  double c1 = 0.0;
  double c2 = 0.0;
  /// Gamma-law moments E[e^{-beta Gamma(r, lambda)}], r = 1..k.
  std::vector<double> gamma_moments;
  /// Monte Carlo gaps from the window start, n x k, unit window (uniform) or absolute (Gamma).
  Matrix draws;

  bool uniform() const { return spec.time_law == TimeLaw::uniform_order_statistics; }

  double beta_moment(int r, double delta) const {
    const int k = spec.k;
    if (delta == 0.0) return 1.0;
    const double log_norm = std::lgamma(k + 1.0) - std::lgamma(static_cast<double>(r)) - std::lgamma(k - r + 1.0);
    const double b = spec.beta * delta;
    auto density = [&](double x) {
      return std::exp(log_norm - b * x) * std::pow(x, r - 1) * std::pow(1.0 - x, k - r);
    };
    // A fixed Gauss-Legendre rule keeps psi_k smooth in delta, which the
    // finite-difference derivative relies on. The adaptive rule is the fallback.
    const double fine = boost::math::quadrature::gauss<double, 40>::integrate(density, 0.0, 1.0);
    const double coarse = boost::math::quadrature::gauss<double, 30>::integrate(density, 0.0, 1.0);
    if (std::abs(fine - coarse) <= 1e-13 * std::max(1.0, std::abs(fine))) return fine;
    return detail::integrate(density, 0.0, 1.0, "psi_k order-statistics integral");
  }

  double gamma_moment(int r) const {
    const double lam = spec.lambda;
    const double log_norm = r * std::log(lam) - std::lgamma(static_cast<double>(r));
    const double rate = lam + spec.beta;
    return detail::integrate(
        [&](double x) {
          if (x <= 0.0) return r == 1 ? std::exp(log_norm) : 0.0;
          return std::exp(log_norm + (r - 1) * std::log(x) - rate * x);
        },
        0.0, std::numeric_limits<double>::infinity(), "psi_k Gamma integral");
  }

  double moment(int r, double delta) const {
    return uniform() ? beta_moment(r, delta) : gamma_moments[static_cast<std::size_t>(r - 1)];
  }

  double exact_first(double delta) const {
    double sum = 0.0;
    for (int r = 1; r <= spec.k; ++r) sum += moment(r, delta);
    return c1 * sum;
  }

  double exact_second(double delta) const {
    double sum = 0.0;
    for (int r = 1; r < spec.k; ++r) sum += (spec.k - r) * moment(r, delta);
    return c2 * sum;
  }

  double loose_first(double delta) const { return c1 * spec.k * moment(1, delta); }

  double closed_value(double delta) const {
    const int k = spec.k;
    switch (strategy.method) {
      case PsiMethod::quadrature:
        return exact_first(delta) + exact_second(delta);
      case PsiMethod::loose_first_term:
        return loose_first(delta) + exact_second(delta);
      case PsiMethod::loose_max_nng:
        // Each pair gap T_i - T_j dominates the spacing T_{j+1} - T_j, which has the law of T_1 - s.
        return loose_first(delta) + c2 * 0.5 * k * (k - 1) * moment(1, delta);
      case PsiMethod::loose_sum_exp: {
        const double q = moment(1, delta);
        // The inner sum for i = 1 is empty, leaving k - 1 geometric series.
        if (!uniform()) return loose_first(delta) + c2 * (k - 1) * q / (1.0 - q);
        // Under uniform order statistics q -> 1 as the window shrinks, so the
        // inner geometric series is kept finite: sum_{r=1}^{i-1} q^r.
        double second = 0.0;
        for (int r = 1; r < k; ++r) second += (k - r) * std::pow(q, r);
        return loose_first(delta) + c2 * second;
      }
      case PsiMethod::monte_carlo:
        break;
    }
    throw InvalidInput("closed_value called for Monte Carlo");
  }

  double sample_value(Eigen::Index n, double scale) const {
    const int k = spec.k;
    double first = 0.0;
    double second = 0.0;
    for (int i = 0; i < k; ++i) {
      const double ti = draws(n, i) * scale;
      first += std::exp(-spec.beta * ti);
      for (int j = 0; j < i; ++j) second += std::exp(-spec.beta * (ti - draws(n, j) * scale));
    }
    return c1 * first + c2 * second;
  }

  /// Mean and standard error of sum_m weight_m * psi_hat(delta_m) across samples.
  PsiValue mc_combination(std::span<const std::pair<double, double>> terms) const {
    const Eigen::Index n = draws.rows();
    double mean = 0.0;
    double m2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double y = 0.0;
      for (const auto& [delta, weight] : terms) y += weight * sample_value(i, uniform() ? delta : 1.0);
      const double d = y - mean;
      mean += d / static_cast<double>(i + 1);
      m2 += d * (y - mean);
    }
    const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n)), false};
  }

  PsiValue combination(std::span<const std::pair<double, double>> terms) const {
    if (strategy.method == PsiMethod::monte_carlo) return mc_combination(terms);
    double v = 0.0;
    for (const auto& [delta, weight] : terms) v += weight * closed_value(delta);
    return {v, 0.0, strategy.method != PsiMethod::quadrature};
  }
};

PsiEvaluator::PsiEvaluator(const PsiSpec& spec, const PsiStrategy& strategy) : impl_(std::make_unique<Impl>()) {
  spec.validate();
  impl_->spec = spec;
  impl_->strategy = strategy;
  impl_->c1 = 2.0 * spec.alpha2 * spec.eta * spec.kappa * spec.d0;
  impl_->c2 = 2.0 * spec.alpha2 * spec.kappa * spec.eta * spec.eta;
  const int k = spec.k;
  if (k == 0) return;
  if (strategy.method == PsiMethod::monte_carlo) {
    require(strategy.samples >= 1000, "Monte Carlo psi_k needs at least 1000 samples");
    RandomStream stream(strategy.seed, strategy.stream_id, 4);
    impl_->draws.resize(static_cast<Eigen::Index>(strategy.samples), k);
    for (Eigen::Index n = 0; n < impl_->draws.rows(); ++n) {
      if (impl_->uniform()) {
        const auto times = sample_conditional_times(stream, k, Window{0.0, 1.0});
        for (int i = 0; i < k; ++i) impl_->draws(n, i) = times[static_cast<std::size_t>(i)];
      } else {
        double t = 0.0;
        for (int i = 0; i < k; ++i) impl_->draws(n, i) = (t += stream.exponential(spec.lambda));
      }
    }
  } else if (!impl_->uniform()) {
    for (int r = 1; r <= k; ++r) impl_->gamma_moments.push_back(impl_->gamma_moment(r));
  }
}

PsiEvaluator::~PsiEvaluator() = default;
PsiEvaluator::PsiEvaluator(PsiEvaluator&&) noexcept = default;
PsiEvaluator& PsiEvaluator::operator=(PsiEvaluator&&) noexcept = default;

const PsiSpec& PsiEvaluator::spec() const { return impl_->spec; }
const PsiStrategy& PsiEvaluator::strategy() const { return impl_->strategy; }

PsiValue PsiEvaluator::value(double tau) const {
  const auto& spec = impl_->spec;
  require(tau >= spec.window.start, "psi_k evaluated before the window start");
  const bool loose = impl_->strategy.method != PsiMethod::quadrature &&
                     impl_->strategy.method != PsiMethod::monte_carlo;
  if (spec.k == 0) return {0.0, 0.0, loose};
  const std::pair<double, double> term{tau - spec.window.start, 1.0};
  return impl_->combination(std::span(&term, 1));
}

PsiValue PsiEvaluator::derivative(double tau) const {
  const auto& spec = impl_->spec;
  require(tau >= spec.window.start, "psi_k derivative evaluated before the window start");
  const bool loose = impl_->strategy.method != PsiMethod::quadrature &&
                     impl_->strategy.method != PsiMethod::monte_carlo;
  if (spec.k == 0 || !impl_->uniform()) return {0.0, 0.0, loose};
  const double length = spec.window.length() > 0.0 ? spec.window.length() : 1.0;
  const double h = 1e-3 * length;
  const double delta = tau - spec.window.start;
  // psi_k extends analytically to delta < 0 (e^{-beta delta B} stays finite),
  // so the central stencil is used right up to the window start.
  const std::pair<double, double> terms[] = {{delta + h, 0.5 / h}, {delta - h, -0.5 / h}};
  return impl_->combination(terms);
}

PsiValue psi_k(const PsiSpec& spec, const PsiStrategy& strategy) {
  return PsiEvaluator(spec, strategy).value(spec.window.end);
}

HFunction psi_h_function(const PsiSpec& spec, const PsiStrategy& strategy) {
  auto evaluator = std::make_shared<PsiEvaluator>(spec, strategy);
  HFunction h;
  h.h = [evaluator](double tau) { return evaluator->value(tau).value; };
  h.dh = [evaluator](double tau) { return evaluator->derivative(tau).value; };
  h.provenance = HProvenance::psi_k_ltv;
  return h;
}

BoundParams shot_ltv_bound(const RiccatiConstants& riccati, const TransitionEnvelope& envelope, PsiSpec spec,
                           const PsiStrategy& strategy) {
  require(riccati.alpha > 0.0, "LTV shot bound requires alpha > 0");
  require(riccati.alpha1 > 0.0 && riccati.alpha2 >= riccati.alpha1, "LTV shot bound requires 0 < alpha1 <= alpha2");
  require(envelope.kappa > 0.0 && envelope.beta > 0.0, "LTV shot bound requires a valid transition envelope");
  spec.kappa = envelope.kappa;
  spec.beta = envelope.beta;
  spec.alpha2 = riccati.alpha2;
  spec.validate();

  BoundParams b;
  b.kind = BoundKind::shot_ltv;
  b.beta = 2.0 * riccati.alpha;
  b.m_lower = riccati.alpha1;
  b.k = spec.k;
  b.strategy = fmt::format("{}/{}", to_string(strategy.method), to_string(spec.time_law));
  if (!envelope.passed) b.warnings.push_back("transition envelope did not verify on its samples");

  auto evaluator = std::make_shared<PsiEvaluator>(spec, strategy);
  const double jump_term = spec.k * spec.alpha2 * spec.eta * spec.eta;
  auto kappa = [evaluator, spec, strategy, jump_term, beta = b.beta](double s, double t) {
    require(s <= t, "kappa_s requires s <= t");
    const PsiEvaluator* ev = evaluator.get();
    std::unique_ptr<PsiEvaluator> local;
    if (s != spec.window.start) {
      PsiSpec shifted = spec;
      shifted.window = Window{s, s + spec.window.length()};
      local = std::make_unique<PsiEvaluator>(shifted, strategy);
      ev = local.get();
    }
    double integral = 0.0;
    if (spec.k > 0 && spec.time_law == TimeLaw::uniform_order_statistics && t > s) {
      integral = detail::integrate(
          [&](double tau) { return ev->derivative(tau).value * std::exp(-beta * (t - tau)); }, s, t,
          "LTV kappa_s integral");
    }
    return integral + jump_term * std::exp(-beta * (t - s));
  };
  b.kappa_fn = kappa;

  const double s = spec.window.start;
  const double t = spec.window.end;
  if (strategy.method == PsiMethod::monte_carlo && spec.k > 0 && spec.time_law == TimeLaw::uniform_order_statistics &&
      t > s) {
    b.std_err = detail::integrate(
        [&](double tau) { return evaluator->derivative(tau).std_err * std::exp(-b.beta * (t - tau)); }, s, t,
        "LTV kappa_s standard error");
  }
  if (spec.k > 0 && t > s) {
    const PsiValue slope = evaluator->derivative(t);
    if (slope.value < -(3.0 * slope.std_err + 1e-9)) {
      b.warnings.push_back(fmt::format("d psi_k/d tau = {:.6g} < 0 at t = {:.6g}", slope.value, t));
    }
    const double k_val = kappa(s, t);
    if (k_val < 0.0) b.warnings.push_back(fmt::format("kappa_s = {:.6g} is negative on [{:.6g}, {:.6g}]", k_val, s, t));
  }
  return b;
}

double comparison_rhs(double y0, double zeta, double mu, const HFunction& theta, double t) {
  require(mu > 0.0, "comparison_rhs requires mu > 0");
  require(zeta > 0.0, "comparison_rhs requires zeta > 0");
  require(t >= 0.0, "comparison_rhs requires t >= 0");
  require(std::abs(theta.value(0.0) - zeta) <= 1e-9 * (1.0 + std::abs(zeta)), "comparison_rhs requires theta(0) = zeta");
  const double decay = std::exp(-mu * t);
  const double integral = detail::integrate(
      [&](double s) { return theta.derivative(s) * std::exp(-mu * (t - s)); }, 0.0, t, "comparison integral");
  return integral + (zeta + y0) * decay;
}

BoundRow bound_row(const BoundParams& bound, double initial_msq, double s, double t) {
  return {bound.kind, bound.k, s, t, bound.beta, bound.kappa(s, t), bound.rhs(initial_msq, s, t), bound.strategy,
          bound.std_err};
}

void write_bounds_csv(std::ostream& out, std::span<const BoundRow> rows, const std::string& experiment,
                      std::uint64_t seed, bool header) {
  if (header) out << "experiment,seed,version,kind,k,s,t,beta,kappa,rhs_total,strategy,std_err\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g}\n", experiment, seed,
                       artifact_version(), to_string(r.kind), r.k, r.s, r.t, r.beta, r.kappa, r.rhs_total, r.strategy,
                       r.std_err);
  }
}

}  // namespace levy_contract
