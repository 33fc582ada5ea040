#include "levy_contract/contraction.hpp"

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace levy_contract {

namespace {

constexpr double kMetricStep = 1e-4;

std::vector<double> linspace(double a, double b, int n) {
  if (n <= 1 || a == b) return {a};
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return v;
}

Matrix jacobian_fd(const DriftFn& f, double t, const Vector& x) {
  const double h = 1e-5 * (1.0 + x.norm());
  const Eigen::Index n = x.size();
  Matrix jac(n, n);
  Vector xp = x, xm = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    jac.col(j) = (f(t, xp) - f(t, xm)) / (2.0 * h);
    xp[j] = xm[j] = x[j];
  }
  return jac;
}

/// Empty string when M is symmetric positive definite, else the reason.
std::string structural_problem(const Matrix& m) {
  if (m.rows() != m.cols()) return "metric is not square";
  const double asym = (m - m.transpose()).norm();
  if (asym > 1e-10 * (1.0 + m.norm())) return fmt::format("metric not symmetric (||M - M^T|| = {:.3g})", asym);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    return fmt::format("metric not positive definite (lambda_min = {:.6g})", es.eigenvalues().minCoeff());
  }
  return {};
}

std::vector<double> as_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::vector<double> SamplingBox::time_samples() const {
  return linspace(time.start, time.end, time_points);
}

std::vector<Vector> SamplingBox::state_samples() const {
  if (x_lower.size() == 0 || x_lower.size() != x_upper.size()) {
    throw InvalidInput("sampling box bounds must be nonempty and of equal dimension");
  }
  const Eigen::Index n = x_lower.size();
  std::vector<std::vector<double>> axes;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x_lower[i] > x_upper[i]) throw InvalidInput("sampling box has lower > upper");
    axes.push_back(linspace(x_lower[i], x_upper[i], points_per_axis));
  }
  std::vector<Vector> out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    out.push_back(std::move(x));
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == axes[d].size()) idx[d++] = 0;
    if (d == idx.size()) break;
  }
  return out;
}

double SamplingBox::spacing() const {
  if (points_per_axis <= 1 || x_lower.size() == 0) return 0.0;
  return (x_upper - x_lower).maxCoeff() / (points_per_axis - 1);
}

ContractionCertificate constant_metric_certificate(const Matrix& m, double alpha) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  ContractionCertificate cert;
  cert.metric = [m](double, const Vector&) { return m; };
  cert.alpha = alpha;
  cert.constants.m_lower = es.eigenvalues().minCoeff();
  cert.constants.m_upper = es.eigenvalues().maxCoeff();
  cert.state_independent = true;
  cert.checked_domain.x_lower = Vector::Zero(m.rows());
  cert.checked_domain.x_upper = Vector::Zero(m.rows());
  return cert;
}

ContractionCertificate make_certificate(MetricFn metric, double alpha, const SamplingBox& box,
                                        bool state_independent) {
  ContractionCertificate cert;
  cert.constants = estimate_metric_constants(metric, box, state_independent);
  cert.metric = std::move(metric);
  cert.alpha = alpha;
  cert.checked_domain = box;
  cert.state_independent = state_independent;
  return cert;
}

MetricConstants estimate_metric_constants(const MetricFn& metric, const SamplingBox& box,
                                          bool state_independent) {
  MetricConstants c;
  c.m_lower = std::numeric_limits<double>::infinity();
  c.m_upper = 0.0;
  c.grid_spacing = box.spacing();
  const double h = kMetricStep;
  for (double t : box.time_samples()) {
    for (const Vector& x : box.state_samples()) {
      const Matrix m = metric(t, x);
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
      c.m_lower = std::min(c.m_lower, es.eigenvalues().minCoeff());
      c.m_upper = std::max(c.m_upper, es.eigenvalues().maxCoeff());
      if (state_independent) continue;

      const Eigen::Index n = x.size();
      const Eigen::Index r = m.rows();
      std::vector<Matrix> grad(static_cast<std::size_t>(n));
      std::vector<Matrix> hess(static_cast<std::size_t>(n * n));
      for (Eigen::Index k = 0; k < n; ++k) {
        Vector xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const Matrix mp = metric(t, xp), mm = metric(t, xm);
        grad[static_cast<std::size_t>(k)] = (mp - mm) / (2.0 * h);
        hess[static_cast<std::size_t>(k * n + k)] = (mp - 2.0 * m + mm) / (h * h);
        for (Eigen::Index l = k + 1; l < n; ++l) {
          Vector pp = x, pm = x, mp2 = x, mm2 = x;
          pp[k] += h; pp[l] += h;
          pm[k] += h; pm[l] -= h;
          mp2[k] -= h; mp2[l] += h;
          mm2[k] -= h; mm2[l] -= h;
          const Matrix mixed =
              (metric(t, pp) - metric(t, pm) - metric(t, mp2) + metric(t, mm2)) / (4.0 * h * h);
          hess[static_cast<std::size_t>(k * n + l)] = mixed;
          hess[static_cast<std::size_t>(l * n + k)] = mixed;
        }
      }
      for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < r; ++j) {
          Vector g(n);
          Matrix hm(n, n);
          for (Eigen::Index k = 0; k < n; ++k) {
            g[k] = grad[static_cast<std::size_t>(k)](i, j);
            for (Eigen::Index l = 0; l < n; ++l) hm(k, l) = hess[static_cast<std::size_t>(k * n + l)](i, j);
          }
          c.m_prime = std::max(c.m_prime, g.norm());
          Eigen::SelfAdjointEigenSolver<Matrix> hs(0.5 * (hm + hm.transpose()), Eigen::EigenvaluesOnly);
          c.m_double_prime = std::max(c.m_double_prime, hs.eigenvalues().cwiseAbs().maxCoeff());
        }
      }
    }
  }
  return c;
}

ContractionReport check_basic_contraction(const LevySystemModel& model,
                                          const ContractionCertificate& cert,
                                          const SamplingBox& samples, double tol,
                                          MetricDerivative derivative) {
  ContractionReport report;
  report.worst_slack = -std::numeric_limits<double>::infinity();
  const double h = kMetricStep;
  const bool total = derivative == MetricDerivative::total && !cert.state_independent;

  for (double t : samples.time_samples()) {
    for (const Vector& x : samples.state_samples()) {
      if (x.size() != model.dim) throw InvalidInput("sampling box dimension does not match the model");
      const Matrix m = cert.metric(t, x);
      if (auto problem = structural_problem(m); !problem.empty()) {
        report.passed = false;
        report.structural_failure = true;
        report.worst_time = t;
        report.worst_state = x;
        report.message = "structural failure: " + problem;
        return report;
      }
      const Matrix f_jac = jacobian_fd(model.drift, t, x);
      Matrix m_dot = (cert.metric(t + h, x) - cert.metric(t - h, x)) / (2.0 * h);
      if (total) {
        const Vector f = model.drift(t, x);
        Vector xp = x, xm = x;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          xp[i] = x[i] + h;
          xm[i] = x[i] - h;
          m_dot += (cert.metric(t, xp) - cert.metric(t, xm)) / (2.0 * h) * f[i];
          xp[i] = xm[i] = x[i];
        }
      }
      const Matrix lhs = f_jac.transpose() * m + m * f_jac + m_dot + 2.0 * cert.alpha * m;
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (lhs + lhs.transpose()));
      const Eigen::Index top = lhs.rows() - 1;
      const double slack = es.eigenvalues()[top];
      ++report.samples_checked;
      if (slack > report.worst_slack) {
        report.worst_slack = slack;
        report.worst_time = t;
        report.worst_state = x;
        report.worst_direction = es.eigenvectors().col(top);
      }
    }
  }
  report.passed = report.worst_slack <= tol;
  report.message = report.passed
                       ? fmt::format("contraction condition holds (worst eigenvalue {:.6g})", report.worst_slack)
                       : fmt::format("contraction condition violated: eigenvalue {:.6g} > tol {:.3g} at t = {:.6g}",
                                     report.worst_slack, tol, report.worst_time);
  return report;
}

std::string ContractionReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed;
  j["structural_failure"] = structural_failure;
  j["worst_slack"] = worst_slack;
  j["worst_time"] = worst_time;
  j["worst_state"] = as_vector(worst_state);
  j["worst_direction"] = as_vector(worst_direction);
  j["samples_checked"] = samples_checked;
  j["message"] = message;
  return j.dump(2);
}

RiccatiReport check_riccati_tv(const LtvSystemModel& model, const MatrixFn& p_matrix, double alpha,
                               std::span<const double> time_samples, double tol) {
  RiccatiReport report;
  if (time_samples.empty()) throw InvalidInput("check_riccati_tv needs at least one time sample");
  report.worst_slack = -std::numeric_limits<double>::infinity();
  report.alpha1 = std::numeric_limits<double>::infinity();
  report.alpha2 = 0.0;
  const double h = kMetricStep;
  for (double t : time_samples) {
    const Matrix p = p_matrix(t);
    if (auto problem = structural_problem(p); !problem.empty()) {
      report.passed = false;
      report.structural_failure = true;
      report.worst_time = t;
      report.message = "structural failure: P(t) " + problem.substr(problem.find(' ') + 1);
      return report;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> ps(p, Eigen::EigenvaluesOnly);
    report.alpha1 = std::min(report.alpha1, ps.eigenvalues().minCoeff());
    report.alpha2 = std::max(report.alpha2, ps.eigenvalues().maxCoeff());

    const Matrix a = model.a_matrix(t);
    const Matrix dp = (p_matrix(t + h) - p_matrix(t - h)) / (2.0 * h);
    const Matrix lhs = dp + p * a + a.transpose() * p + 2.0 * alpha * p;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (lhs + lhs.transpose()), Eigen::EigenvaluesOnly);
    const double slack = es.eigenvalues().maxCoeff();
    if (slack > report.worst_slack) {
      report.worst_slack = slack;
      report.worst_time = t;
    }
  }
  report.passed = report.worst_slack <= tol;
  report.message = report.passed
                       ? fmt::format("Riccati inequality holds (worst eigenvalue {:.6g})", report.worst_slack)
                       : fmt::format("Riccati inequality violated: eigenvalue {:.6g} > tol {:.3g} at t = {:.6g}",
                                     report.worst_slack, tol, report.worst_time);
  return report;
}

std::string RiccatiReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed;
  j["structural_failure"] = structural_failure;
  j["worst_slack"] = worst_slack;
  j["worst_time"] = worst_time;
  j["alpha1"] = alpha1;
  j["alpha2"] = alpha2;
  j["message"] = message;
  return j.dump(2);
}

std::vector<std::pair<double, double>> envelope_samples(const Window& window, int n) {
  const auto grid = linspace(window.start, window.end, n);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i; j < grid.size(); ++j) out.emplace_back(grid[i], grid[j]);
  }
  return out;
}

TransitionEnvelope fit_transition_envelope(const LtvSystemModel& model,
                                           std::span<const std::pair<double, double>> samples,
                                           const EnvelopeStrategy& strategy, double tol) {
  if (samples.empty()) throw InvalidInput("fit_transition_envelope needs samples");
  struct Sample {
    double tau, t, norm;
  };
  std::vector<Sample> phi_norms;
  phi_norms.reserve(samples.size());

  // Chain Phi along increasing t for each tau: Phi(t_j, tau) = Phi(t_j, t_{j-1}) Phi(t_{j-1}, tau).
  std::map<double, std::vector<double>> by_tau;
  for (const auto& [tau, t] : samples) {
    if (tau > t) throw InvalidInput("envelope sample with tau > t");
    by_tau[tau].push_back(t);
  }
  const Eigen::Index n = model.dim;
  for (auto& [tau, ts] : by_tau) {
    std::sort(ts.begin(), ts.end());
    Matrix phi = Matrix::Identity(n, n);
    double last = tau;
    for (double t : ts) {
      if (t > last) phi = transition_matrix(model, last, t, tol) * phi;
      last = t;
      Eigen::JacobiSVD<Matrix> svd(phi);
      phi_norms.push_back({tau, t, svd.singularValues()[0]});
    }
  }

  auto kappa_for = [&](double beta) {
    double k = 0.0;
    for (const auto& s : phi_norms) k = std::max(k, s.norm * std::exp(beta * (s.t - s.tau)));
    return k;
  };

  TransitionEnvelope env;
  env.samples = phi_norms.size();
  if (const auto* given = std::get_if<GivenEnvelope>(&strategy)) {
    env.kappa = given->kappa;
    env.beta = given->beta;
  } else {
    const auto& opt = std::get<OptimizeEnvelope>(strategy);
    if (!(opt.beta_min > 0.0 && opt.beta_max > opt.beta_min && opt.grid >= 3 && opt.horizon > 0.0)) {
      throw InvalidInput("invalid envelope optimization settings");
    }
    auto objective = [&](double beta) {
      return kappa_for(beta) * (1.0 - std::exp(-beta * opt.horizon)) / beta;
    };
    const double ratio = std::log(opt.beta_max / opt.beta_min);
    std::vector<double> betas(static_cast<std::size_t>(opt.grid));
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < betas.size(); ++i) {
      betas[i] = opt.beta_min * std::exp(ratio * static_cast<double>(i) / (opt.grid - 1));
      const double v = objective(betas[i]);
      if (v < best_value) {
        best_value = v;
        best = i;
      }
    }
    const double lo = betas[best == 0 ? 0 : best - 1];
    const double hi = betas[std::min(best + 1, betas.size() - 1)];
    auto [beta, value] = boost::math::tools::brent_find_minima(objective, lo, hi, 50);
    if (value > best_value) beta = betas[best];
    env.beta = beta;
    env.kappa = kappa_for(beta);
  }

  env.margin = std::numeric_limits<double>::infinity();
  for (const auto& s : phi_norms) {
    const double slack = env.kappa * std::exp(-env.beta * (s.t - s.tau)) - s.norm;
    if (slack < env.margin) {
      env.margin = slack;
      env.worst_tau = s.tau;
      env.worst_t = s.t;
    }
  }
  env.passed = env.margin >= -1e-12 * std::max(1.0, env.kappa);
  return env;
}

std::string TransitionEnvelope::to_json() const {
  nlohmann::json j;
  j["kappa"] = kappa;
  j["beta"] = beta;
  j["margin"] = margin;
  j["passed"] = passed;
  j["worst_tau"] = worst_tau;
  j["worst_t"] = worst_t;
  j["samples"] = samples;
  return j.dump(2);
}

}  // namespace levy_contract
