#include "levy_contract/verify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace levy_contract {

namespace {

constexpr double kZ95 = 1.959963984540054;

std::string csv_number(double v) { return std::isnan(v) ? std::string("nan") : fmt::format("{:.17g}", v); }

void check_kind(const BoundParams& bound, const LevySystemModel& model, bool ltv) {
  if (ltv) {
    if (bound.kind != BoundKind::shot_ltv) {
      throw InvalidInput(fmt::format("LTV model '{}' can only be audited against a shot_ltv bound, got {}", model.name,
                                     to_string(bound.kind)));
    }
    return;
  }
  switch (bound.kind) {
    case BoundKind::white:
      if (model.has_jumps()) throw InvalidInput("white bound audited on model '" + model.name + "' which has jumps");
      break;
    case BoundKind::shot:
      if (model.has_diffusion()) {
        throw InvalidInput("shot bound audited on model '" + model.name + "' which has white noise");
      }
      break;
    case BoundKind::levy:
      break;
    case BoundKind::shot_ltv:
      throw InvalidInput("shot_ltv bounds are audited through the LTV model overload");
  }
}

AuditReport audit_impl(const LevySystemModel& model, const BoundFactory& factory, const AuditConfig& config,
                       bool ltv) {
  if (config.times.empty()) throw InvalidInput("audit needs at least one grid time");
  if (config.n_paths < 1) throw InvalidInput("audit needs n_paths >= 1");
  std::vector<double> times = config.times;
  std::sort(times.begin(), times.end());
  if (!(times.front() > config.s)) throw InvalidInput("audit grid times must lie strictly after s");

  std::vector<int> ks = model.has_jumps() ? config.k_values : std::vector<int>{0};
  if (ks.empty()) throw InvalidInput("audit needs at least one jump count");
  for (int k : ks) {
    if (k < 0) throw InvalidInput("audit jump counts must be >= 0");
  }

  AuditReport report;
  report.seed = config.seed;
  report.model_id = config.model_id.empty() ? model.name : config.model_id;

  std::map<int, BoundParams> bounds;
  for (int k : ks) {
    BoundParams b = factory(k);
    check_kind(b, model, ltv);
    report.kind = b.kind;
    report.strategy = b.strategy;
    for (const auto& w : b.warnings) {
      std::string tagged = fmt::format("k={}: {}", k, w);
      if (std::find(report.warnings.begin(), report.warnings.end(), tagged) == report.warnings.end()) {
        report.warnings.push_back(std::move(tagged));
      }
    }
    bounds.emplace(k, std::move(b));
  }

  auto add_cell = [&](ConditionalMseEstimate est, const BoundParams& bound, double msq0) {
    if (!est.insufficient) {
      est.bound_rhs = bound.rhs(msq0, config.s, est.t);
      est.margin = est.bound_rhs - est.ci_high;
      const std::size_t index = report.cells.size();
      if (est.margin < 0.0) report.violations.push_back(index);
      const double excess = est.mse - est.bound_rhs;
      const double threshold = est.std_err > 0.0 ? config.hard_sigma * est.std_err : 1e-12 * (1.0 + std::abs(est.bound_rhs));
      if (excess > threshold || std::isnan(est.bound_rhs)) report.hard_violations.push_back(index);
    }
    report.cells.push_back(std::move(est));
  };

  auto initial_msq = [](const PairedEnsemble& ens) {
    const std::size_t i0 = ens.eval_index(ens.eval_times.front());
    double sum = 0.0;
    for (const auto& p : ens.pairs) sum += p.deviation_sq(i0);
    return sum / static_cast<double>(ens.count());
  };

  if (!model.has_jumps()) {
    IntegratorConfig cfg;
    cfg.horizon = Window{config.s, times.back()};
    cfg.dt = std::min(config.dt, cfg.horizon.length());
    EnsembleOptions opts;
    opts.seed = config.seed;
    opts.eval_times = times;
    const PairedEnsemble ens = run_ensemble(model, config.init, cfg, config.n_paths, Unconditional{}, opts);
    const double msq0 = initial_msq(ens);
    for (auto& est : estimate_conditional_mse(ens, 0, times, config.estimate)) add_cell(std::move(est), bounds.at(0), msq0);
    return report;
  }

  for (int k : ks) {
    for (double t : times) {
      IntegratorConfig cfg;
      cfg.horizon = Window{config.s, t};
      cfg.dt = std::min(config.dt, cfg.horizon.length());
      EnsembleOptions opts;
      opts.seed = config.seed;
      opts.eval_times = {t};
      const PairedEnsemble ens =
          run_ensemble(model, config.init, cfg, config.n_paths, Conditional{k, cfg.horizon}, opts);
      const double msq0 = initial_msq(ens);
      const double grid[] = {t};
      for (auto& est : estimate_conditional_mse(ens, k, grid, config.estimate)) {
        add_cell(std::move(est), bounds.at(k), msq0);
      }
    }
  }
  return report;
}

}  // namespace

ConditionalMseEstimate summarize_squares(std::span<const double> squares, const EstimateOptions& options) {
  ConditionalMseEstimate est;
  est.n_paths = squares.size();
  est.low_confidence = squares.size() < options.floor;
  if (squares.empty()) {
    est.insufficient = true;
    est.mse = est.std_err = est.ci_low = est.ci_high = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  const double n = static_cast<double>(squares.size());
  const double mean = std::accumulate(squares.begin(), squares.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : squares) ss += (v - mean) * (v - mean);
  const double var = squares.size() > 1 ? ss / (n - 1.0) : 0.0;
  est.mse = mean;
  est.std_err = std::sqrt(var / n);
  if (est.std_err == 0.0) {
    est.ci_method = CiMethod::degenerate;
    est.ci_low = est.ci_high = mean;
    return est;
  }
  if (squares.size() < options.bootstrap_below) {
    est.ci_method = CiMethod::bootstrap;
    RandomStream stream(options.bootstrap_seed, 0, 5);
    std::vector<double> means(static_cast<std::size_t>(std::max(options.bootstrap_resamples, 2)));
    for (auto& m : means) {
      double sum = 0.0;
      for (std::size_t i = 0; i < squares.size(); ++i) {
        auto j = static_cast<std::size_t>(stream.uniform() * n);
        sum += squares[std::min(j, squares.size() - 1)];
      }
      m = sum / n;
    }
    std::sort(means.begin(), means.end());
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(means.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, means.size() - 1);
      return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
    };
    est.ci_low = std::min(quantile(0.025), mean);
    est.ci_high = std::max(quantile(0.975), mean);
  } else {
    est.ci_method = CiMethod::normal;
    est.ci_low = mean - kZ95 * est.std_err;
    est.ci_high = mean + kZ95 * est.std_err;
  }
  return est;
}

std::vector<ConditionalMseEstimate> estimate_conditional_mse(const PairedEnsemble& ensemble, int k,
                                                             std::span<const double> eval_times,
                                                             const EstimateOptions& options) {
  if (k < 0) throw InvalidInput("jump count k must be >= 0");
  const auto* conditional = std::get_if<Conditional>(&ensemble.mode);
  if (std::holds_alternative<FixedJumps>(ensemble.mode)) {
    throw InvalidInput("conditional MSE needs a conditional or unconditional ensemble");
  }
  if (conditional && conditional->k != k) {
    throw InvalidInput(fmt::format("ensemble was conditioned on k = {}, not k = {}", conditional->k, k));
  }
  std::vector<ConditionalMseEstimate> out;
  std::vector<double> squares;
  for (double t : eval_times) {
    const std::size_t idx = ensemble.eval_index(t);
    squares.clear();
    const Window stratum{ensemble.window.start, t};
    for (const auto& pair : ensemble.pairs) {
      if (conditional || pair.jump_count(stratum) == k) squares.push_back(pair.deviation_sq(idx));
    }
    ConditionalMseEstimate est = summarize_squares(squares, options);
    est.k = k;
    est.t = t;
    out.push_back(est);
  }
  return out;
}

std::string AuditReport::summary() const {
  std::ostringstream os;
  os << fmt::format("audit model={} kind={} strategy={} seed={}\n", model_id, to_string(kind), strategy, seed);
  os << fmt::format("cells={} violations={} hard_violations={} status={}\n", cells.size(), violations.size(),
                    hard_violations.size(), passed() ? "PASS" : "FAIL");
  std::size_t insufficient = 0, low = 0;
  for (const auto& c : cells) {
    insufficient += c.insufficient ? 1 : 0;
    low += c.low_confidence ? 1 : 0;
  }
  if (insufficient > 0) os << fmt::format("insufficient strata: {}\n", insufficient);
  if (low > 0) os << fmt::format("low-confidence strata: {}\n", low);
  for (std::size_t i : violations) {
    const auto& c = cells[i];
    const bool hard = std::find(hard_violations.begin(), hard_violations.end(), i) != hard_violations.end();
    os << fmt::format("  {} k={} t={:.6g} mse={:.6g} ci=[{:.6g}, {:.6g}] rhs={:.6g} margin={:.6g}\n",
                      hard ? "HARD" : "soft", c.k, c.t, c.mse, c.ci_low, c.ci_high, c.bound_rhs, c.margin);
  }
  for (const auto& w : warnings) os << "warning: " << w << '\n';
  return os.str();
}

AuditReport audit_bound(const LevySystemModel& model, const BoundFactory& bound, const AuditConfig& config) {
  return audit_impl(model, bound, config, false);
}

AuditReport audit_bound(const LtvSystemModel& model, const BoundFactory& bound, const AuditConfig& config) {
  model.validate();
  return audit_impl(model.as_levy(), bound, config, true);
}

DecayReport check_incremental_decay(const LevySystemModel& model, const ContractionCertificate& cert,
                                    std::span<const std::pair<Vector, Vector>> initial_pairs,
                                    const Window& horizon, double dt, double tol) {
  const LevySystemModel nominal = nominal_of(model);
  IntegratorConfig cfg;
  cfg.horizon = horizon;
  cfg.dt = dt;
  const double scale = std::sqrt(cert.constants.m_upper / cert.constants.m_lower);
  DecayReport report;
  for (std::size_t p = 0; p < initial_pairs.size(); ++p) {
    const auto& [a, b] = initial_pairs[p];
    const double gap0 = (b - a).norm();
    const SamplePath x1 = integrate(nominal, a, cfg, RandomStream(0, 0));
    const SamplePath x2 = integrate(nominal, b, cfg, RandomStream(0, 0));
    for (std::size_t i = 0; i < x1.size(); ++i) {
      const double gap = (x2.state(i) - x1.state(i)).norm();
      const double envelope = scale * gap0 * std::exp(-cert.alpha * (x1.times[i] - horizon.start));
      const double ratio = gap0 == 0.0 ? (gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()) : gap / envelope;
      ++report.points_checked;
      if (ratio > report.worst_ratio) {
        report.worst_ratio = ratio;
        report.worst_time = x1.times[i];
        report.worst_pair = p;
      }
    }
  }
  report.passed = report.worst_ratio <= 1.0 + tol;
  report.message = fmt::format("{}: worst gap/envelope ratio {:.9g} at t = {:.6g} (pair {})",
                               report.passed ? "decay envelope holds" : "decay envelope violated", report.worst_ratio,
                               report.worst_time, report.worst_pair);
  return report;
}

void write_audit_csv(std::ostream& out, const AuditReport& report, const std::string& experiment, bool header) {
  if (header) out << "experiment,seed,version,k,t,n,mse,ci_low,ci_high,bound_rhs,margin\n";
  for (const auto& c : report.cells) {
    out << fmt::format("{},{},{},{},{:.17g},{},{},{},{},{},{}\n", experiment, report.seed, artifact_version(), c.k, c.t,
                       c.n_paths, csv_number(c.mse), csv_number(c.ci_low), csv_number(c.ci_high),
                       csv_number(c.bound_rhs), csv_number(c.margin));
  }
}

void write_ensemble_summary_csv(std::ostream& out, std::span<const ConditionalMseEstimate> estimates,
                                const std::string& experiment, std::uint64_t seed) {
  out << "experiment,seed,version,k,count,E_k_mse,ci_low,ci_high\n";
  for (const auto& e : estimates) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", experiment, seed, artifact_version(), e.k, e.n_paths,
                       csv_number(e.mse), csv_number(e.ci_low), csv_number(e.ci_high));
  }
}

}  // namespace levy_contract
