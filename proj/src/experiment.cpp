#include "levy_contract/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace levy_contract {

namespace {

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

std::string trim(std::string v) {
  const auto first = v.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = v.find_last_not_of(" \t\r\n");
  return v.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw InvalidInput(fmt::format("{}: expected a number, got '{}'", key, text));
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw InvalidInput(fmt::format("{}: expected a nonnegative integer, got '{}'", key, text));
  }
  return out;
}

/// "0-3" or "0,1,3".
std::vector<int> parse_k_range(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  std::vector<int> out;
  if (const auto dash = v.find('-'); dash != std::string::npos && v.find(',') == std::string::npos) {
    const auto lo = parse_uint(key, v.substr(0, dash));
    const auto hi = parse_uint(key, v.substr(dash + 1));
    if (hi < lo || hi > 1000) throw InvalidInput(fmt::format("{}: invalid range '{}'", key, text));
    for (auto k = lo; k <= hi; ++k) out.push_back(static_cast<int>(k));
    return out;
  }
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto k = parse_uint(key, item);
    if (k > 1000) throw InvalidInput(fmt::format("{}: jump count {} is too large", key, k));
    out.push_back(static_cast<int>(k));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool is_ltv_experiment(const std::string& name) {
  return name == "ltv_2d_diagonal" || name == "ltv_2d_triangular";
}

MarkLaw make_mark_law(const std::string& name, int dim, double eta, const Vector& direction) {
  if (name == "constant") return ConstantMark{eta * direction.normalized()};
  if (name == "uniform_ball") return UniformBallMark{dim, eta};
  if (name == "truncated_gaussian") return TruncatedGaussianMark{dim, 0.5 * eta};
  throw InvalidInput("unknown mark_law '" + name + "'");
}

/// A built-in system with everything the pipeline needs.
struct Preset {
  std::string description;
  std::optional<LevySystemModel> levy;
  std::optional<LtvSystemModel> ltv;
  Matrix metric = Matrix::Identity(1, 1);
  double alpha = 1.0;
  Vector x0 = Vector::Zero(1);
  SamplingBox box;
  /// Lévy presets use the constant h = m_upper eta^2 (the jump contribution
  /// to V when the pre-jump error vanishes).
  bool white_only = false;
};

Preset make_preset(const ExperimentConfig& cfg) {
  Preset p;
  const Window horizon{cfg.s, cfg.t_end};
  const std::string& name = cfg.experiment;
  if (name == "nonlinear_2d") {
    const double gamma = cfg.gamma.value_or(0.3);
    const double eta = cfg.eta.value_or(0.3);
    LevySystemModel m;
    m.name = name;
    m.dim = 2;
    m.noise_dim = 2;
    m.noise = {gamma, eta, cfg.lambda.value_or(1.0)};
    m.drift = [](double, const Vector& x) -> Vector {
      Vector f(2);
      f << -x[0] - x[0] * x[0] * x[0] + 0.5 * x[1], -x[1] - x[1] * x[1] * x[1] - 0.5 * x[0];
      return f;
    };
    const double sigma_scale = gamma / std::numbers::sqrt2;
    m.diffusion = [sigma_scale](double, const Vector&) -> Matrix { return sigma_scale * Matrix::Identity(2, 2); };
    const MarkLaw law = make_mark_law(cfg.mark_law.value_or("uniform_ball"), 2, eta, Vector::Ones(2));
    m.jump_map = [law](double, const Vector&) { return law; };
    p.description = "2D nonlinear system f(x) = (-x1 - x1^3 + 0.5 x2, -x2 - x2^3 - 0.5 x1), M = I";
    p.metric = Matrix::Identity(2, 2);
    p.alpha = 1.0;
    p.x0 = Vector(2);
    p.x0 << 1.0, -1.0;
    p.box = SamplingBox{horizon, Vector::Constant(2, -2.0), Vector::Constant(2, 2.0), 5, 21};
    p.levy = std::move(m);
  } else if (name == "tracking_1d") {
    const double a = 2.0;
    const double gamma = cfg.gamma.value_or(0.5);
    const double eta = cfg.eta.value_or(0.5);
    LevySystemModel m;
    m.name = name;
    m.dim = 1;
    m.noise_dim = 1;
    m.noise = {gamma, eta, cfg.lambda.value_or(1.0)};
    m.drift = [a](double t, const Vector& x) -> Vector { return Vector::Constant(1, -a * (x[0] - std::sin(t))); };
    m.diffusion = [gamma](double, const Vector&) -> Matrix { return Matrix::Constant(1, 1, gamma); };
    const MarkLaw law = make_mark_law(cfg.mark_law.value_or("uniform_ball"), 1, eta, Vector::Ones(1));
    m.jump_map = [law](double, const Vector&) { return law; };
    p.description = "1D reference tracking dx = -2 (x - sin t) dt + noise, M = 1";
    p.metric = Matrix::Identity(1, 1);
    p.alpha = a;
    p.x0 = Vector::Zero(1);
    p.box = SamplingBox{horizon, Vector::Constant(1, -3.0), Vector::Constant(1, 3.0), 5, 21};
    p.levy = std::move(m);
  } else if (is_ltv_experiment(name)) {
    const bool triangular = name == "ltv_2d_triangular";
    const double eta = cfg.eta.value_or(0.5);
    LtvSystemModel m;
    m.name = name;
    m.dim = 2;
    m.noise = {0.0, eta, cfg.lambda.value_or(1.0)};
    m.a_matrix = [triangular](double t) -> Matrix {
      Matrix a(2, 2);
      a << -1.0 + 0.5 * std::sin(t), triangular ? 0.5 : 0.0, 0.0, -2.0;
      return a;
    };
    if (!triangular) {
      m.a_integral = [](double tau, double t) -> Matrix {
        Matrix i = Matrix::Zero(2, 2);
        i(0, 0) = -(t - tau) - 0.5 * (std::cos(t) - std::cos(tau));
        i(1, 1) = -2.0 * (t - tau);
        return i;
      };
    }
    const MarkLaw law = make_mark_law(cfg.mark_law.value_or("constant"), 2, eta, Vector::Ones(2));
    m.jump_signal = [law](double) { return law; };
    p.description = triangular ? "2D LTV A(t) = [[-1 + 0.5 sin t, 0.5], [0, -2]]"
                               : "2D LTV A(t) = diag(-1 + 0.5 sin t, -2)";
    p.metric = Matrix::Identity(2, 2);
    p.metric(1, 1) = cfg.condition_number;
    p.alpha = triangular ? 0.45 : 0.5;
    p.x0 = Vector::Zero(2);
    p.ltv = std::move(m);
  } else if (name == "custom") {
    const double a = cfg.a;
    const double gamma = cfg.gamma.value_or(1.0);
    const double eta = cfg.eta.value_or(0.0);
    const double lambda = cfg.lambda.value_or(1.0);
    p.description = fmt::format("scalar linear dx = -{} x dt + {} dW + xi dN, |xi| <= {}", a, gamma, eta);
    p.alpha = a;
    p.x0 = Vector::Zero(1);
    const MarkLaw law = make_mark_law(cfg.mark_law.value_or("constant"), 1, eta, Vector::Ones(1));
    if (gamma == 0.0 && eta > 0.0) {
      LtvSystemModel m;
      m.name = name;
      m.dim = 1;
      m.noise = {0.0, eta, lambda};
      m.a_matrix = [a](double) { return Matrix::Constant(1, 1, -a); };
      m.a_integral = [a](double tau, double t) { return Matrix::Constant(1, 1, -a * (t - tau)); };
      m.jump_signal = [law](double) { return law; };
      p.ltv = std::move(m);
    } else {
      LevySystemModel m;
      m.name = name;
      m.dim = 1;
      m.noise_dim = 1;
      m.noise = {gamma, eta, lambda};
      m.drift = [a](double, const Vector& x) -> Vector { return -a * x; };
      m.diffusion = [gamma](double, const Vector&) -> Matrix { return Matrix::Constant(1, 1, gamma); };
      if (eta > 0.0) m.jump_map = [law](double, const Vector&) { return law; };
      p.white_only = eta == 0.0;
      p.box = SamplingBox{horizon, Vector::Constant(1, -3.0), Vector::Constant(1, 3.0), 5, 21};
      p.levy = std::move(m);
    }
  }
  if (cfg.alpha) p.alpha = *cfg.alpha;
  p.alpha *= cfg.alpha_scale;
  return p;
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidInput("invalid configuration:\n  " + join(problems, "\n  ")), problems_(std::move(problems)) {}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"nonlinear_2d", "tracking_1d", "ltv_2d_diagonal", "ltv_2d_triangular",
                                              "custom"};
  return names;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "experiment") {
    cfg.experiment = value;
  } else if (key == "seed") {
    cfg.seed = parse_uint(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "n_paths") {
    cfg.n_paths = parse_uint(key, value);
  } else if (key == "k_range") {
    cfg.k_values = parse_k_range(key, value);
  } else if (key == "dt") {
    cfg.dt = parse_double(key, value);
  } else if (key == "s") {
    cfg.s = parse_double(key, value);
  } else if (key == "t_end") {
    cfg.t_end = parse_double(key, value);
  } else if (key == "grid_points") {
    cfg.grid_points = static_cast<int>(parse_uint(key, value));
  } else if (key == "strategy") {
    cfg.strategy = value;
  } else if (key == "time_law") {
    cfg.time_law = time_law_from_string(value);
  } else if (key == "mc_samples") {
    cfg.mc_samples = parse_uint(key, value);
  } else if (key == "lambda") {
    cfg.lambda = parse_double(key, value);
  } else if (key == "eta") {
    cfg.eta = parse_double(key, value);
  } else if (key == "gamma") {
    cfg.gamma = parse_double(key, value);
  } else if (key == "mark_law") {
    cfg.mark_law = value;
  } else if (key == "alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "alpha_scale") {
    cfg.alpha_scale = parse_double(key, value);
  } else if (key == "eta_scale") {
    cfg.eta_scale = parse_double(key, value);
  } else if (key == "condition_number") {
    cfg.condition_number = parse_double(key, value);
  } else if (key == "a") {
    cfg.a = parse_double(key, value);
  } else if (key == "sample_paths") {
    cfg.sample_paths = parse_uint(key, value);
  } else if (key == "hard_sigma") {
    cfg.hard_sigma = parse_double(key, value);
  } else {
    throw InvalidInput("unknown key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end()) {
    problems.push_back(fmt::format("experiment: unknown name '{}' (allowed: {})", experiment, join(names, ", ")));
  }
  if (out.empty()) problems.emplace_back("out: must not be empty");
  if (n_paths < 1) problems.emplace_back("n_paths: must be >= 1");
  if (k_values.empty()) problems.emplace_back("k_range: must list at least one jump count");
  if (!(t_end > s)) problems.emplace_back("t_end: must be greater than s");
  if (s < 0.0) problems.emplace_back("s: must be >= 0");
  if (!(dt > 0.0) || dt > t_end - s) problems.emplace_back("dt: must satisfy 0 < dt <= t_end - s");
  if (grid_points < 1) problems.emplace_back("grid_points: must be >= 1");
  try {
    psi_method_from_string(strategy);
  } catch (const InvalidInput& e) {
    problems.push_back(std::string("strategy: ") + e.what());
  }
  if (mc_samples < 1000) problems.emplace_back("mc_samples: must be >= 1000");
  if (lambda && !(*lambda > 0.0)) problems.emplace_back("lambda: must be > 0");
  if (eta && *eta < 0.0) problems.emplace_back("eta: must be >= 0");
  if (gamma && *gamma < 0.0) problems.emplace_back("gamma: must be >= 0");
  if (mark_law && *mark_law != "constant" && *mark_law != "uniform_ball" && *mark_law != "truncated_gaussian") {
    problems.push_back(fmt::format("mark_law: unknown law '{}' (allowed: constant, uniform_ball, truncated_gaussian)",
                                   *mark_law));
  }
  if (alpha && !(*alpha > 0.0)) problems.emplace_back("alpha: must be > 0");
  if (!(alpha_scale > 0.0)) problems.emplace_back("alpha_scale: must be > 0");
  if (eta_scale < 0.0) problems.emplace_back("eta_scale: must be >= 0");
  if (!(condition_number >= 1.0)) problems.emplace_back("condition_number: must be >= 1");
  if (condition_number != 1.0 && !is_ltv_experiment(experiment)) {
    problems.emplace_back("condition_number: only applies to the ltv_2d presets");
  }
  if (!(a > 0.0)) problems.emplace_back("a: must be > 0");
  if (a != 1.0 && experiment != "custom") problems.emplace_back("a: only applies to the custom experiment");
  if (!(hard_sigma > 0.0)) problems.emplace_back("hard_sigma: must be > 0");
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::string ExperimentConfig::to_ini() const {
  std::vector<std::string> ks;
  for (int k : k_values) ks.push_back(std::to_string(k));
  std::string out_text;
  auto line = [&](const char* key, const std::string& value) {
    if (!value.empty()) out_text += fmt::format("{} = {}\n", key, value);
  };
  line("experiment", experiment);
  line("seed", std::to_string(seed));
  line("out", out);
  line("n_paths", std::to_string(n_paths));
  line("k_range", join(ks, ","));
  line("dt", fmt::format("{}", dt));
  line("s", fmt::format("{}", s));
  line("t_end", fmt::format("{}", t_end));
  line("grid_points", std::to_string(grid_points));
  line("strategy", strategy);
  line("time_law", to_string(time_law));
  line("mc_samples", std::to_string(mc_samples));
  line("lambda", fmt_optional(lambda));
  line("eta", fmt_optional(eta));
  line("gamma", fmt_optional(gamma));
  line("mark_law", mark_law.value_or(""));
  line("alpha", fmt_optional(alpha));
  line("alpha_scale", fmt::format("{}", alpha_scale));
  line("eta_scale", fmt::format("{}", eta_scale));
  line("condition_number", fmt::format("{}", condition_number));
  line("a", fmt::format("{}", a));
  line("sample_paths", std::to_string(sample_paths));
  line("hard_sigma", fmt::format("{}", hard_sigma));
  return out_text;
}

ExperimentConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError({fmt::format("line {}: {}", e.line(), e.message())});
  }
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) {
      problems.push_back("[" + key + "]: sections are not supported, use flat key = value lines");
      continue;
    }
    try {
      set_config_value(cfg, key, node.data());
    } catch (const InvalidInput& e) {
      problems.emplace_back(e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path.string() + "'"});
  return parse_config(in);
}

std::vector<double> audit_times(const ExperimentConfig& cfg) {
  std::vector<double> times;
  for (int i = 1; i <= cfg.grid_points; ++i) {
    times.push_back(i == cfg.grid_points ? cfg.t_end
                                         : cfg.s + (cfg.t_end - cfg.s) * static_cast<double>(i) / cfg.grid_points);
  }
  return times;
}

ExperimentResult evaluate_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Preset preset = make_preset(cfg);
  const Window horizon{cfg.s, cfg.t_end};
  const std::vector<double> times = audit_times(cfg);
  const PsiMethod method = psi_method_from_string(cfg.strategy);

  ExperimentResult result;
  result.alpha = preset.alpha;
  std::ostringstream report;
  report << fmt::format("experiment: {} (repository-defined preset, not calibrated to published figures)\n", cfg.experiment);
  report << fmt::format("system: {}\n", preset.description);
  report << fmt::format("seed: {}\nversion: {}\n", cfg.seed, artifact_version());

  BoundFactory factory;
  const LevySystemModel sim_model = preset.ltv ? preset.ltv->as_levy() : *preset.levy;
  result.lambda = sim_model.noise.lambda;
  result.eta = sim_model.noise.eta;
  const double eta_bound = sim_model.noise.eta * cfg.eta_scale;

  try {
    if (preset.ltv) {
      const LtvSystemModel& ltv = *preset.ltv;
      const Matrix p = preset.metric;
      std::vector<double> riccati_times;
      for (int i = 0; i <= 200; ++i) riccati_times.push_back(cfg.s + (cfg.t_end - cfg.s) * i / 200.0);
      const RiccatiReport riccati = check_riccati_tv(ltv, [p](double) { return p; }, preset.alpha, riccati_times);
      const auto samples = envelope_samples(horizon, 21);
      const TransitionEnvelope envelope =
          fit_transition_envelope(ltv, samples, OptimizeEnvelope{cfg.t_end - cfg.s}, 1e-10);
      result.certified = riccati.passed && envelope.passed;
      result.alpha1 = riccati.alpha1;
      result.alpha2 = riccati.alpha2;
      result.certification = "riccati: " + riccati.to_json() + "\nenvelope: " + envelope.to_json();
      const RiccatiConstants rc{preset.alpha, riccati.alpha1, riccati.alpha2};
      PsiSpec base;
      base.eta = eta_bound;
      base.lambda = sim_model.noise.lambda;
      base.d0 = 0.0;
      base.window = horizon;
      base.time_law = cfg.time_law;
      factory = [rc, envelope, base, method, cfg](int k) {
        PsiSpec spec = base;
        spec.k = k;
        PsiStrategy strategy{method, cfg.mc_samples, cfg.seed, 1000u + static_cast<std::uint64_t>(k)};
        return shot_ltv_bound(rc, envelope, spec, strategy);
      };
    } else {
      const ContractionCertificate cert = constant_metric_certificate(preset.metric, preset.alpha);
      const ContractionReport check = check_basic_contraction(sim_model, cert, preset.box);
      result.certified = check.passed;
      result.alpha1 = cert.constants.m_lower;
      result.alpha2 = cert.constants.m_upper;
      result.certification = "contraction: " + check.to_json();
      const double gamma = sim_model.noise.gamma;
      if (preset.white_only) {
        const BoundParams white = white_bound(cert, gamma);
        factory = [white](int) { return white; };
      } else {
        const HFunction h = constant_h(cert.constants.m_upper * eta_bound * eta_bound);
        levy_bound(cert, h, gamma, 0);  // surfaces a nonpositive beta_w before any simulation
        factory = [cert, h, gamma](int k) { return levy_bound(cert, h, gamma, k); };
      }
    }
  } catch (const ContractionMarginError& e) {
    result.certified = false;
    result.certification += std::string("\nbound: ") + e.what();
  }

  report << fmt::format("certification: {}\n{}\n", result.certified ? "PASS" : "FAIL", result.certification);

  if (factory) {
    const bool jumps = sim_model.has_jumps();
    const std::vector<int> ks = jumps ? cfg.k_values : std::vector<int>{0};
    for (int k : ks) {
      const BoundParams b = factory(k);
      for (const auto& w : b.warnings) report << fmt::format("bound warning (k={}): {}\n", k, w);
      for (double t : times) result.bounds.push_back(bound_row(b, 0.0, cfg.s, t));
    }

    AuditConfig audit_cfg;
    audit_cfg.k_values = cfg.k_values;
    audit_cfg.times = times;
    audit_cfg.s = cfg.s;
    audit_cfg.n_paths = cfg.n_paths;
    audit_cfg.seed = cfg.seed;
    audit_cfg.dt = cfg.dt;
    audit_cfg.init = MatchedInit{preset.x0};
    audit_cfg.hard_sigma = cfg.hard_sigma;
    audit_cfg.estimate.bootstrap_seed = cfg.seed;
    audit_cfg.model_id = cfg.experiment;
    result.audit = preset.ltv ? audit_bound(*preset.ltv, factory, audit_cfg)
                              : audit_bound(*preset.levy, factory, audit_cfg);
    report << result.audit.summary();

    IntegratorConfig icfg;
    icfg.horizon = horizon;
    icfg.dt = cfg.dt;
    EnsembleOptions opts;
    opts.seed = cfg.seed;
    opts.eval_times = {cfg.t_end};
    const PairedEnsemble ens = run_ensemble(sim_model, MatchedInit{preset.x0}, icfg, cfg.n_paths, Unconditional{}, opts);
    const int k_max = jumps ? *std::max_element(cfg.k_values.begin(), cfg.k_values.end()) : 0;
    EstimateOptions est_opts;
    est_opts.bootstrap_seed = cfg.seed;
    const double grid[] = {cfg.t_end};
    for (int k = 0; k <= k_max; ++k) {
      auto est = estimate_conditional_mse(ens, k, grid, est_opts);
      result.ensemble_summary.push_back(est.front());
    }
  } else {
    report << "audit: skipped, no valid bound\n";
  }

  if (!result.certified) {
    result.exit_code = exit_certification_failure;
  } else if (!result.audit.passed()) {
    result.exit_code = exit_hard_violation;
  }
  report << fmt::format("exit code: {}\n", result.exit_code);
  result.report = report.str();
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result = evaluate_experiment(cfg);
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);

  {
    Preset preset = make_preset(cfg);
    const LevySystemModel model = preset.ltv ? preset.ltv->as_levy() : *preset.levy;
    IntegratorConfig icfg;
    icfg.horizon = Window{cfg.s, cfg.t_end};
    icfg.dt = cfg.dt;
    std::vector<SamplePath> paths;
    for (std::size_t i = 0; i < cfg.sample_paths; ++i) {
      paths.push_back(integrate(model, preset.x0, icfg, RandomStream(cfg.seed, i)));
    }
    std::ofstream out(dir / "paths.csv");
    write_paths_csv(out, paths, cfg.experiment, cfg.seed);
  }
  {
    std::ofstream out(dir / "bounds.csv");
    write_bounds_csv(out, result.bounds, cfg.experiment, cfg.seed);
  }
  {
    std::ofstream out(dir / "audit.csv");
    write_audit_csv(out, result.audit, cfg.experiment);
  }
  {
    std::ofstream out(dir / "ensemble_summary.csv");
    write_ensemble_summary_csv(out, result.ensemble_summary, cfg.experiment, cfg.seed);
  }
  {
    std::ofstream out(dir / "config.ini");
    out << cfg.to_ini();
  }
  {
    std::ofstream out(dir / "report.txt");
    out << result.report;
  }
  return result;
}

int sweep(const ExperimentConfig& cfg, const std::string& parameter, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError({"sweep: no values given"});
  if (parameter != "lambda" && parameter != "eta" && parameter != "alpha" && parameter != "condition_number") {
    throw ConfigError({"sweep: unknown parameter '" + parameter + "' (allowed: lambda, eta, alpha, condition_number)"});
  }
  if (parameter == "condition_number" && !is_ltv_experiment(cfg.experiment)) {
    throw ConfigError({"sweep: condition_number only applies to the ltv_2d presets"});
  }
  std::vector<std::string> problems;
  std::vector<ExperimentConfig> configs;
  for (double v : values) {
    ExperimentConfig c = cfg;
    set_config_value(c, parameter, fmt::format("{}", v));
    try {
      c.validate();
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back(fmt::format("{}={}: {}", parameter, v, p));
    }
    configs.push_back(std::move(c));
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));

  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "sweep.csv");
  out << "experiment,seed,version,parameter,value,k,t,beta,kappa,rhs_total,expected_jumps,alpha1,alpha2,mse,ci_low,"
         "ci_high,margin,exit_code\n";
  int worst = exit_ok;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const ExperimentResult r = evaluate_experiment(configs[i]);
    worst = std::max(worst, r.exit_code);
    for (const auto& row : r.bounds) {
      if (std::abs(row.t - cfg.t_end) > 1e-12) continue;
      const ConditionalMseEstimate* cell = nullptr;
      for (const auto& c : r.audit.cells) {
        if (c.k == row.k && std::abs(c.t - row.t) < 1e-12) cell = &c;
      }
      auto num = [](double v) { return std::isnan(v) ? std::string("nan") : fmt::format("{:.17g}", v); };
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out << fmt::format("{},{},{},{},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{},{},{}\n",
                         cfg.experiment, cfg.seed, artifact_version(), parameter, values[i], row.k, row.t, row.beta,
                         row.kappa, row.rhs_total, r.lambda * (cfg.t_end - cfg.s), r.alpha1, r.alpha2,
                         num(cell ? cell->mse : nan), num(cell ? cell->ci_low : nan), num(cell ? cell->ci_high : nan),
                         num(cell ? cell->margin : nan), r.exit_code);
    }
  }
  return worst;
}

}  // namespace levy_contract
