#include "levy_contract/simulate.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace levy_contract {

namespace {

constexpr std::uint32_t kLaneInit = 0;
constexpr std::uint32_t kLaneJumpTimes = 1;
constexpr std::uint32_t kLaneMarks = 2;
constexpr std::uint32_t kLaneBrownian = 3;

struct GridPoint {
  double time;
  bool jump;
  bool keep;
};

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Uniform grid on the horizon merged with extra and jump times.
std::vector<GridPoint> build_grid(const IntegratorConfig& cfg, std::span<const double> jump_times) {
  const Window& h = cfg.horizon;
  const auto steps = std::max<long>(1, static_cast<long>(std::ceil(h.length() / cfg.dt - 1e-9)));
  std::vector<GridPoint> points;
  points.reserve(static_cast<std::size_t>(steps) + 1 + cfg.extra_times.size() + jump_times.size());
  for (long i = 0; i <= steps; ++i) {
    const double t = (i == steps) ? h.end
                                  : h.start + h.length() * static_cast<double>(i) /
                                                  static_cast<double>(steps);
    points.push_back({t, false, cfg.record_all || i == 0 || i == steps});
  }
  for (double t : cfg.extra_times) {
    if (h.contains(t)) points.push_back({t, false, true});
  }
  for (double t : jump_times) points.push_back({t, true, true});

  std::stable_sort(points.begin(), points.end(),
                   [](const GridPoint& a, const GridPoint& b) { return a.time < b.time; });
  std::vector<GridPoint> merged;
  merged.reserve(points.size());
  for (const auto& p : points) {
    if (!merged.empty() && nearly_equal(merged.back().time, p.time)) {
      auto& last = merged.back();
      if (p.jump) last.time = p.time;
      last.jump = last.jump || p.jump;
      last.keep = last.keep || p.keep;
    } else {
      merged.push_back(p);
    }
  }
  return merged;
}

std::vector<double> draw_jump_times(const LevySystemModel& model, const IntegratorConfig& cfg,
                                    RandomStream& stream, const JumpMode& mode) {
  const Window& h = cfg.horizon;
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Unconditional>) {
          if (!model.has_jumps()) return {};
          return sample_poisson_times(stream, model.noise.lambda, h);
        } else if constexpr (std::is_same_v<T, Conditional>) {
          const Window w = m.window.value_or(h);
          if (w.start < h.start || w.end > h.end || !(w.start < w.end)) {
            throw InvalidInput("conditional window must be a nonempty sub-interval of the horizon");
          }
          if (m.k < 0) throw InvalidInput("conditional jump count must be >= 0");
          if (!model.has_jumps()) {
            if (m.k > 0) throw InvalidInput("conditional jumps requested for a model without jumps");
            return {};
          }
          std::vector<double> times;
          if (w.start > h.start) {
            times = sample_poisson_times(stream, model.noise.lambda, {h.start, w.start});
          }
          auto inside = sample_conditional_times(stream, m.k, w);
          times.insert(times.end(), inside.begin(), inside.end());
          if (w.end < h.end) {
            auto after = sample_poisson_times(stream, model.noise.lambda, {w.end, h.end});
            times.insert(times.end(), after.begin(), after.end());
          }
          return times;
        } else {
          if (!m.times.empty() && !model.has_jumps()) {
            throw InvalidInput("fixed jumps given for a model without jumps");
          }
          for (std::size_t i = 0; i < m.times.size(); ++i) {
            if (!(m.times[i] > h.start && m.times[i] <= h.end)) {
              throw InvalidInput("fixed jump time outside the horizon (s, t]");
            }
            if (i > 0 && !(m.times[i] > m.times[i - 1])) {
              throw InvalidInput("fixed jump times must be strictly increasing");
            }
          }
          return m.times;
        }
      },
      mode);
}

void check_blowup(const Vector& x, double t, double threshold, const std::string& name) {
  const double n = x.norm();
  if (!(n <= threshold)) {
    throw BlowUpError(fmt::format("model '{}': state norm {:.6g} exceeded blow-up threshold {:.6g} "
                                  "at t = {:.6g}",
                                  name, n, threshold, t),
                      t, n);
  }
}

Vector rk4_step(const DriftFn& f, double t, const Vector& x, double h) {
  const Vector k1 = f(t, x);
  const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = f(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector draw_initial(RandomStream& stream, const Vector& mean, double sd) {
  Vector v(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) v[i] = mean[i] + sd * stream.normal();
  return v;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(horizon.start < horizon.end)) throw InvalidInput("integrator horizon requires s < t");
  if (!(dt > 0.0) || dt > horizon.length() * (1.0 + 1e-12)) {
    throw InvalidInput("integrator dt must satisfy 0 < dt <= t - s");
  }
  if (!(blowup_threshold > 0.0)) throw InvalidInput("blow-up threshold must be > 0");
}

SamplePath integrate(const LevySystemModel& model, const Vector& x0, const IntegratorConfig& cfg,
                     const RandomStream& stream, const JumpMode& mode) {
  model.validate();
  cfg.validate();
  if (x0.size() != model.dim) throw InvalidInput("x0 dimension does not match the model");
  if (!x0.allFinite()) throw InvalidInput("x0 must be finite");

  RandomStream time_stream = stream.substream(kLaneJumpTimes);
  RandomStream mark_stream = stream.substream(kLaneMarks);
  RandomStream brownian_stream = stream.substream(kLaneBrownian);

  const std::vector<double> jump_times = draw_jump_times(model, cfg, time_stream, mode);
  const std::vector<GridPoint> grid = build_grid(cfg, jump_times);

  SamplePath path;
  path.stream_id = stream.stream_id();
  std::vector<double> stored;
  std::vector<double> left_stored;
  const auto n = static_cast<Eigen::Index>(model.dim);

  Vector x = x0;
  auto record = [&](double t) {
    path.times.push_back(t);
    stored.insert(stored.end(), x.data(), x.data() + n);
  };
  record(grid.front().time);

  const bool deterministic = model.is_noise_free();
  const bool diffusive = model.has_diffusion();
  const double gamma_cap = model.noise.gamma * (1.0 + 1e-9) + 1e-15;
  const double eta_cap = model.noise.eta * (1.0 + 1e-12) + 1e-15;

  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = grid[i].time;
    const double h = grid[i + 1].time - t;
    if (deterministic) {
      x = rk4_step(model.drift, t, x, h);
    } else {
      Vector dx = model.drift(t, x) * h;
      if (diffusive) {
        const Matrix sigma = model.diffusion(t, x);
        if (sigma.rows() != n || sigma.cols() != model.noise_dim) {
          throw InvalidInput("diffusion must return a dim x noise_dim matrix");
        }
        if (sigma.norm() > gamma_cap) {
          throw InvalidInput(fmt::format("||sigma(t,x)||_F = {:.6g} exceeds gamma = {:.6g} at t = {:.6g}",
                                         sigma.norm(), model.noise.gamma, t));
        }
        Vector dw(model.noise_dim);
        const double scale = std::sqrt(h);
        for (int j = 0; j < model.noise_dim; ++j) dw[j] = scale * brownian_stream.normal();
        dx += sigma * dw;
      }
      x += dx;
    }
    const double t_next = grid[i + 1].time;
    check_blowup(x, t_next, cfg.blowup_threshold, model.name);

    if (grid[i + 1].jump) {
      const MarkLaw law = model.jump_map(t_next, x);
      Vector mark = sample_mark(mark_stream, law, model.noise.eta);
      if (mark.size() != n) throw InvalidInput("jump mark dimension does not match the model");
      if (mark.norm() > eta_cap) {
        throw InvalidInput(fmt::format("jump mark norm {:.6g} exceeds eta = {:.6g}", mark.norm(),
                                       model.noise.eta));
      }
      left_stored.insert(left_stored.end(), x.data(), x.data() + n);
      x += mark;
      path.jumps.times.push_back(t_next);
      path.jumps.marks.push_back(std::move(mark));
      path.jump_indices.push_back(path.times.size());
      record(t_next);
      check_blowup(x, t_next, cfg.blowup_threshold, model.name);
    } else if (grid[i + 1].keep) {
      record(t_next);
    }
  }

  path.states = Eigen::Map<const Matrix>(stored.data(), n, static_cast<Eigen::Index>(path.times.size()));
  path.left_limits = Eigen::Map<const Matrix>(left_stored.data(), n,
                                              static_cast<Eigen::Index>(path.jumps.size()));
  return path;
}

SamplePath integrate_ltv_exact(const LtvSystemModel& model, const Vector& x0, const Window& window,
                               const JumpRecord& jumps, std::span<const double> output_grid,
                               double tol) {
  model.validate();
  if (!(window.start < window.end)) throw InvalidInput("exact LTV window requires s < t");
  if (x0.size() != model.dim) throw InvalidInput("x0 dimension does not match the model");
  if (jumps.times.size() != jumps.marks.size()) throw InvalidInput("jump record size mismatch");
  for (double t : jumps.times) {
    if (!(t > window.start && t <= window.end)) throw InvalidInput("jump time outside (s, t]");
  }

  std::vector<GridPoint> points;
  points.push_back({window.start, false, true});
  points.push_back({window.end, false, true});
  for (double t : output_grid) {
    if (window.contains(t)) points.push_back({t, false, true});
  }
  for (double t : jumps.times) points.push_back({t, true, true});
  std::stable_sort(points.begin(), points.end(),
                   [](const GridPoint& a, const GridPoint& b) { return a.time < b.time; });
  std::vector<GridPoint> grid;
  for (const auto& p : points) {
    if (!grid.empty() && nearly_equal(grid.back().time, p.time)) {
      if (p.jump) {
        grid.back().time = p.time;
        grid.back().jump = true;
      }
    } else {
      grid.push_back(p);
    }
  }

  const auto n = static_cast<Eigen::Index>(model.dim);
  SamplePath path;
  path.jumps = jumps;
  path.times.reserve(grid.size());
  path.states.resize(n, static_cast<Eigen::Index>(grid.size()));
  path.left_limits.resize(n, static_cast<Eigen::Index>(jumps.size()));

  Vector x = x0;
  std::size_t next_jump = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) x = transition_matrix(model, grid[i - 1].time, grid[i].time, tol) * x;
    if (grid[i].jump) {
      path.left_limits.col(static_cast<Eigen::Index>(next_jump)) = x;
      x += jumps.marks[next_jump];
      path.jump_indices.push_back(i);
      ++next_jump;
    }
    path.times.push_back(grid[i].time);
    path.states.col(static_cast<Eigen::Index>(i)) = x;
  }
  return path;
}

Vector ltv_exact_state(const LtvSystemModel& model, const Vector& x0, double s,
                       const JumpRecord& jumps, double t, double tol) {
  if (t < s) throw InvalidInput("ltv_exact_state requires t >= s");
  Vector x = transition_matrix(model, s, t, tol) * x0;
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    if (jumps.times[i] > s && jumps.times[i] <= t) {
      x += transition_matrix(model, jumps.times[i], t, tol) * jumps.marks[i];
    }
  }
  return x;
}

int init_dimension(const InitLaw& law) {
  return std::visit(
      [](const auto& l) -> int {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, MatchedInit>) {
          return static_cast<int>(l.x0.size());
        } else if constexpr (std::is_same_v<T, MatchedGaussianInit>) {
          return static_cast<int>(l.mean.size());
        } else {
          return static_cast<int>(l.mean_x.size());
        }
      },
      law);
}

int PathPair::jump_count(const Window& w) const {
  return static_cast<int>(std::count_if(jump_times.begin(), jump_times.end(),
                                        [&](double t) { return t > w.start && t <= w.end; }));
}

double PathPair::deviation_sq(std::size_t eval_index) const {
  const auto j = static_cast<Eigen::Index>(eval_index);
  return (y_eval.col(j) - x_eval.col(j)).squaredNorm();
}

std::size_t PairedEnsemble::eval_index(double t) const {
  for (std::size_t i = 0; i < eval_times.size(); ++i) {
    if (nearly_equal(eval_times[i], t)) return i;
  }
  throw InvalidInput(fmt::format("time {} was not recorded by the ensemble", t));
}

unsigned worker_count(unsigned requested) {
  unsigned n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LEVY_CONTRACT_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

PairedEnsemble run_ensemble(const LevySystemModel& model, const InitLaw& init,
                            const IntegratorConfig& cfg, std::size_t count, const JumpMode& mode,
                            const EnsembleOptions& options) {
  if (count < 1) throw InvalidInput("ensemble count must be >= 1");
  model.validate();
  cfg.validate();
  if (init_dimension(init) != model.dim) throw InvalidInput("initial law dimension does not match the model");

  PairedEnsemble ensemble;
  ensemble.mode = mode;
  ensemble.seed = options.seed;
  ensemble.dim = model.dim;
  ensemble.model_name = model.name;
  ensemble.window = cfg.horizon;
  if (const auto* c = std::get_if<Conditional>(&mode); c && c->window) ensemble.window = *c->window;

  ensemble.eval_times = options.eval_times;
  ensemble.eval_times.push_back(cfg.horizon.start);
  std::sort(ensemble.eval_times.begin(), ensemble.eval_times.end());
  ensemble.eval_times.erase(std::unique(ensemble.eval_times.begin(), ensemble.eval_times.end(), nearly_equal),
                            ensemble.eval_times.end());
  for (double t : ensemble.eval_times) {
    if (!cfg.horizon.contains(t)) throw InvalidInput("evaluation time outside the horizon");
  }

  IntegratorConfig run_cfg = cfg;
  run_cfg.extra_times.insert(run_cfg.extra_times.end(), ensemble.eval_times.begin(), ensemble.eval_times.end());
  run_cfg.record_all = options.keep_paths;

  const LevySystemModel nominal = nominal_of(model);
  std::optional<SamplePath> shared_nominal;
  if (const auto* m = std::get_if<MatchedInit>(&init)) {
    shared_nominal = integrate(nominal, m->x0, run_cfg, RandomStream(options.seed, 0));
  }

  const auto n_eval = static_cast<Eigen::Index>(ensemble.eval_times.size());
  auto at_eval = [&](const SamplePath& p) {
    Matrix out(model.dim, n_eval);
    for (Eigen::Index j = 0; j < n_eval; ++j) out.col(j) = p.state_at(ensemble.eval_times[static_cast<std::size_t>(j)]);
    return out;
  };
  std::optional<Matrix> shared_y_eval;
  if (shared_nominal) shared_y_eval = at_eval(*shared_nominal);

  ensemble.pairs.resize(count);
  auto simulate_pair = [&](std::size_t i) {
    RandomStream stream(options.seed, i);
    RandomStream init_stream = stream.substream(kLaneInit);
    Vector x0, y0;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, MatchedInit>) {
            x0 = y0 = l.x0;
          } else if constexpr (std::is_same_v<T, MatchedGaussianInit>) {
            x0 = y0 = draw_initial(init_stream, l.mean, l.sd);
          } else {
            x0 = draw_initial(init_stream, l.mean_x, l.sd);
            y0 = draw_initial(init_stream, l.mean_y, l.sd);
          }
        },
        init);

    PathPair& pair = ensemble.pairs[i];
    pair.stream_id = i;
    SamplePath x_path = integrate(model, x0, run_cfg, stream, mode);
    pair.jump_times = x_path.jumps.times;
    pair.x_eval = at_eval(x_path);
    if (shared_y_eval) {
      pair.y_eval = *shared_y_eval;
      if (options.keep_paths) pair.nominal = shared_nominal;
    } else {
      SamplePath y_path = integrate(nominal, y0, run_cfg, stream);
      pair.y_eval = at_eval(y_path);
      if (options.keep_paths) pair.nominal = std::move(y_path);
    }
    if (options.keep_paths) pair.perturbed = std::move(x_path);
  };

  const unsigned workers = std::min<unsigned>(worker_count(options.threads), static_cast<unsigned>(count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) simulate_pair(i);
    return ensemble;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += workers) {
          try {
            simulate_pair(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return ensemble;
}

void write_paths_csv(std::ostream& out, std::span<const SamplePath> paths,
                     const std::string& experiment, std::uint64_t seed) {
  const int dim = paths.empty() ? 0 : paths.front().dim();
  out << "experiment,seed,version,path_id,time";
  for (int i = 1; i <= dim; ++i) out << ",x" << i;
  out << ",is_jump\n";
  for (const auto& p : paths) {
    std::size_t next_jump = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool jump = next_jump < p.jump_indices.size() && p.jump_indices[next_jump] == i;
      auto row = [&](const auto& state, int flag) {
        out << fmt::format("{},{},{},{},{:.17g}", experiment, seed, artifact_version(), p.stream_id,
                           p.times[i]);
        for (Eigen::Index d = 0; d < state.size(); ++d) out << fmt::format(",{:.17g}", state[d]);
        out << ',' << flag << '\n';
      };
      if (jump) {
        row(p.left_limits.col(static_cast<Eigen::Index>(next_jump)), 0);
        ++next_jump;
      }
      row(p.states.col(static_cast<Eigen::Index>(i)), jump ? 1 : 0);
    }
  }
}

}  // namespace levy_contract
