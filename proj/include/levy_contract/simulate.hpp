#ifndef LEVY_CONTRACT_SIMULATE_HPP
#define LEVY_CONTRACT_SIMULATE_HPP

#include "levy_contract/noise.hpp"
#include "levy_contract/systems.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace levy_contract {

struct IntegratorConfig {
  double dt = 1e-3;
  Window horizon{0.0, 1.0};
  double tol = 1e-8;
  double blowup_threshold = 1e8;
  /// Times forced onto the grid (evaluation times).
  std::vector<double> extra_times;
  /// When false only the horizon ends, extra_times and jump points are stored.
  bool record_all = true;

  void validate() const;
};

/// Jumps drawn from the model's Poisson process over the horizon.
struct Unconditional {};

/// Exactly k jumps inside `window` (defaults to the horizon); the remainder of
/// the horizon, if any, still sees ordinary Poisson arrivals.
struct Conditional {
  int k = 0;
  std::optional<Window> window;
};

/// Jump times fixed by the caller; marks are still drawn from the jump map.
struct FixedJumps {
  std::vector<double> times;
};

using JumpMode = std::variant<Unconditional, Conditional, FixedJumps>;

/// Jump-adapted Euler-Maruyama for noisy models, RK4 for noise-free ones.
///
/// Stream lanes: 1 jump times, 2 marks, 3 Brownian increments, so a model
/// with eta = 0 consumes the same Brownian draws as its white-only twin.
SamplePath integrate(const LevySystemModel& model, const Vector& x0, const IntegratorConfig& cfg,
                     const RandomStream& stream, const JumpMode& mode = Unconditional{});

/// Exact LTV solution x(t) = Phi(t,s) x(s) + sum_i Phi(t,T_i) xi(T_i) on
/// output_grid (jump times are merged in). Propagates transition_matrix errors.
SamplePath integrate_ltv_exact(const LtvSystemModel& model, const Vector& x0, const Window& window,
                               const JumpRecord& jumps, std::span<const double> output_grid,
                               double tol = 1e-10);

/// Same formula evaluated directly at a single time, without marching.
Vector ltv_exact_state(const LtvSystemModel& model, const Vector& x0, double s,
                       const JumpRecord& jumps, double t, double tol = 1e-10);

struct MatchedInit {
  Vector x0;
};

/// x0 = y0 ~ N(mean, sd^2 I).
struct MatchedGaussianInit {
  Vector mean;
  double sd = 1.0;
};

/// x0 ~ N(mean_x, sd^2 I) and y0 ~ N(mean_y, sd^2 I) independently.
struct IndependentGaussianInit {
  Vector mean_x;
  Vector mean_y;
  double sd = 1.0;
};

using InitLaw = std::variant<MatchedInit, MatchedGaussianInit, IndependentGaussianInit>;

int init_dimension(const InitLaw& law);

struct EnsembleOptions {
  std::uint64_t seed = 0;
  /// States of both paths are recorded at these times (horizon start is always added).
  std::vector<double> eval_times;
  bool keep_paths = false;
  /// 0 means the LEVY_CONTRACT_THREADS cap, else hardware concurrency.
  unsigned threads = 0;
};

struct PathPair {
  std::uint64_t stream_id = 0;
  std::vector<double> jump_times;
  Matrix x_eval;  // dim x eval_times
  Matrix y_eval;
  std::optional<SamplePath> perturbed;
  std::optional<SamplePath> nominal;

  int jump_count(const Window& w) const;
  double deviation_sq(std::size_t eval_index) const;
};

struct PairedEnsemble {
  std::vector<PathPair> pairs;
  std::vector<double> eval_times;
  JumpMode mode;
  Window window;  // analysis window
  std::uint64_t seed = 0;
  int dim = 1;
  std::string model_name;

  std::size_t count() const { return pairs.size(); }
  /// Index of t in eval_times; throws InvalidInput if absent.
  std::size_t eval_index(double t) const;
};

/// `count` (perturbed, nominal) pairs; path i uses RandomStream(seed, i).
PairedEnsemble run_ensemble(const LevySystemModel& model, const InitLaw& init,
                            const IntegratorConfig& cfg, std::size_t count, const JumpMode& mode,
                            const EnsembleOptions& options = {});

/// Worker count honouring LEVY_CONTRACT_THREADS.
unsigned worker_count(unsigned requested = 0);

/// Columns: experiment,seed,version,path_id,time,x1..xn,is_jump. A jump time
/// produces two rows: the left limit (is_jump=0) then the post-jump state (is_jump=1).
void write_paths_csv(std::ostream& out, std::span<const SamplePath> paths,
                     const std::string& experiment, std::uint64_t seed);

}  // namespace levy_contract

#endif  // LEVY_CONTRACT_SIMULATE_HPP
