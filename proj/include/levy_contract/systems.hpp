#ifndef LEVY_CONTRACT_SYSTEMS_HPP
#define LEVY_CONTRACT_SYSTEMS_HPP

#include "levy_contract/common.hpp"
#include "levy_contract/noise.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace levy_contract {

using DriftFn = std::function<Vector(double, const Vector&)>;
using DiffusionFn = std::function<Matrix(double, const Vector&)>;
using JumpMapFn = std::function<MarkLaw(double, const Vector&)>;
using MatrixFn = std::function<Matrix(double)>;

/// dx = f(t,x) dt + sigma(t,x) dW + xi(t,x) dN.
///
/// An empty diffusion (or gamma == 0) gives the shot system, an empty jump map
/// (or eta == 0) gives the white system, and both give the nominal ODE.
struct LevySystemModel {
  std::string name;
  int dim = 1;
  int noise_dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  JumpMapFn jump_map;
  NoiseBounds noise;

  bool has_diffusion() const { return static_cast<bool>(diffusion) && noise.gamma > 0.0; }
  bool has_jumps() const { return static_cast<bool>(jump_map) && noise.eta > 0.0; }
  bool is_noise_free() const { return !has_diffusion() && !has_jumps(); }

  void validate() const;
};

/// dx = A(t) x dt + xi(t) dN with state-independent jump marks.
struct LtvSystemModel {
  std::string name;
  int dim = 1;
  MatrixFn a_matrix;
  std::function<MarkLaw(double)> jump_signal;
  NoiseBounds noise;
  /// Optional closed form of the integral of A over [tau, t]. Only used where
  /// A(t) commutes with it, so that Phi(t, tau) = exp(integral).
  std::function<Matrix(double, double)> a_integral;

  bool has_jumps() const { return static_cast<bool>(jump_signal) && noise.eta > 0.0; }

  void validate() const;
  LevySystemModel as_levy() const;
};

LevySystemModel nominal_of(const LevySystemModel& model);
LtvSystemModel nominal_of(const LtvSystemModel& model);

/// State-transition matrix Phi(t, tau) of x' = A(t) x.
///
/// Closed form when a_integral is declared and commutes with A; otherwise RK4
/// with step min(tol^{1/4}, (t - tau)/100), step-doubled until the Richardson
/// error estimate is below tol. Throws ConvergenceError with the achieved
/// residual if that does not happen within 12 halvings.
Matrix transition_matrix(const LtvSystemModel& model, double tau, double t, double tol = 1e-10);

struct ContinuityProbe {
  bool continuous = true;
  double worst_time = 0.0;
  double worst_jump = 0.0;
};

/// Finite-difference spot check that A(t) has no jump discontinuities on the window.
ContinuityProbe probe_continuity(const LtvSystemModel& model, const Window& window,
                                 int samples = 200);

/// One realization on a jump-adapted grid.
///
/// states(:, i) is the state at times[i]; at a jump grid point it is the
/// post-jump value and the left limit is kept in left_limits.
struct SamplePath {
  std::vector<double> times;
  Matrix states;
  std::vector<std::size_t> jump_indices;
  Matrix left_limits;
  JumpRecord jumps;
  std::uint64_t stream_id = 0;

  int dim() const { return static_cast<int>(states.rows()); }
  std::size_t size() const { return times.size(); }
  Vector state(std::size_t i) const { return states.col(static_cast<Eigen::Index>(i)); }
  /// State at a grid time; throws InvalidInput if t is not on the grid.
  Vector state_at(double t) const;
  std::size_t index_of(double t) const;
  int jump_count(const Window& w) const { return jumps.count_in(w); }
};

}  // namespace levy_contract

#endif  // LEVY_CONTRACT_SYSTEMS_HPP
