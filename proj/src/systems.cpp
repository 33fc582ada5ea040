#include "levy_contract/systems.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace levy_contract {

namespace {

Matrix rk4_transition(const MatrixFn& a, double tau, double t, double h) {
  const auto steps = static_cast<long>(std::ceil((t - tau) / h - 1e-9));
  const double step = (t - tau) / static_cast<double>(steps);
  const Eigen::Index n = a(tau).rows();
  Matrix phi = Matrix::Identity(n, n);
  double time = tau;
  for (long i = 0; i < steps; ++i) {
    const Matrix a0 = a(time);
    const Matrix a_mid = a(time + 0.5 * step);
    const Matrix a1 = a(time + step);
    const Matrix k1 = a0 * phi;
    const Matrix k2 = a_mid * (phi + 0.5 * step * k1);
    const Matrix k3 = a_mid * (phi + 0.5 * step * k2);
    const Matrix k4 = a1 * (phi + step * k3);
    phi += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    time = tau + static_cast<double>(i + 1) * step;
  }
  return phi;
}

}  // namespace

void LevySystemModel::validate() const {
  if (dim < 1) throw InvalidInput("model '" + name + "': dim must be >= 1");
  if (!drift) throw InvalidInput("model '" + name + "': drift is required");
  if (diffusion && noise_dim < 1) throw InvalidInput("model '" + name + "': noise_dim must be >= 1");
  noise.validate();
}

void LtvSystemModel::validate() const {
  if (dim < 1) throw InvalidInput("LTV model '" + name + "': dim must be >= 1");
  if (!a_matrix) throw InvalidInput("LTV model '" + name + "': A(t) is required");
  const Matrix a0 = a_matrix(0.0);
  if (a0.rows() != dim || a0.cols() != dim) {
    throw InvalidInput("LTV model '" + name + "': A(t) must be dim x dim");
  }
  noise.validate();
}

LevySystemModel LtvSystemModel::as_levy() const {
  LevySystemModel m;
  m.name = name;
  m.dim = dim;
  m.noise_dim = dim;
  m.noise = noise;
  m.noise.gamma = 0.0;
  auto a = a_matrix;
  m.drift = [a](double t, const Vector& x) -> Vector { return a(t) * x; };
  if (jump_signal) {
    auto signal = jump_signal;
    m.jump_map = [signal](double t, const Vector&) { return signal(t); };
  }
  return m;
}

LevySystemModel nominal_of(const LevySystemModel& model) {
  LevySystemModel m = model;
  m.diffusion = nullptr;
  m.jump_map = nullptr;
  m.noise.gamma = 0.0;
  m.noise.eta = 0.0;
  return m;
}

LtvSystemModel nominal_of(const LtvSystemModel& model) {
  LtvSystemModel m = model;
  m.jump_signal = nullptr;
  m.noise.gamma = 0.0;
  m.noise.eta = 0.0;
  return m;
}

Matrix transition_matrix(const LtvSystemModel& model, double tau, double t, double tol) {
  if (tau > t) throw InvalidInput("transition_matrix requires tau <= t");
  if (!(tol > 0.0)) throw InvalidInput("transition_matrix tolerance must be > 0");
  const Matrix a_tau = model.a_matrix(tau);
  const Eigen::Index n = a_tau.rows();
  if (t == tau) return Matrix::Identity(n, n);

  if (model.a_integral) {
    const Matrix integral = model.a_integral(tau, t);
    const Matrix a_t = model.a_matrix(t);
    const double scale = std::max(1.0, a_t.norm() * integral.norm());
    if ((a_t * integral - integral * a_t).norm() <= 1e-12 * scale) {
      return integral.exp();
    }
  }

  double h = std::min(std::pow(tol, 0.25), (t - tau) / 100.0);
  Matrix coarse = rk4_transition(model.a_matrix, tau, t, h);
  double residual = 0.0;
  for (int halving = 0; halving < 12; ++halving) {
    h *= 0.5;
    Matrix fine = rk4_transition(model.a_matrix, tau, t, h);
    residual = (fine - coarse).norm() / 15.0;
    if (residual <= tol * std::max(1.0, fine.norm())) return fine;
    coarse = std::move(fine);
  }
  throw ConvergenceError("transition_matrix: RK4 did not reach tolerance", residual);
}

ContinuityProbe probe_continuity(const LtvSystemModel& model, const Window& window, int samples) {
  ContinuityProbe probe;
  const int n = std::max(samples, 2);
  for (int i = 0; i < n; ++i) {
    const double t = window.start + window.length() * (static_cast<double>(i) + 0.5) / n;
    const double scale = 1.0 + model.a_matrix(t).norm();
    const double d1 = (model.a_matrix(t + 1e-6) - model.a_matrix(t - 1e-6)).norm();
    const double d2 = (model.a_matrix(t + 1e-7) - model.a_matrix(t - 1e-7)).norm();
    // A continuous A shrinks the gap roughly tenfold; a jump keeps it.
    if (d1 > 1e-8 * scale && d2 > 0.5 * d1) {
      if (d2 > probe.worst_jump) {
        probe.continuous = false;
        probe.worst_jump = d2;
        probe.worst_time = t;
      }
    }
  }
  return probe;
}

std::size_t SamplePath::index_of(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12 * std::max(1.0, std::abs(t)));
  if (it == times.end() || std::abs(*it - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    throw InvalidInput("time " + std::to_string(t) + " is not on the sample-path grid");
  }
  return static_cast<std::size_t>(it - times.begin());
}

Vector SamplePath::state_at(double t) const { return state(index_of(t)); }

}  // namespace levy_contract
