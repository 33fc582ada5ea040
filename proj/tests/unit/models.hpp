#ifndef LEVY_CONTRACT_TEST_MODELS_HPP
#define LEVY_CONTRACT_TEST_MODELS_HPP

#include "levy_contract/systems.hpp"

#include <cmath>

namespace levy_contract::testing {

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

/// dx = -a x dt + gamma dW.
inline LevySystemModel scalar_ou(double a = 1.0, double gamma = 1.0) {
  LevySystemModel m;
  m.name = "scalar_ou";
  m.drift = [a](double, const Vector& x) -> Vector { return -a * x; };
  m.diffusion = [gamma](double, const Vector&) -> Matrix { return Matrix::Constant(1, 1, gamma); };
  m.noise = {gamma, 0.0, 1.0};
  return m;
}

/// dx = -a x dt + eta dN with unit intensity lambda.
inline LevySystemModel scalar_shot(double a = 1.0, double eta = 1.0, double lambda = 1.0) {
  LevySystemModel m;
  m.name = "scalar_shot";
  m.drift = [a](double, const Vector& x) -> Vector { return -a * x; };
  m.jump_map = [eta](double, const Vector&) -> MarkLaw { return ConstantMark{Vector::Constant(1, eta)}; };
  m.noise = {0.0, eta, lambda};
  return m;
}

inline LtvSystemModel scalar_shot_ltv(double a = 1.0, double eta = 1.0, double lambda = 1.0) {
  LtvSystemModel m;
  m.name = "scalar_shot_ltv";
  m.a_matrix = [a](double) -> Matrix { return Matrix::Constant(1, 1, -a); };
  m.jump_signal = [eta](double) -> MarkLaw { return ConstantMark{Vector::Constant(1, eta)}; };
  m.noise = {0.0, eta, lambda};
  return m;
}

/// A = diag(-1, -2), constant marks eta (1, 1) / sqrt(2).
inline LtvSystemModel diagonal_ltv(double eta = 1.0, double lambda = 1.0) {
  LtvSystemModel m;
  m.name = "diagonal_ltv";
  m.dim = 2;
  m.a_matrix = [](double) -> Matrix { return Eigen::Vector2d(-1.0, -2.0).asDiagonal(); };
  m.a_integral = [](double tau, double t) -> Matrix {
    return Eigen::Vector2d(-(t - tau), -2.0 * (t - tau)).asDiagonal();
  };
  m.jump_signal = [eta](double) -> MarkLaw { return ConstantMark{Vector::Constant(2, eta / std::sqrt(2.0))}; };
  m.noise = {0.0, eta, lambda};
  return m;
}

/// E_k[(y - x)^2](t) for dx = -x dt + dN, unit marks, matched start, k
/// uniform jump times on [0, t]: k (1 - e^{-2t}) / (2t) + k (k - 1) ((1 - e^{-t}) / t)^2.
inline double shot_conditional_oracle(int k, double t) {
  const double single = (1.0 - std::exp(-2.0 * t)) / (2.0 * t);
  const double cross = (1.0 - std::exp(-t)) / t;
  return k * single + k * (k - 1.0) * cross * cross;
}

}  // namespace levy_contract::testing

#endif  // LEVY_CONTRACT_TEST_MODELS_HPP
