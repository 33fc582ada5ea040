#ifndef LEVY_CONTRACT_SRC_QUADRATURE_HPP
#define LEVY_CONTRACT_SRC_QUADRATURE_HPP

#include "levy_contract/common.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace levy_contract::detail {

constexpr double kQuadAbsTol = 1e-9;
constexpr double kQuadRelTol = 1e-7;

/// Adaptive Gauss-Kronrod (15-point) on [a, b]; b may be +infinity.
/// Throws ConvergenceError when the error estimate misses max(abs, rel * |I|).
template <class F>
double integrate(F&& f, double a, double b, const char* what = "quadrature") {
  if (a == b) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, 15, kQuadRelTol * 1e-2, &error, &l1);
  if (!std::isfinite(value) || error > std::max(kQuadAbsTol, kQuadRelTol * std::max(std::abs(value), l1))) {
    throw ConvergenceError(std::string(what) + " did not converge", error);
  }
  return value;
}

}  // namespace levy_contract::detail

#endif  // LEVY_CONTRACT_SRC_QUADRATURE_HPP
