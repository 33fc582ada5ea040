#include "levy_contract/bounds.hpp"

#include <doctest.h>

#include <cmath>

using namespace levy_contract;

namespace {

PsiSpec unit_spec(int k, TimeLaw law, double d0 = 1.0) {
  PsiSpec spec;
  spec.k = k;
  spec.d0 = d0;
  spec.time_law = law;
  return spec;
}

/// E[e^{-x B}] for B ~ Beta(r, k - r + 1), by its hypergeometric series.
double beta_mgf(int r, int k, double x) {
  double term = 1.0, sum = 1.0;
  for (int j = 0; j < 200; ++j) {
    term *= -x * (r + j) / ((k + 1.0 + j) * (j + 1.0));
    sum += term;
  }
  return sum;
}

/// sum_r (c1 + c2 (k - r)) m_r with c1 = 2 d0 and c2 = 2 (unit constants).
template <class Moment>
double psi_oracle(int k, double d0, Moment moment) {
  double total = 0.0;
  for (int r = 1; r <= k; ++r) total += (2.0 * d0 + 2.0 * (k - r)) * moment(r);
  return total;
}

constexpr PsiMethod kLoose[] = {PsiMethod::loose_first_term, PsiMethod::loose_max_nng, PsiMethod::loose_sum_exp};

}  // namespace

TEST_CASE("psi_k closed forms for one jump") {
  for (double beta : {0.5, 1.0, 3.0}) {
    for (double lambda : {0.5, 2.0}) {
      PsiSpec g = unit_spec(1, TimeLaw::gamma_unconditional);
      g.beta = beta;
      g.lambda = lambda;
      CHECK(psi_k(g).value == doctest::Approx(2.0 * lambda / (lambda + beta)).epsilon(1e-6));
    }
    for (double delta : {0.2, 1.0, 4.0}) {
      PsiSpec u = unit_spec(1, TimeLaw::uniform_order_statistics);
      u.beta = beta;
      u.window = {1.0, 1.0 + delta};
      CHECK(psi_k(u).value == doctest::Approx(2.0 * (1.0 - std::exp(-beta * delta)) / (beta * delta)).epsilon(1e-6));
    }
  }
  PsiSpec empty = unit_spec(0, TimeLaw::uniform_order_statistics);
  CHECK(psi_k(empty).value == 0.0);
}

TEST_CASE("psi_k quadrature matches the order-statistic series") {
  const double frozen_uniform[] = {1.2642411176571153, 4.0, 8.207276647028657};
  const double frozen_gamma[] = {1.0, 2.5, 4.25};
  for (int k = 1; k <= 3; ++k) {
    CAPTURE(k);
    const double uniform = psi_oracle(k, 1.0, [k](int r) { return beta_mgf(r, k, 1.0); });
    const double gamma = psi_oracle(k, 1.0, [](int r) { return std::pow(0.5, r); });
    CHECK(uniform == doctest::Approx(frozen_uniform[k - 1]).epsilon(1e-12));
    CHECK(gamma == doctest::Approx(frozen_gamma[k - 1]).epsilon(1e-12));
    CHECK(psi_k(unit_spec(k, TimeLaw::uniform_order_statistics)).value == doctest::Approx(uniform).epsilon(1e-9));
    CHECK(psi_k(unit_spec(k, TimeLaw::gamma_unconditional)).value == doctest::Approx(gamma).epsilon(1e-9));
  }
  PsiSpec wide = unit_spec(5, TimeLaw::uniform_order_statistics, 0.3);
  wide.beta = 2.0;
  wide.window = {0.0, 2.5};
  CHECK(psi_k(wide).value ==
        doctest::Approx(psi_oracle(5, 0.3, [](int r) { return beta_mgf(r, 5, 5.0); })).epsilon(1e-9));
}

TEST_CASE("Monte Carlo psi_k agrees with quadrature under both time laws") {
  for (TimeLaw law : {TimeLaw::uniform_order_statistics, TimeLaw::gamma_unconditional}) {
    for (int k = 1; k <= 3; ++k) {
      CAPTURE(k);
      const PsiSpec spec = unit_spec(k, law);
      const PsiValue mc = psi_k(spec, {PsiMethod::monte_carlo, 100000, 17, static_cast<std::uint64_t>(k)});
      const double exact = psi_k(spec).value;
      CHECK(mc.std_err > 0.0);
      CHECK(std::abs(mc.value - exact) <= 3.0 * mc.std_err);
    }
  }
}

TEST_CASE("loose relaxations bound psi_k from above") {
  for (TimeLaw law : {TimeLaw::uniform_order_statistics, TimeLaw::gamma_unconditional}) {
    for (int k = 1; k <= 4; ++k) {
      for (double delta : {0.1, 1.0, 5.0}) {
        CAPTURE(k);
        CAPTURE(delta);
        PsiSpec spec = unit_spec(k, law, 0.5);
        spec.window = {0.0, delta};
        const double exact = psi_k(spec).value;
        for (PsiMethod method : kLoose) {
          const PsiValue loose = psi_k(spec, {method});
          CHECK(loose.is_upper_bound);
          CHECK(loose.value >= exact - 1e-12);
        }
      }
    }
  }
  // The first-term relaxation is exact for k = 1.
  const PsiSpec one = unit_spec(1, TimeLaw::uniform_order_statistics);
  CHECK(psi_k(one, {PsiMethod::loose_first_term}).value == doctest::Approx(psi_k(one).value).epsilon(1e-12));
}

TEST_CASE("psi_k scales with eta squared when the initial error is zero") {
  for (TimeLaw law : {TimeLaw::uniform_order_statistics, TimeLaw::gamma_unconditional}) {
    PsiSpec spec = unit_spec(3, law, 0.0);
    const double base = psi_k(spec).value;
    spec.eta *= 2.0;
    CHECK(psi_k(spec).value == doctest::Approx(4.0 * base).epsilon(1e-12));
  }
  // psi_1 has no pair term, so it vanishes with d0.
  CHECK(psi_k(unit_spec(1, TimeLaw::uniform_order_statistics, 0.0)).value == 0.0);
}

TEST_CASE("psi_k derivative in the window end") {
  PsiSpec spec = unit_spec(1, TimeLaw::uniform_order_statistics);
  const PsiEvaluator ev(spec, {});
  // d/dDelta of 2 (1 - e^{-Delta}) / Delta at Delta = 1 is 2 (2 e^{-1} - 1).
  CHECK(ev.derivative(1.0).value == doctest::Approx(2.0 * (2.0 * std::exp(-1.0) - 1.0)).epsilon(1e-6));
  CHECK(ev.value(0.5).value == doctest::Approx(2.0 * (1.0 - std::exp(-0.5)) / 0.5).epsilon(1e-9));
  // At the window start psi_k tends to c1 k and the slope to -c1 beta k / 2.
  CHECK(ev.value(0.0).value == doctest::Approx(2.0));
  CHECK(ev.derivative(0.0).value == doctest::Approx(-1.0).epsilon(1e-6));

  const PsiEvaluator gamma(unit_spec(2, TimeLaw::gamma_unconditional), {});
  CHECK(gamma.derivative(0.7).value == 0.0);
  CHECK(gamma.value(0.7).value == gamma.value(3.0).value);
}

TEST_CASE("psi_k names and validation") {
  CHECK(psi_method_from_string("mc") == PsiMethod::monte_carlo);
  CHECK(psi_method_from_string("loose_sum_exp") == PsiMethod::loose_sum_exp);
  CHECK_THROWS_AS(psi_method_from_string("simpson"), InvalidInput);
  CHECK(time_law_from_string("gamma") == TimeLaw::gamma_unconditional);
  CHECK(time_law_from_string("uniform") == TimeLaw::uniform_order_statistics);
  PsiSpec bad = unit_spec(1, TimeLaw::uniform_order_statistics);
  bad.kappa = 0.0;
  CHECK_THROWS_AS(psi_k(bad), InvalidInput);
}

TEST_CASE("LTV shot kappa on the scalar unit example") {
  // P = 1, kappa = beta = 1, alpha = 1, eta = 1, d0 = 0, window [0, 1], uniform law.
  // Reference values from an independent hypergeometric evaluation of psi_k.
  const double frozen[] = {0.1353352832366127, 0.05882862668844191, -0.2295199696588357};
  TransitionEnvelope env;
  env.kappa = env.beta = 1.0;
  env.passed = true;
  for (int k = 1; k <= 3; ++k) {
    CAPTURE(k);
    const BoundParams b = shot_ltv_bound({1.0, 1.0, 1.0}, env, unit_spec(k, TimeLaw::uniform_order_statistics, 0.0));
    CHECK(b.kind == BoundKind::shot_ltv);
    CHECK(b.beta == 2.0);
    CHECK(b.strategy == "quadrature/uniform_order_statistics");
    CHECK(b.kappa(0.0, 1.0) == doctest::Approx(frozen[k - 1]).epsilon(1e-6));
    CHECK(b.warnings.empty() == (k == 1));
  }
  // Gamma law: psi_k is constant in tau, leaving only the jump term.
  const BoundParams g = shot_ltv_bound({1.0, 1.0, 1.0}, env, unit_spec(3, TimeLaw::gamma_unconditional, 0.0));
  CHECK(g.kappa(0.0, 1.0) == doctest::Approx(3.0 * std::exp(-2.0)).epsilon(1e-12));

  env.passed = false;
  const BoundParams unverified = shot_ltv_bound({1.0, 1.0, 1.0}, env, unit_spec(1, TimeLaw::uniform_order_statistics));
  CHECK_FALSE(unverified.warnings.empty());
  CHECK_THROWS_AS(shot_ltv_bound({0.0, 1.0, 1.0}, env, unit_spec(1, TimeLaw::uniform_order_statistics)), InvalidInput);
}
