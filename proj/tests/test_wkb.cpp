#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hkest/model.hpp"
#include "hkest/wkb.hpp"

using namespace hkest;

TEST_CASE("golden coefficients for (3, 2, 4), lambda = 0, k = 3") {
  const auto e = wkb_coefficients(make_params(3, 2.0, 4.0), 0.0, 3);
  REQUIRE(e.coeffs.size() == 3);
  CHECK(e.coeffs[0] == -0.375);
  CHECK(e.coeffs[1] == 0.75);
  CHECK(e.coeffs[2] == -2.3203125);
  CHECK(recurrence_residual(e) < 1e-12);
}

TEST_CASE("lambda = c0 gives the zero expansion and a vacuous slope") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto e = wkb_coefficients(p, p.derived().c0, 4);
  for (double c : e.coeffs) CHECK(c == 0.0);
}

TEST_CASE("recurrence residual across a random parameter sweep") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(3, 8);
  std::uniform_real_distribution<double> alpha(2.0, 8.0), gap(0.1, 6.0), lambda(-5.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const double a = alpha(rng);
    const auto p = make_params(dim(rng), a, a - 2.0 + gap(rng));
    const auto e = wkb_coefficients(p, lambda(rng), default_wkb_order(p), 1.0, true);
    CHECK(recurrence_residual(e) < 1e-12);
  }
}

TEST_CASE("residual decays like r^-2 for (3, 2, 4)") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto e = wkb_coefficients(p, 0.0, 3);
  const auto rep = residual_decay_report(p, e, 10.0, 100.0, 50);
  CHECK_FALSE(rep.vacuous);
  CHECK(rep.measured_slope <= -1.9);
  CHECK(rep.expected_slope == doctest::Approx(-2.0));
}

TEST_CASE("f solves Laplacian f = (h + g) f") {
  for (auto p : {make_params(3, 2.0, 4.0), make_params(4, 4.0, 4.0), make_params(5, 3.0, 6.0)}) {
    const auto e = wkb_coefficients(p, -1.25, default_wkb_order(p), 1.0, true);
    const CoefficientFunctions cf(p);
    for (double r : {2.0, 3.5, 6.0}) {
      // Richardson-extrapolated centred differences
      auto lap = [&](double s) {
        const double fm = f_eval(p, e, r - s), f0 = f_eval(p, e, r), fp = f_eval(p, e, r + s);
        return (fp - 2 * f0 + fm) / (s * s) + (p.N() - 1) / r * (fp - fm) / (2 * s);
      };
      const double s = 2e-3 * r / std::max(1.0, r * r / 4);  // f varies on the scale 1/r
      const double l = (4 * lap(s / 2) - lap(s)) / 3;
      const double rhs = (cf.h(r) + residual_g(p, e, r)) * f_eval(p, e, r);
      CHECK(std::abs(l - rhs) <= 1e-6 * std::abs(rhs));
    }
  }
}

TEST_CASE("low orders are flagged") {
  const auto p = make_params(3, 6.0, 4.5);
  const auto e = wkb_coefficients(p, 0.0, 1, 1.0, true);
  CHECK(e.order_below_threshold);
  CHECK(e.order_k * e.xi + 2.0 - p.alpha() <= 0.0);
}
