#include <doctest.h>

#include <cmath>

#include "hkest/errors.hpp"
#include "hkest/model.hpp"

using namespace hkest;

TEST_CASE("derived constants for (3, 2, 4)") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto& d = p.derived();
  CHECK(d.xi == doctest::Approx(2.0));
  CHECK(d.b == doctest::Approx(1.0));
  CHECK(d.c0 == doctest::Approx(0.75));
  CHECK(d.power_exp == doctest::Approx(-1.5));
  CHECK(d.phase_exp == doctest::Approx(2.0));
  CHECK(d.phase_coeff == doctest::Approx(0.5));
}

TEST_CASE("hypotheses are enforced outside sanity mode") {
  CHECK_THROWS_AS(make_params(2, 2.0, 4.0), InvalidInput);
  CHECK_THROWS_AS(make_params(3, 1.5, 4.0), InvalidInput);
  CHECK_THROWS_AS(make_params(3, 4.0, 2.0), InvalidInput);
  CHECK_THROWS_AS(make_params(3, 0.0, 2.0), InvalidInput);
  CHECK_NOTHROW(make_params(3, 0.0, 2.0, true));
  CHECK_THROWS_AS(make_params(3, -1.0, 2.0, true), InvalidInput);
  CHECK_THROWS_AS(make_params(3, NAN, 2.0), InvalidInput);
}

TEST_CASE("coefficients") {
  const auto p = make_params(3, 2.0, 4.0);
  const CoefficientFunctions cf(p);
  for (double r : {0.0, 0.3, 1.0, 7.5}) {
    CHECK(cf.a(r) == doctest::Approx(1.0 + r * r));
    CHECK(cf.V(r) == doctest::Approx(std::pow(r, 4.0)));
  }
  CHECK(cf.rho_mu(2.0) == doctest::Approx(4.0 / 5.0));
  // h = r^4 / (1 + r^2): check log h' and h''/h against centred differences
  auto h = [](double r) { return std::pow(r, 4) / (1 + r * r); };
  for (double r : {1.0, 3.0, 20.0}) {
    const double e = 1e-4 * r;
    const double d1 = (h(r + e) - h(r - e)) / (2 * e);
    const double d2 = (h(r + e) - 2 * h(r) + h(r - e)) / (e * e);
    CHECK(cf.log_h_prime(r) == doctest::Approx(d1 / h(r)).epsilon(1e-6));
    CHECK(cf.h_second_over_h(r) == doctest::Approx(d2 / h(r)).epsilon(1e-5));
  }
}

TEST_CASE("sanity mode: zero exponents switch terms off") {
  const auto free = make_params(3, 0.0, 0.0, true);
  const CoefficientFunctions cf(free);
  CHECK(cf.a(5.0) == 1.0);
  CHECK(cf.V(5.0) == 0.0);
}

TEST_CASE("sphere area") {
  CHECK(sphere_area(3) == doctest::Approx(4.0 * M_PI));
  CHECK(sphere_area(4) == doctest::Approx(2.0 * M_PI * M_PI));
  CHECK(sphere_area(5) == doctest::Approx(8.0 * M_PI * M_PI / 3.0));
}

TEST_CASE("envelope is positive and decreasing at large r") {
  const auto p = make_params(3, 2.0, 4.0);
  double prev = envelope(p, 1.0);
  for (double r = 1.5; r < 20.0; r += 0.5) {
    const double v = envelope(p, r);
    CHECK(v > 0.0);
    CHECK(v < prev);
    prev = v;
  }
}
