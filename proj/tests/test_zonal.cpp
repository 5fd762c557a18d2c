#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <cmath>

#include "hkest/model.hpp"
#include "hkest/zonal.hpp"

using namespace hkest;

TEST_CASE("N = 3: Z_l = (2l + 1) P_l / (4 pi)") {
  for (int l = 0; l <= 40; l += 3)
    for (double s : {-1.0, -0.3, 0.0, 0.7, 1.0})
      CHECK(zonal_kernel(l, 3, s) ==
            doctest::Approx((2 * l + 1) * boost::math::legendre_p(l, s) / (4 * M_PI)).epsilon(1e-12));
}

TEST_CASE("N = 4: Z_l = (l + 1) U_l / (2 pi^2)") {
  for (int l = 0; l <= 30; l += 5)
    for (double th : {0.3, 1.1, 2.5}) {
      const double u = std::sin((l + 1) * th) / std::sin(th);
      CHECK(zonal_kernel(l, 4, std::cos(th)) == doctest::Approx((l + 1) * u / (2 * M_PI * M_PI)).epsilon(1e-11));
    }
}

TEST_CASE("harmonic dimension") {
  using boost::math::binomial_coefficient;
  for (int N : {3, 4, 5, 7})
    for (int l = 0; l <= 12; ++l) {
      const double expect = binomial_coefficient<double>(l + N - 1, N - 1) -
                            (l >= 2 ? binomial_coefficient<double>(l + N - 3, N - 1) : 0.0);
      CHECK(harmonic_dimension(l, N) == doctest::Approx(expect));
      CHECK(zonal_kernel(l, N, 1.0) * sphere_area(N) == doctest::Approx(expect));
    }
}

TEST_CASE("Funk-Hecke contractions on S^2") {
  // x = north pole, z at polar angle 0.9; y ranges over the sphere
  const double zt = 0.9;
  const double z[3] = {std::sin(zt), 0.0, std::cos(zt)};
  const int nphi = 64;
  auto contract = [&](int l, int m) {
    return boost::math::quadrature::gauss<double, 30>::integrate(
        [&](double c) {
          const double s = std::sqrt(1 - c * c);
          double acc = 0.0;
          for (int k = 0; k < nphi; ++k) {
            const double ph = 2 * M_PI * k / nphi;
            const double yz = s * std::cos(ph) * z[0] + c * z[2];
            acc += zonal_kernel(l, 3, c) * zonal_kernel(m, 3, yz);
          }
          return acc * 2 * M_PI / nphi;
        },
        -1.0, 1.0);
  };
  for (int l = 0; l <= 6; ++l)
    for (int m = 0; m <= 6; ++m) {
      const double expect = l == m ? zonal_kernel(l, 3, std::cos(zt)) : 0.0;
      CHECK(contract(l, m) == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
    }
}
