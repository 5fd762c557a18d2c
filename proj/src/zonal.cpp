#include "hkest/zonal.hpp"

#include "hkest/errors.hpp"
#include "hkest/model.hpp"

namespace hkest {

double gegenbauer(int n, double lambda, double x) {
  if (n < 0) throw InvalidInput("gegenbauer degree must be >= 0");
  if (n == 0) return 1.0;
  double c0 = 1.0, c1 = 2.0 * lambda * x;
  for (int k = 2; k <= n; ++k) {
    const double c2 = (2.0 * x * (k + lambda - 1.0) * c1 - (k + 2.0 * lambda - 2.0) * c0) / k;
    c0 = c1;
    c1 = c2;
  }
  return c1;
}

double zonal_kernel(int ell, int N, double cos_theta) {
  if (N <= 2) throw InvalidInput("zonal kernel needs N > 2");
  const double lam = (N - 2) / 2.0;
  return (2.0 * ell + N - 2.0) / ((N - 2.0) * sphere_area(N)) * gegenbauer(ell, lam, cos_theta);
}

double harmonic_dimension(int ell, int N) { return zonal_kernel(ell, N, 1.0) * sphere_area(N); }

}  // namespace hkest
