#pragma once

namespace hkest {

/// Gegenbauer polynomial C_n^{lambda}(x) by the three-term recurrence.
double gegenbauer(int n, double lambda, double x);

/// Reproducing kernel of degree-l spherical harmonics on S^{N-1}:
/// Z_l(s) = (2l+N-2)/((N-2) |S^{N-1}|) C_l^{(N-2)/2}(s).
/// Normalized so that int Z_l(x.y) Z_m(y.z) dsigma(y) = delta_lm Z_l(x.z)
/// and int Z_l(x.y) dsigma(y) = delta_l0.
double zonal_kernel(int ell, int N, double cos_theta);

/// Dimension of the space of degree-l harmonics in N variables, Z_l(1)|S^{N-1}|.
double harmonic_dimension(int ell, int N);

}  // namespace hkest
