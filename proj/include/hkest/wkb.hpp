#pragma once

// Asymptotic construction of a radial supersolution/subsolution
//
//   f(r) = r^{-(N-1)/2} h(r)^{-1/4} exp(-int_R^r sqrt(h) - int_R^r v),
//   v(r) = sum_{i=1..k} c_i r^{-(i xi + 1)},
//
// whose correction coefficients c_i are fixed by an algebraic recurrence so
// that r^2 g(r) -> lambda, where g is the residual in
// f'' + (N-1)/r f' = (h + g) f.

#include <string>
#include <vector>

#include "hkest/model.hpp"

namespace hkest {

struct WkbExpansion {
  double lambda = 0.0;
  int order_k = 1;
  std::vector<double> coeffs;  // c_1 .. c_k
  double base_radius = 1.0;    // lower integration limit R
  double xi = 1.0;
  double c0 = 0.0;
  bool order_override = false;
  /// Set when k xi + 2 - alpha <= 0 and the caller forced the order.
  bool order_below_threshold = false;
};

/// Smallest k with k xi + 2 - alpha > 0, plus one extra order.
int default_wkb_order(const OperatorParams& p);

/// Solves 2c1 + c0 = lambda, 2 c1 xi + 2 c2 = 0 and
/// xi (i+1) c_i + 2 c_{i+1} + sum_{j+s=i} c_j c_s = 0 (2 <= i <= k-1).
/// Throws InvalidInput for k < 1. An order with k xi + 2 - alpha <= 0 is
/// accepted but flagged in order_below_threshold (allow_low_order records
/// that the caller asked for it explicitly).
WkbExpansion wkb_coefficients(const OperatorParams& p, double lambda, int k,
                              double base_radius = 1.0, bool allow_low_order = false);

/// Largest residual of the recurrence relations, each relative to its largest
/// term (absolute below 1).
double recurrence_residual(const WkbExpansion& e);

double v_lambda(const WkbExpansion& e, double r);
double v_lambda_prime(const WkbExpansion& e, double r);

/// int_R^r v_lambda in closed form.
double v_integral(const WkbExpansion& e, double r);
/// Limit of v_integral as r -> infinity.
double v_integral_limit(const WkbExpansion& e);

/// int_R^r sqrt(h(s)) ds by adaptive Gauss-Kronrod, relative tolerance rel_tol.
/// Throws ConvergenceFailure carrying the achieved error estimate.
double phase_integral(const OperatorParams& p, double R, double r, double rel_tol = 1e-10);

double f_eval(const OperatorParams& p, const WkbExpansion& e, double r);

/// The residual g(r) from closed-form derivatives of h and v.
double residual_g(const OperatorParams& p, const WkbExpansion& e, double r);

struct SlopeReport {
  double measured_slope = 0.0;
  double expected_slope = 0.0;
  double fit_rms_residual = 0.0;
  double r_squared = 0.0;
  bool vacuous = false;  // every |r^2 g - lambda| below machine noise
  std::vector<double> r;
  std::vector<double> deviation;  // r^2 g(r) - lambda
  std::string note;
};

/// Fits log|r^2 g(r) - lambda| against log r over log-spaced samples.
SlopeReport residual_decay_report(const OperatorParams& p, const WkbExpansion& e, double r_lo,
                                  double r_hi, int samples);

}  // namespace hkest
