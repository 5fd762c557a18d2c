#pragma once

// Operator A = (1+|x|^alpha) Delta - |x|^beta on R^N: parameters, radial
// coefficient functions, derived constants and the closed-form envelope of
// the ground state.

#include <cmath>
#include <string>

namespace hkest {

struct DerivedConstants {
  double xi = 0.0;           // (beta-alpha)/2 + 1
  double b = 0.0;            // (beta-alpha+2)/(beta+alpha-2)
  double c0 = 0.0;           // ((xi-1)/2)^2 + (xi-1)/2 - (N-1)(N-3)/4
  double power_exp = 0.0;    // -(N-1)/2 - (beta-alpha)/4
  double phase_exp = 0.0;    // (beta-alpha+2)/2
  double phase_coeff = 0.0;  // 2/(beta-alpha+2)
};

class OperatorParams {
 public:
  int N() const noexcept { return n_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  bool sanity_mode() const noexcept { return sanity_; }
  bool corrupted() const noexcept { return corrupted_; }
  const DerivedConstants& derived() const noexcept { return derived_; }

  /// True when (N, alpha, beta) satisfy N>2, alpha>=2, beta>alpha-2.
  bool within_hypotheses() const noexcept;

  std::string describe() const;

 private:
  friend OperatorParams make_params(int, double, double, bool);
  friend OperatorParams corrupt_phase_for_testing(OperatorParams);
  int n_ = 3;
  double alpha_ = 2.0;
  double beta_ = 4.0;
  bool sanity_ = false;
  bool corrupted_ = false;
  DerivedConstants derived_{};
};

/// Validates and builds the parameter set. Throws InvalidInput naming the
/// violated hypothesis. With sanity_mode any alpha, beta >= 0 is accepted so
/// the exactly solvable cases can be used as oracles; in that mode an exponent
/// equal to 0 switches the corresponding term off (diffusion 1, potential 0).
OperatorParams make_params(int N, double alpha, double beta, bool sanity_mode = false);

/// Negative control: halves the envelope phase coefficient so that every
/// envelope-based check sees a wrong exponent. describe() marks the result.
OperatorParams corrupt_phase_for_testing(OperatorParams p);

/// Radial coefficient evaluators for one parameter set. All are finite for r >= 0.
class CoefficientFunctions {
 public:
  explicit CoefficientFunctions(const OperatorParams& p);

  /// Diffusion coefficient 1 + r^alpha.
  double a(double r) const;
  /// Potential r^beta.
  double V(double r) const;
  /// h = V / a.
  double h(double r) const { return V(r) / a(r); }
  /// Radial density of mu per unit solid angle, r^(N-1)/a(r).
  double rho_mu(double r) const { return std::pow(r, n_ - 1) / a(r); }

  /// h'/h and h''/h from closed forms, for r > 0.
  double log_h_prime(double r) const;
  double h_second_over_h(double r) const;

 private:
  int n_;
  double alpha_;
  double beta_;
  bool diffusion_on_;
  bool potential_on_;
};

/// Phi(r) = r^q exp(-phase_coeff r^p).
double envelope(const OperatorParams& p, double r);

/// Same as envelope() but reports whether r lies below 1, where the
/// two-sided bound is not claimed.
struct EnvelopeValue {
  double value;
  bool outside_guaranteed_range;
};
EnvelopeValue envelope_checked(const OperatorParams& p, double r);

/// Surface area of the unit sphere S^{N-1}.
double sphere_area(int N);

}  // namespace hkest
