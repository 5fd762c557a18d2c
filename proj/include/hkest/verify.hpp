#pragma once

// Numerical checks of the ground-state, eigenfunction and heat-kernel bounds.
// Each checker fits the constants of one bound on a sampling lattice and
// returns a BoundReport; none of them certifies a true supremum.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hkest/heat.hpp"
#include "hkest/model.hpp"
#include "hkest/spectral.hpp"

namespace hkest {

enum class Verdict { Pass, Fail, InconclusiveWithDrift, Skipped };

/// "pass", "fail", "inconclusive-with-drift", "skipped".
const char* to_string(Verdict v) noexcept;

struct NamedValue {
  std::string name;
  double value = 0.0;
};

struct BoundReport {
  std::string id;
  std::vector<NamedValue> constants;
  Verdict verdict = Verdict::Pass;
  std::vector<NamedValue> worst_point;  // coordinates, last entry "margin"
  std::string lattice;
  std::vector<std::string> notes;

  bool has(std::string_view name) const;
  /// Throws std::out_of_range for an unknown name.
  double constant(std::string_view name) const;
  void set(std::string name, double value);
};

/// JSON object {id, constants, verdict, worst_point, lattice, notes}.
std::string to_json(const BoundReport& r, int indent = 2);
/// Array of reports sorted by id.
std::string to_json(std::vector<BoundReport> reports, int indent = 2);

/// The report of a checker whose hypotheses exclude p (sanity mode).
BoundReport skipped_report(std::string id, const OperatorParams& p);

/// 24 log-spaced radii on [1, 0.8 r_max] by default.
std::vector<double> envelope_radii(const RadialGrid& grid, int count = 24);
/// count cosines evenly spaced on [-1, 1].
std::vector<double> lattice_cosines(int count = 8);
/// Full-space ground state psi_rad / sqrt|S^{N-1}| at r, from grid samples.
double full_space_value(const OperatorParams& p, const RadialGrid& grid, const std::vector<double>& psi, double r);

/// rho = psi/Phi on [1, 0.8 r_max]. The drift compares the band against the
/// one obtained from a second ground state on a grid with doubled r_max, over
/// the correspondingly doubled range; the band on the original range is
/// reported as truncation_drift.
BoundReport check_groundstate_envelope(const OperatorParams& p, const RadialGrid& grid,
                                       const std::vector<double>& psi, const RadialGrid& grid2,
                                       const std::vector<double>& psi2, int samples = 24);

/// C_j = sup |psi_j| / Phi on [1, 0.8 r_max], with the log-log trend of the
/// running sup over the outer half of the range.
BoundReport check_eigenfunction_decay(const OperatorParams& p, const RadialGrid& grid,
                                      const std::vector<EigenPair>& pairs, int samples = 24);

/// M(t, x) = k_mu(t, x, x) e^{-lambda_0 t} / Phi(x)^2 using the model's own
/// ground state. c1 > 0 adds the envelope consistency check M >= c1^2 - 1e-6.
BoundReport check_on_diagonal_lower(const KernelModel& model, std::span<const double> t_set, int samples = 24,
                                    double c1 = 0.0);

struct MainUpperOptions {
  int radii = 24;
  int cosines = 8;
  int times = 12;
  double t_lo = 0.05;
  double t_hi = 2.0;
  double b = 0.0;  // <= 0: DerivedConstants::b
};

/// C(t) = sup k_mu e^{-lambda_0 t} / (Phi Phi) fitted as log c1 + c2 t^{-b},
/// plus the saturation check at t = 20/|lambda_0|.
BoundReport check_main_upper(const KernelModel& model, const MainUpperOptions& opt = {});

/// c(eps) = sup_{r <= 0.8 r_max} (-log psi - eps V) fitted against eps^{-b}.
/// eps runs log-spaced from the smallest value whose maximizer lies inside
/// the sampled range (at least 1e-3) to 1.
BoundReport check_log_psi(const OperatorParams& p, const RadialGrid& grid, const std::vector<double>& psi,
                          int eps_count = 12);

struct SmallTimeOptions {
  std::vector<double> radii = {0.0, 0.25, 0.5, 0.75, 1.0};
  double t_lo = 0.01;
  double t_hi = 1.0;
  int times = 12;
  double exponent_shift = 0.0;  // scale by t^{N/2 + shift}
  int ell_cap = 160;
  double ell_tol = 1e-6;
  int threads = 1;
};

/// On-diagonal sup of the small-time scaling from the time stepper. The
/// supremum over (x, y) of a product-weighted kernel is attained on the
/// diagonal, so only k_mu(t, x, x) is computed.
BoundReport check_small_time(const OperatorParams& p, const RadialGrid& grid, const SmallTimeOptions& opt = {});

/// gamma = alpha (2 - N) / 4.
double lyapunov_gamma(const OperatorParams& p);
/// A phi / phi for phi = (1 + r^alpha)^{(2-N)/4}.
double lyapunov_ratio(const OperatorParams& p, double r);

/// kappa = sup A phi / phi over a log grid on (0, 1e3] plus r = 0, refined
/// locally by Brent's method.
BoundReport lyapunov_check(const OperatorParams& p, int points = 10000);

/// int g u^2 dmu / (|g|_{L^{N/2}_mu} a_mu(u, u)) for a piecewise-linear u
/// (nodal values, Dirichlet node ignored) and g >= 0 constant per interval.
double sobolev_ratio(const OperatorParams& p, const RadialGrid& grid, std::span<const double> u,
                     std::span<const double> g);

/// Max of sobolev_ratio over random hat-function combinations and weights.
BoundReport sobolev_sample_check(const OperatorParams& p, const RadialGrid& grid, int samples,
                                 std::uint64_t seed);

}  // namespace hkest
