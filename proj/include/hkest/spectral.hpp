#pragma once

// Conforming piecewise-linear discretization of the form
//
//   a_mu(u,u) = int |u'|^2 r^{N-1} dr + int V u^2 rho_mu dr
//             + l(l+N-2) int u^2 r^{N-3} dr
//
// on [0, r_max] per angular-momentum sector l, with L^2_mu mass
// int u^2 rho_mu dr. Natural condition at r = 0, Dirichlet at r_max. All
// radial integrals are per unit solid angle.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hkest/model.hpp"
#include "hkest/tridiag.hpp"

namespace hkest {

enum class Grading { Uniform, Geometric };

struct RadialGrid {
  double r_max = 0.0;
  std::vector<double> nodes;  // nodes[0] = 0, nodes.back() = r_max
  Grading grading = Grading::Uniform;
  double ratio = 1.0;
  bool auto_r_max = false;

  std::size_t intervals() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
  /// Unknowns: every node except the Dirichlet node at r_max.
  std::size_t dofs() const noexcept { return intervals(); }
  /// Index of the interval containing r (clamped).
  std::size_t locate(double r) const;
};

/// Minimum number of intervals accepted by build_grid.
inline constexpr int kMinIntervals = 64;

/// Radius at which the ground-state envelope drops to `level`.
double envelope_cutoff(const OperatorParams& p, double level = 1e-16);

/// n intervals on [0, r_max]. r_max <= 0 with auto_r_max selects
/// envelope_cutoff(p). ratio is the geometric growth of consecutive spacings.
RadialGrid build_grid(const OperatorParams& p, double r_max, int n, Grading grading = Grading::Uniform,
                      double ratio = 1.0, bool auto_r_max = false);

struct SectorOperator {
  int ell = 0;
  SymTridiag stiffness;  // PSD
  SymTridiag mass;       // PD
};

SectorOperator build_sector_operator(const OperatorParams& p, const RadialGrid& grid, int ell);

struct EigenPair {
  double lambda = 0.0;
  std::vector<double> psi;  // samples at grid nodes, psi.back() = 0 (Dirichlet)
  int ell = 0;
  int index = 0;
  std::string normalization = "unit discrete L2_mu norm per unit solid angle";
};

enum class EigenBackend { Banded, Dense };

/// The m algebraically largest eigenvalues of (-stiffness) u = lambda mass u,
/// sorted descending, mass-orthonormal.
std::vector<EigenPair> solve_eigenpairs(const SectorOperator& op, int m,
                                        EigenBackend backend = EigenBackend::Banded);

/// Max |Gram - I| in the mass inner product.
double orthonormality_residual(const SectorOperator& op, const std::vector<EigenPair>& pairs);
/// Max over pairs of |(-K) psi - lambda M psi| / |M psi|.
double eigen_residual(const SectorOperator& op, const std::vector<EigenPair>& pairs);
/// Sign changes of psi over the free nodes, ignoring entries below rel_floor*max|psi|.
int sign_changes(const std::vector<double>& psi, double rel_floor = 1e-10);

/// Linear interpolation of grid samples.
double interpolate(const RadialGrid& grid, const std::vector<double>& values, double r);
/// Linear interpolation of log|values|, for positive rapidly decaying data.
double interpolate_log(const RadialGrid& grid, const std::vector<double>& values, double r);

struct LadderLevel {
  int n = 0;
  double r_max = 0.0;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
};

/// Starting spacing of the ground-state ladder when n0 is automatic.
inline constexpr double kLadderSpacing = 0.004;

struct GroundStateOptions {
  double tol = 1e-8;
  int max_depth = 8;
  int n0 = 0;  // <= 0: r_max / kLadderSpacing, at least 1000
  double r_max = 0.0;  // <= 0 selects envelope_cutoff
  Grading grading = Grading::Uniform;
  double ratio = 1.0;
  int modes = 2;  // modes tracked along the ladder (>= 1)
};

struct GroundState {
  double lambda0 = 0.0;
  double richardson = 0.0;  // extrapolated from the last two levels (h^2 error)
  RadialGrid grid;
  std::vector<EigenPair> pairs;  // l = 0 modes on the finest level
  std::vector<LadderLevel> ladder;
  bool monotone = true;  // lambda0 nondecreasing along the ladder within 1e-12 slack

  const std::vector<double>& psi() const { return pairs.front().psi; }
};

/// l = 0 ground state over a ladder of nested uniform refinements (n doubles,
/// r_max fixed) until successive lambda0 differ by less than tol. Throws
/// ConvergenceFailure with the ladder trace on exhaustion.
GroundState ground_state(const OperatorParams& p, const GroundStateOptions& opts = {});

struct RadialGroundReport {
  double top_l0 = 0.0;
  double top_l1 = 0.0;
  double gap = 0.0;
  bool radial = false;
};

/// Compares the top eigenvalue of sectors l = 0 and l = 1 on one grid.
RadialGroundReport verify_radial_ground(const OperatorParams& p, const RadialGrid& grid);

/// Sector spectra l = 0..ell_max on a shared grid.
struct SectorSpectrum {
  int ell = 0;
  std::vector<EigenPair> pairs;
};

std::vector<SectorSpectrum> solve_sectors(const OperatorParams& p, const RadialGrid& grid, int ell_max,
                                          int modes, int threads = 1);
/// Same, with the mode count chosen per sector from its assembled operator.
std::vector<SectorSpectrum> solve_sectors(const OperatorParams& p, const RadialGrid& grid, int ell_max,
                                          const std::function<int(const SectorOperator&)>& modes,
                                          int threads = 1);

}  // namespace hkest
