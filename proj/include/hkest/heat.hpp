#pragma once

// Heat kernels from eigen-data. Sector kernels are
//   k_l(t, r, r') = sum_j e^{lambda_j t} psi_j(r) psi_j(r')
// with psi_j normalized per unit solid angle, and the full weighted kernel is
//   k_mu(t, x, y) = sum_l Z_l(x^.y^) k_l(t, |x|, |y|).
// The Lebesgue kernel is k = k_mu / (1 + |y|^alpha).

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hkest/model.hpp"
#include "hkest/spectral.hpp"
#include "hkest/timestep.hpp"

namespace hkest {

/// Below this time only the time stepper is used.
inline constexpr double kExpansionMinTime = 0.05;
/// Modes are kept while e^{(lambda_j - lambda_0) t} >= kModeCutoff.
inline constexpr double kModeCutoff = 1e-12;

struct SectorKernel {
  Eigen::MatrixXd values;  // (r_samples x r_samples)
  int modes_used = 0;
  double truncation_bound = 0.0;  // e^{lambda_m t} max|psi_m|^2 of the first omitted mode
};

/// Truncated eigenexpansion of one sector at time t. reference_lambda is the
/// lambda_0 in the truncation rule; NaN selects pairs[0].lambda. Throws
/// InsufficientResolution when t < kExpansionMinTime or the available pairs
/// do not reach the cutoff.
SectorKernel sector_kernel(const std::vector<EigenPair>& pairs, const RadialGrid& grid, double t,
                           std::span<const double> r_samples, double reference_lambda = std::nan(""),
                           double cutoff = kModeCutoff);

/// Modes a sector needs at time t: all with e^{(lambda - reference) t} >= cutoff
/// plus the first omitted one. Counted by inertia, no eigenvectors formed.
std::size_t modes_needed(const SectorOperator& op, double reference_lambda, double t, double cutoff = kModeCutoff);

/// Eigen-data for full-space reconstruction, sized for times >= t_min.
struct KernelModel {
  OperatorParams params;
  RadialGrid grid;
  double lambda0 = 0.0;
  double t_min = 0.0;
  std::vector<SectorSpectrum> sectors;  // l = 0..ell_max

  int ell_max() const noexcept { return static_cast<int>(sectors.size()) - 1; }
};

/// Solves sectors 0..ell_max with enough modes for every t >= t_min. Refuses
/// t_min < kExpansionMinTime and mode counts above max_modes or half the
/// unknowns, naming the smallest usable t.
KernelModel build_kernel_model(const OperatorParams& p, const RadialGrid& grid, int ell_max, double t_min,
                               int threads = 1, int max_modes = 600);

struct KernelSlice {
  double t = 0.0;
  std::vector<double> radii;
  std::vector<double> cosines;
  std::vector<Eigen::MatrixXd> values;  // values[c](i, j) = k_mu(t, r_i, r_j, cosines[c])
  std::vector<int> modes_used;          // per sector
  std::vector<double> truncation_bounds;
  int ell_max = 0;
  double ell_tail_estimate = 0.0;  // relative to sqrt(k_mu(x,x) k_mu(y,y))
  bool sanity_mode = false;
};

/// Full-space reconstruction on the (r, r', cos theta) lattice. The angular
/// tail beyond ell_max is estimated geometrically from the last two sectors,
/// with ratio at least exp((top_l - top_{l-1}) t); exceeding ell_tol throws
/// ConvergenceFailure.
KernelSlice kernel_slice(const KernelModel& model, double t, std::span<const double> radii,
                         std::span<const double> cosines, double ell_tol = 1e-6);

/// Single-point k_mu(t, x, y) with |x| = r_x, |y| = r_y, x^.y^ = cos_theta.
double assemble_kernel(const KernelModel& model, double t, double r_x, double r_y, double cos_theta,
                       double ell_tol = 1e-6);

/// k(t, x, y) = k_mu / (1 + |y|^alpha) for y = radii[y_index]; rows are
/// radii of x, columns cosines.
Eigen::MatrixXd lebesgue_kernel(const OperatorParams& p, const KernelSlice& slice, std::size_t y_index);

struct MassReport {
  double t = 0.0;
  double sup = 0.0;
  double argmax_r = 0.0;
  std::vector<double> radii;
  std::vector<double> mass;  // int k(t, x, y) dy at |x| = radii[i]
};

/// int k(t, x, y) dy = sum_j e^{lambda_j t} psi_j(x) <psi_j, 1>_mu over the
/// l = 0 pairs, at every node with r <= r_cut (r_cut <= 0: 0.8 r_max).
MassReport mass_check(const KernelModel& model, double t, double r_cut = 0.0);

/// On-diagonal k_mu(t, x, x) at grid nodes from the time stepper, summing
/// sectors until two consecutive ones contribute below ell_tol relative.
/// Sectors above l = 0 are step-controlled only down to ell_tol times the
/// l = 0 value.
struct SteppedDiagonal {
  std::vector<double> times;
  std::vector<std::size_t> nodes;
  Eigen::MatrixXd values;  // (times x nodes)
  int ell_used = 0;
  double last_contribution = 0.0;
};

SteppedDiagonal stepped_diagonal(const OperatorParams& p, const RadialGrid& grid, std::span<const std::size_t> nodes,
                                 std::span<const double> times, int ell_cap = 160, double ell_tol = 1e-6,
                                 const StepControl& ctl = {}, int threads = 1);

/// Nearest grid node to r among the free nodes.
std::size_t nearest_node(const RadialGrid& grid, double r);

}  // namespace hkest
