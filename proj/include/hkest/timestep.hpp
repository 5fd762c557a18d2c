#pragma once

// Implicit time stepping for the sector semigroup u' = -M^{-1} K u. Each step
// applies the (2,3) Pade approximant of exp, which is L-stable, through its
// partial-fraction form: one real and one complex tridiagonal solve per step.

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "hkest/model.hpp"
#include "hkest/spectral.hpp"

namespace hkest {

struct StepControl {
  double initial_fraction = 0.1;  // dt = fraction * t on the graded schedule
  double rel_tol = 1e-6;           // successive halvings must agree to this
  int max_halvings = 8;
};

struct StepTrace {
  std::vector<double> fractions;
  std::vector<int> steps;
  std::vector<double> changes;  // max relative change against the previous level
};

/// Kernel columns k_l(t, r_i, r_y) for every time in `times` (ascending, > 0)
/// and every y in `y_nodes`. values[k](i, j) is at node i for times[k] and
/// y_nodes[j]; the Dirichlet node is included as a zero row.
struct StepColumns {
  std::vector<double> times;
  std::vector<std::size_t> y_nodes;
  std::vector<Eigen::MatrixXd> values;
  StepTrace trace;
};

/// Evolves the discrete delta M^{-1} e_y. Halves the step fraction until two
/// successive runs agree to rel_tol at the probe nodes. Differences are taken
/// relative to the value itself, floored at 1e-8 of the largest probe value
/// and at floors(k, j) when given (times x columns): callers summing many
/// sectors pass the scale below which a sector is irrelevant. With paired
/// probes, probes[j] is checked in column j only. Throws ConvergenceFailure
/// with the trace otherwise.
StepColumns step_columns(const SectorOperator& op, std::span<const std::size_t> y_nodes,
                         std::span<const double> times, std::span<const std::size_t> probes,
                         const StepControl& ctl = {}, const Eigen::MatrixXd* floors = nullptr,
                         bool paired_probes = false);

/// u(t) = exp(-t M^{-1} K) u0 on the free nodes, at every time in `times`.
/// Same step control, with all free nodes as probes.
std::vector<std::vector<double>> step_evolve(const SectorOperator& op, std::span<const double> u0,
                                             std::span<const double> times, const StepControl& ctl = {});

/// The l = 0 column k_mu(t, ., r_y) on grid nodes. Probes default to every
/// node below 0.8 r_max.
std::vector<double> timestep_oracle(const OperatorParams& p, const RadialGrid& grid, double t, std::size_t y_node,
                                    const StepControl& ctl = {});

}  // namespace hkest
