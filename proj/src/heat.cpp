#include "hkest/heat.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "hkest/errors.hpp"
#include "hkest/tridiag.hpp"
#include "hkest/zonal.hpp"

namespace hkest {

namespace {

void require_expansion_time(double t) {
  if (!(t > 0.0)) throw InvalidInput("kernel time must be > 0");
  if (t < kExpansionMinTime) {
    std::ostringstream os;
    os << "insufficient spectral resolution: t = " << t
       << " is below the eigenexpansion floor; smallest usable t = " << kExpansionMinTime
       << " (use the time stepper)";
    throw InsufficientResolution(os.str(), kExpansionMinTime);
  }
}

struct Truncation {
  std::size_t m = 0;
  double bound = 0.0;
};

Truncation truncate(const std::vector<EigenPair>& pairs, double t, double ref, double cutoff) {
  const double log_cut = std::log(cutoff);
  std::size_t m = 0;
  while (m < pairs.size() && (pairs[m].lambda - ref) * t >= log_cut) ++m;
  if (m == pairs.size()) {
    const double gap = ref - pairs.back().lambda;
    const double t_ok = gap > 0.0 ? std::max(kExpansionMinTime, -log_cut / gap)
                                  : std::numeric_limits<double>::infinity();
    std::ostringstream os;
    os << "insufficient spectral resolution: " << pairs.size() << " modes in sector " << pairs.back().ell
       << " do not reach the cutoff at t = " << t << "; smallest usable t = " << t_ok;
    throw InsufficientResolution(os.str(), t_ok);
  }
  double amax = 0.0;
  for (double v : pairs[m].psi) amax = std::max(amax, std::abs(v));
  return {m, std::exp(pairs[m].lambda * t) * amax * amax};
}

// Rows: samples, columns: modes, scaled by e^{lambda t / 2}.
Eigen::MatrixXd scaled_modes(const std::vector<EigenPair>& pairs, const RadialGrid& grid, double t, std::size_t m,
                             std::span<const double> r) {
  Eigen::MatrixXd B(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const double s = std::exp(0.5 * pairs[j].lambda * t);
    for (std::size_t i = 0; i < r.size(); ++i)
      B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s * interpolate(grid, pairs[j].psi, r[i]);
  }
  return B;
}

void check_radii(const RadialGrid& grid, std::span<const double> r) {
  for (double v : r)
    if (!(v >= 0.0 && v <= grid.r_max)) throw InvalidInput("kernel sample radius outside [0, r_max]");
}

}  // namespace

SectorKernel sector_kernel(const std::vector<EigenPair>& pairs, const RadialGrid& grid, double t,
                           std::span<const double> r_samples, double reference_lambda, double cutoff) {
  require_expansion_time(t);
  if (pairs.empty()) throw InvalidInput("sector kernel needs at least one eigenpair");
  check_radii(grid, r_samples);
  const double ref = std::isnan(reference_lambda) ? pairs.front().lambda : reference_lambda;
  const auto tr = truncate(pairs, t, ref, cutoff);
  const auto B = scaled_modes(pairs, grid, t, tr.m, r_samples);
  SectorKernel out;
  out.values = B * B.transpose();
  out.values = 0.5 * (out.values + out.values.transpose()).eval();
  out.modes_used = static_cast<int>(tr.m);
  out.truncation_bound = tr.bound;
  return out;
}

std::size_t modes_needed(const SectorOperator& op, double reference_lambda, double t, double cutoff) {
  if (!(t > 0.0)) throw InvalidInput("kernel time must be > 0");
  const TridiagonalPencil pencil(op.stiffness, op.mass);
  const double mu_cut = -reference_lambda + std::log(1.0 / cutoff) / t;
  return pencil.count_below(mu_cut) + 1;
}

KernelModel build_kernel_model(const OperatorParams& p, const RadialGrid& grid, int ell_max, double t_min, int threads,
                               int max_modes) {
  require_expansion_time(t_min);
  if (ell_max < 0) throw InvalidInput("ell_max must be >= 0");
  KernelModel model;
  model.params = p;
  model.grid = grid;
  model.t_min = t_min;
  {
    const auto op0 = build_sector_operator(p, grid, 0);
    model.lambda0 = -TridiagonalPencil(op0.stiffness, op0.mass).eigenvalue(0);
  }
  const double lambda0 = model.lambda0;
  auto count = [&](const SectorOperator& op) {
    const std::size_t dofs = op.stiffness.size();
    const std::size_t cap = std::min<std::size_t>(static_cast<std::size_t>(std::max(2, max_modes)), dofs / 2);
    const std::size_t need = std::max<std::size_t>(2, modes_needed(op, lambda0, t_min));
    if (need > cap) {
      const TridiagonalPencil pencil(op.stiffness, op.mass);
      const double lam_cap = -pencil.eigenvalue(cap - 1);
      const double t_ok = std::max(kExpansionMinTime, std::log(1.0 / kModeCutoff) / (lambda0 - lam_cap));
      std::ostringstream os;
      os << "insufficient spectral resolution: sector " << op.ell << " needs " << need << " modes at t = " << t_min
         << " but at most " << cap << " are resolved; smallest usable t = " << t_ok;
      throw InsufficientResolution(os.str(), t_ok);
    }
    return static_cast<int>(need);
  };
  model.sectors = solve_sectors(p, grid, ell_max, count, threads);
  return model;
}

KernelSlice kernel_slice(const KernelModel& model, double t, std::span<const double> radii,
                         std::span<const double> cosines, double ell_tol) {
  require_expansion_time(t);
  if (model.sectors.empty()) throw InvalidInput("kernel model has no sectors");
  check_radii(model.grid, radii);
  for (double c : cosines)
    if (!(c >= -1.0 && c <= 1.0)) throw InvalidInput("cosine outside [-1, 1]");
  const int N = model.params.N();
  const auto R = static_cast<Eigen::Index>(radii.size());
  KernelSlice s;
  s.t = t;
  s.radii.assign(radii.begin(), radii.end());
  s.cosines.assign(cosines.begin(), cosines.end());
  s.values.assign(cosines.size(), Eigen::MatrixXd::Zero(R, R));
  s.ell_max = model.ell_max();
  s.sanity_mode = model.params.sanity_mode();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(R);
  std::vector<Eigen::MatrixXd> last(2);
  for (const auto& sec : model.sectors) {
    const auto sk = sector_kernel(sec.pairs, model.grid, t, radii, model.lambda0);
    s.modes_used.push_back(sk.modes_used);
    s.truncation_bounds.push_back(sk.truncation_bound);
    for (std::size_t c = 0; c < cosines.size(); ++c) s.values[c] += zonal_kernel(sec.ell, N, cosines[c]) * sk.values;
    diag += zonal_kernel(sec.ell, N, 1.0) * sk.values.diagonal();
    last[0] = std::move(last[1]);
    last[1] = sk.values;
  }
  // Largest relative contribution of one sector over the lattice.
  auto contribution = [&](int ell, const Eigen::MatrixXd& S) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < R; ++i)
      for (Eigen::Index j = 0; j < R; ++j) {
        const double scale = std::sqrt(diag(i) * diag(j));
        if (!(scale > 0.0)) continue;
        for (double c : cosines) worst = std::max(worst, std::abs(zonal_kernel(ell, N, c) * S(i, j)) / scale);
        worst = std::max(worst, std::abs(zonal_kernel(ell, N, 1.0) * S(i, j)) / scale);
      }
    return worst;
  };
  const int L = s.ell_max;
  const double tl = contribution(L, last[1]);
  if (tl == 0.0) {
    s.ell_tail_estimate = 0.0;
  } else if (L == 0) {
    s.ell_tail_estimate = tl;
  } else {
    const double q_obs = tl / contribution(L - 1, last[0]);
    const double q_eig =
        std::exp((model.sectors[L].pairs.front().lambda - model.sectors[L - 1].pairs.front().lambda) * t);
    const double q = std::max(q_obs, q_eig);
    s.ell_tail_estimate = q < 1.0 ? tl * q / (1.0 - q) : std::numeric_limits<double>::infinity();
  }
  if (!(s.ell_tail_estimate <= ell_tol)) {
    std::ostringstream os;
    os << "l_max = " << L << " insufficient at t = " << t << ": angular tail estimate " << s.ell_tail_estimate
       << " exceeds " << ell_tol;
    throw ConvergenceFailure(os.str(), s.ell_tail_estimate);
  }
  return s;
}

double assemble_kernel(const KernelModel& model, double t, double r_x, double r_y, double cos_theta, double ell_tol) {
  const double r[] = {r_x, r_y};
  const double c[] = {cos_theta};
  return kernel_slice(model, t, r, c, ell_tol).values[0](0, 1);
}

Eigen::MatrixXd lebesgue_kernel(const OperatorParams& p, const KernelSlice& slice, std::size_t y_index) {
  if (y_index >= slice.radii.size()) throw InvalidInput("y index outside the slice");
  const CoefficientFunctions cf(p);
  const double w = 1.0 / cf.a(slice.radii[y_index]);
  const auto R = static_cast<Eigen::Index>(slice.radii.size());
  Eigen::MatrixXd out(R, static_cast<Eigen::Index>(slice.cosines.size()));
  for (std::size_t c = 0; c < slice.cosines.size(); ++c)
    out.col(static_cast<Eigen::Index>(c)) = w * slice.values[c].col(static_cast<Eigen::Index>(y_index));
  return out;
}

MassReport mass_check(const KernelModel& model, double t, double r_cut) {
  require_expansion_time(t);
  const auto& pairs = model.sectors.at(0).pairs;
  const auto op = build_sector_operator(model.params, model.grid, 0);
  const std::size_t n = op.mass.size();
  const auto tr = truncate(pairs, t, model.lambda0, kModeCutoff);
  std::vector<double> ones(n, 1.0), m1(n);
  op.mass.multiply(ones, m1);
  std::vector<double> w(tr.m);
  for (std::size_t j = 0; j < tr.m; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += m1[i] * pairs[j].psi[i];
    w[j] = std::exp(pairs[j].lambda * t) * s;
  }
  const double cut = r_cut > 0.0 ? r_cut : 0.8 * model.grid.r_max;
  MassReport rep;
  rep.t = t;
  for (std::size_t i = 0; i < n && model.grid.nodes[i] <= cut; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < tr.m; ++j) s += w[j] * pairs[j].psi[i];
    rep.radii.push_back(model.grid.nodes[i]);
    rep.mass.push_back(s);
    if (rep.mass.size() == 1 || s > rep.sup) {
      rep.sup = s;
      rep.argmax_r = model.grid.nodes[i];
    }
  }
  return rep;
}

SteppedDiagonal stepped_diagonal(const OperatorParams& p, const RadialGrid& grid, std::span<const std::size_t> nodes,
                                 std::span<const double> times, int ell_cap, double ell_tol, const StepControl& ctl,
                                 int threads) {
  if (nodes.empty() || times.empty()) throw InvalidInput("stepped diagonal needs nodes and times");
  const int N = p.N();
  const auto T = static_cast<Eigen::Index>(times.size());
  const auto J = static_cast<Eigen::Index>(nodes.size());
  SteppedDiagonal out;
  out.times.assign(times.begin(), times.end());
  out.nodes.assign(nodes.begin(), nodes.end());
  out.values = Eigen::MatrixXd::Zero(T, J);
  // Sectors above l = 0 only need accuracy relative to the running sum.
  Eigen::MatrixXd floors;
  auto sector = [&](int ell) {
    const auto op = build_sector_operator(p, grid, ell);
    const auto cols = step_columns(op, nodes, times, nodes, ctl, ell == 0 ? nullptr : &floors, true);
    Eigen::MatrixXd d(T, J);
    const double z = zonal_kernel(ell, N, 1.0);
    for (Eigen::Index k = 0; k < T; ++k)
      for (Eigen::Index j = 0; j < J; ++j)
        d(k, j) = z * cols.values[static_cast<std::size_t>(k)](static_cast<Eigen::Index>(nodes[j]), j);
    return d;
  };
  out.values = sector(0);
  floors = ell_tol * out.values;
  const int batch = std::max(1, threads);
  int quiet = 0;
  for (int base = 1; base <= ell_cap; base += batch) {
    const int hi = std::min(ell_cap, base + batch - 1);
    std::vector<Eigen::MatrixXd> parts(static_cast<std::size_t>(hi - base + 1));
    std::vector<std::exception_ptr> errors(parts.size());
    std::vector<std::thread> pool;
    for (int ell = base; ell <= hi; ++ell) {
      auto job = [&, ell]() {
        try {
          parts[static_cast<std::size_t>(ell - base)] = sector(ell);
        } catch (...) {
          errors[static_cast<std::size_t>(ell - base)] = std::current_exception();
        }
      };
      if (batch == 1)
        job();
      else
        pool.emplace_back(job);
    }
    for (auto& th : pool) th.join();
    for (int ell = base; ell <= hi; ++ell) {
      const auto idx = static_cast<std::size_t>(ell - base);
      if (errors[idx]) std::rethrow_exception(errors[idx]);
      const auto& d = parts[idx];
      out.values += d;
      double rel = 0.0;
      for (Eigen::Index k = 0; k < T; ++k)
        for (Eigen::Index j = 0; j < J; ++j)
          if (out.values(k, j) > 0.0) rel = std::max(rel, std::abs(d(k, j)) / out.values(k, j));
      out.ell_used = ell;
      out.last_contribution = rel;
      quiet = (ell > 0 && rel < ell_tol) ? quiet + 1 : 0;
      if (quiet >= 2) return out;
    }
  }
  std::ostringstream os;
  os << "angular sum did not converge by l = " << ell_cap << " (last relative contribution "
     << out.last_contribution << ")";
  throw ConvergenceFailure(os.str(), out.last_contribution);
}

std::size_t nearest_node(const RadialGrid& grid, double r) {
  const std::size_t e = grid.locate(r);
  std::size_t i = (r - grid.nodes[e] <= grid.nodes[e + 1] - r) ? e : e + 1;
  return std::min(i, grid.dofs() - 1);
}

}  // namespace hkest
