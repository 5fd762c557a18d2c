#include "hkest/timestep.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "hkest/errors.hpp"

namespace hkest {

namespace {

using cd = std::complex<double>;

// exp(z) ~ P(z)/Q(z), P = 1 + 2z/5 + z^2/20, Q = 1 - 3z/5 + 3z^2/20 - z^3/60,
// written as r1/(z-p1) + 2 Re[r2/(z-p2)] with p1 real.
struct PadeFractions {
  double p1 = 0.0, r1 = 0.0;
  cd p2, r2;
  PadeFractions() {
    Eigen::Matrix3d comp = Eigen::Matrix3d::Zero();
    // companion of z^3 - 9 z^2 + 36 z - 60
    comp(0, 0) = 9.0;
    comp(0, 1) = -36.0;
    comp(0, 2) = 60.0;
    comp(1, 0) = 1.0;
    comp(2, 1) = 1.0;
    Eigen::EigenSolver<Eigen::Matrix3d> es(comp);
    const auto ev = es.eigenvalues();
    auto P = [](cd z) { return 1.0 + 0.4 * z + z * z / 20.0; };
    auto dQ = [](cd z) { return -0.6 + 0.3 * z - z * z / 20.0; };
    bool have_real = false, have_complex = false;
    for (int i = 0; i < 3; ++i) {
      const cd z = ev(i);
      if (std::abs(z.imag()) < 1e-10) {
        p1 = z.real();
        r1 = (P(p1) / dQ(p1)).real();
        have_real = true;
      } else if (z.imag() > 0.0) {
        p2 = z;
        r2 = P(z) / dQ(z);
        have_complex = true;
      }
    }
    if (!have_real || !have_complex) throw ConvergenceFailure("Pade pole computation failed");
  }
};

const PadeFractions& pade() {
  static const PadeFractions f;
  return f;
}

// Step sizes reaching each output time exactly: uniform up to times[0],
// geometric afterwards, dt ~ fraction * t.
std::vector<std::vector<double>> schedule(std::span<const double> times, double fraction) {
  std::vector<std::vector<double>> seg;
  double t0 = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> dts;
    if (k == 0) {
      const int m = static_cast<int>(std::ceil(1.0 / fraction - 1e-12));
      dts.assign(static_cast<std::size_t>(m), times[0] / m);
    } else if (times[k] > t0) {
      const double ratio = times[k] / t0;
      const int m = std::max(1, static_cast<int>(std::ceil(std::log(ratio) / std::log1p(fraction) - 1e-12)));
      const double q = std::pow(ratio, 1.0 / m);
      double t = t0;
      for (int i = 0; i < m; ++i) {
        const double next = (i + 1 == m) ? times[k] : t * q;
        dts.push_back(next - t);
        t = next;
      }
    }
    seg.push_back(std::move(dts));
    t0 = times[k];
  }
  return seg;
}

// Columns of Mu0 in, u(t_k) out (free nodes only).
std::vector<Eigen::MatrixXd> run(const SectorOperator& op, const Eigen::MatrixXd& mu0, std::span<const double> times,
                                 double fraction, int& steps) {
  const auto& K = op.stiffness;
  const auto& M = op.mass;
  const std::size_t n = K.size();
  const auto cols = mu0.cols();
  const auto& pf = pade();
  std::vector<double> sub(n - 1), dg(n);
  std::vector<cd> csub(n - 1), cdg(n);
  std::vector<cd> work(n);
  Eigen::MatrixXd mu = mu0, u(static_cast<Eigen::Index>(n), cols);
  std::vector<Eigen::MatrixXd> out;
  steps = 0;
  for (const auto& seg : schedule(times, fraction)) {
    for (double dt : seg) {
      for (std::size_t i = 0; i < n; ++i) {
        dg[i] = dt * K.diag[i] + pf.p1 * M.diag[i];
        cdg[i] = dt * K.diag[i] + pf.p2 * M.diag[i];
      }
      for (std::size_t i = 0; i + 1 < n; ++i) {
        sub[i] = dt * K.off[i] + pf.p1 * M.off[i];
        csub[i] = dt * K.off[i] + pf.p2 * M.off[i];
      }
      const TridiagLU<double> lr(sub, dg, sub);
      const TridiagLU<cd> lc(csub, cdg, csub);
      for (Eigen::Index j = 0; j < cols; ++j) {
        double* uj = u.col(j).data();
        const double* mj = mu.col(j).data();
        std::copy(mj, mj + n, uj);
        lr.solve(std::span<double>(uj, n));
        for (std::size_t i = 0; i < n; ++i) work[i] = mj[i];
        lc.solve(work);
        for (std::size_t i = 0; i < n; ++i) uj[i] = -pf.r1 * uj[i] - 2.0 * (pf.r2 * work[i]).real();
        M.multiply(std::span<const double>(uj, n), std::span<double>(mu.col(j).data(), n));
      }
      ++steps;
    }
    out.push_back(u);
  }
  return out;
}

struct Probes {
  std::span<const std::size_t> nodes;
  bool paired = false;
  std::span<const std::size_t> for_column(Eigen::Index j) const {
    return paired ? nodes.subspan(static_cast<std::size_t>(j), 1) : nodes;
  }
};

double max_change(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b, const Probes& pr,
                  const Eigen::MatrixXd* floors) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (Eigen::Index j = 0; j < a[k].cols(); ++j) {
      const auto probes = pr.for_column(j);
      double scale = 0.0;
      for (auto i : probes) scale = std::max(scale, std::abs(b[k](static_cast<Eigen::Index>(i), j)));
      const double fl = floors ? (*floors)(static_cast<Eigen::Index>(k), j) : 0.0;
      if (scale == 0.0 || scale < fl) continue;
      for (auto i : probes) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double ref = std::max({std::abs(b[k](ii, j)), 1e-8 * scale, fl});
        worst = std::max(worst, std::abs(a[k](ii, j) - b[k](ii, j)) / ref);
      }
    }
  }
  return worst;
}

std::vector<Eigen::MatrixXd> controlled(const SectorOperator& op, const Eigen::MatrixXd& mu0,
                                        std::span<const double> times, const Probes& pr,
                                        const StepControl& ctl, StepTrace& trace,
                                        const Eigen::MatrixXd* floors = nullptr) {
  if (times.empty()) throw InvalidInput("no output times requested");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] > 0.0) || (k > 0 && times[k] < times[k - 1]))
      throw InvalidInput("output times must be positive and ascending");
  }
  const std::size_t n = op.stiffness.size();
  for (auto i : pr.nodes)
    if (i >= n) throw InvalidInput("probe node outside the free nodes");
  if (pr.paired && pr.nodes.size() != static_cast<std::size_t>(mu0.cols()))
    throw InvalidInput("paired probes need one node per column");
  if (!(ctl.initial_fraction > 0.0 && ctl.initial_fraction <= 1.0))
    throw InvalidInput("step fraction must be in (0, 1]");
  double fraction = ctl.initial_fraction;
  int steps = 0;
  auto prev = run(op, mu0, times, fraction, steps);
  trace.fractions.push_back(fraction);
  trace.steps.push_back(steps);
  trace.changes.push_back(std::nan(""));
  for (int h = 0; h < ctl.max_halvings; ++h) {
    fraction *= 0.5;
    auto cur = run(op, mu0, times, fraction, steps);
    const double change = max_change(prev, cur, pr, floors);
    trace.fractions.push_back(fraction);
    trace.steps.push_back(steps);
    trace.changes.push_back(change);
    prev = std::move(cur);
    if (change < ctl.rel_tol) return prev;
  }
  std::ostringstream os;
  os << "time stepper did not converge to " << ctl.rel_tol << ":";
  for (std::size_t i = 0; i < trace.fractions.size(); ++i)
    os << " [fraction=" << trace.fractions[i] << " steps=" << trace.steps[i] << " change=" << trace.changes[i] << "]";
  throw ConvergenceFailure(os.str(), trace.changes.back());
}

}  // namespace

StepColumns step_columns(const SectorOperator& op, std::span<const std::size_t> y_nodes,
                         std::span<const double> times, std::span<const std::size_t> probes,
                         const StepControl& ctl, const Eigen::MatrixXd* floors, bool paired_probes) {
  const std::size_t n = op.stiffness.size();
  if (floors && (floors->rows() != static_cast<Eigen::Index>(times.size()) ||
                 floors->cols() != static_cast<Eigen::Index>(y_nodes.size())))
    throw InvalidInput("step floors must be times x columns");
  Eigen::MatrixXd mu0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(y_nodes.size()));
  for (std::size_t j = 0; j < y_nodes.size(); ++j) {
    if (y_nodes[j] >= n) throw InvalidInput("kernel source node must be a free node");
    mu0(static_cast<Eigen::Index>(y_nodes[j]), static_cast<Eigen::Index>(j)) = 1.0;
  }
  StepColumns out;
  out.times.assign(times.begin(), times.end());
  out.y_nodes.assign(y_nodes.begin(), y_nodes.end());
  auto vals = controlled(op, mu0, times, Probes{probes, paired_probes}, ctl, out.trace, floors);
  for (auto& v : vals) {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(v.rows() + 1, v.cols());
    full.topRows(v.rows()) = v;
    out.values.push_back(std::move(full));
  }
  return out;
}

std::vector<std::vector<double>> step_evolve(const SectorOperator& op, std::span<const double> u0,
                                             std::span<const double> times, const StepControl& ctl) {
  const std::size_t n = op.stiffness.size();
  if (u0.size() < n) throw InvalidInput("initial data shorter than the free nodes");
  Eigen::MatrixXd mu0(static_cast<Eigen::Index>(n), 1);
  op.mass.multiply(u0.first(n), std::span<double>(mu0.data(), n));
  std::vector<std::size_t> probes(n);
  for (std::size_t i = 0; i < n; ++i) probes[i] = i;
  StepTrace trace;
  auto vals = controlled(op, mu0, times, Probes{probes, false}, ctl, trace);
  std::vector<std::vector<double>> out;
  for (const auto& v : vals) out.emplace_back(v.data(), v.data() + n);
  return out;
}

std::vector<double> timestep_oracle(const OperatorParams& p, const RadialGrid& grid, double t, std::size_t y_node,
                                    const StepControl& ctl) {
  const auto op = build_sector_operator(p, grid, 0);
  std::vector<std::size_t> probes;
  for (std::size_t i = 0; i < op.stiffness.size(); ++i)
    if (grid.nodes[i] <= 0.8 * grid.r_max) probes.push_back(i);
  const std::size_t y[] = {y_node};
  const double ts[] = {t};
  const auto cols = step_columns(op, y, ts, probes, ctl);
  const auto& v = cols.values.front();
  return std::vector<double>(v.data(), v.data() + v.rows());
}

}  // namespace hkest
