#include "hkest/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <atomic>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "hkest/errors.hpp"

namespace hkest {

namespace {

// Gauss-Legendre rule on [-1, 1] expanded from Boost's half-rule.
struct GaussRule {
  std::vector<double> x, w;
  GaussRule() {
    using Q = boost::math::quadrature::gauss<double, 7>;
    const auto& a = Q::abscissa();
    const auto& wt = Q::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) {
        x.push_back(0.0);
        w.push_back(wt[i]);
      } else {
        x.push_back(a[i]);
        w.push_back(wt[i]);
        x.push_back(-a[i]);
        w.push_back(wt[i]);
      }
    }
  }
};

const GaussRule& gauss_rule() {
  static const GaussRule rule;
  return rule;
}

}  // namespace

std::size_t RadialGrid::locate(double r) const {
  if (r <= nodes.front()) return 0;
  if (r >= nodes.back()) return intervals() - 1;
  auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
  return static_cast<std::size_t>(it - nodes.begin()) - 1;
}

double envelope_cutoff(const OperatorParams& p, double level) {
  // Phi is decreasing on [1, inf) for valid parameters; bracket then bisect.
  double lo = 1.0, hi = 2.0;
  if (envelope(p, lo) <= level) return lo;
  while (envelope(p, hi) > level) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) throw InvalidInput("envelope does not decay to the cutoff level");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (envelope(p, mid) > level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

RadialGrid build_grid(const OperatorParams& p, double r_max, int n, Grading grading, double ratio,
                      bool auto_r_max) {
  if (n < kMinIntervals) throw InvalidInput("grid needs at least " + std::to_string(kMinIntervals) + " intervals");
  RadialGrid g;
  g.auto_r_max = auto_r_max;
  if (auto_r_max) {
    r_max = envelope_cutoff(p);
  } else if (!(r_max > 0.0)) {
    throw InvalidInput("r_max must be positive");
  }
  if (grading == Grading::Geometric && !(ratio > 0.0)) throw InvalidInput("geometric ratio must be > 0");
  g.r_max = r_max;
  g.grading = grading;
  g.ratio = grading == Grading::Geometric ? ratio : 1.0;
  g.nodes.resize(static_cast<std::size_t>(n) + 1);
  g.nodes[0] = 0.0;
  if (grading == Grading::Uniform || ratio == 1.0) {
    for (int i = 1; i <= n; ++i) g.nodes[i] = r_max * static_cast<double>(i) / n;
  } else {
    // spacing_i = h0 q^i, sum = r_max
    const double h0 = r_max * (ratio - 1.0) / (std::pow(ratio, n) - 1.0);
    double r = 0.0, h = h0;
    for (int i = 1; i <= n; ++i) {
      r += h;
      g.nodes[i] = r;
      h *= ratio;
    }
  }
  g.nodes[static_cast<std::size_t>(n)] = r_max;
  return g;
}

SectorOperator build_sector_operator(const OperatorParams& p, const RadialGrid& grid, int ell) {
  if (ell < 0) throw InvalidInput("angular momentum must be >= 0");
  const CoefficientFunctions cf(p);
  const int N = p.N();
  const double cent = static_cast<double>(ell) * (ell + N - 2);
  const std::size_t dofs = grid.dofs();
  SectorOperator op;
  op.ell = ell;
  op.stiffness.resize(dofs);
  op.mass.resize(dofs);
  const auto& rule = gauss_rule();

  for (std::size_t e = 0; e < grid.intervals(); ++e) {
    const double ra = grid.nodes[e], rb = grid.nodes[e + 1];
    const double h = rb - ra;
    double kaa = 0, kab = 0, kbb = 0, maa = 0, mab = 0, mbb = 0, grad = 0;
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
      // Gauss points are interior, so r = 0 is never sampled.
      const double r = ra + 0.5 * h * (rule.x[q] + 1.0);
      const double w = 0.5 * h * rule.w[q];
      const double pa = (rb - r) / h, pb = (r - ra) / h;
      const double rho = cf.rho_mu(r);
      double pot = cf.V(r) * rho;
      if (cent != 0.0) pot += cent * std::pow(r, N - 3);
      grad += w * std::pow(r, N - 1) / (h * h);
      kaa += w * pot * pa * pa;
      kab += w * pot * pa * pb;
      kbb += w * pot * pb * pb;
      maa += w * rho * pa * pa;
      mab += w * rho * pa * pb;
      mbb += w * rho * pb * pb;
    }
    kaa += grad;
    kbb += grad;
    kab -= grad;
    op.stiffness.diag[e] += kaa;
    op.mass.diag[e] += maa;
    if (e + 1 < dofs) {
      op.stiffness.diag[e + 1] += kbb;
      op.stiffness.off[e] += kab;
      op.mass.diag[e + 1] += mbb;
      op.mass.off[e] += mab;
    }
  }
  return op;
}

namespace {

std::vector<EigenPair> dense_solve(const SectorOperator& op, int m) {
  const auto n = static_cast<Eigen::Index>(op.stiffness.size());
  if (n > 2000) throw InvalidInput("dense eigen backend is limited to 2000 unknowns");
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n), M = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = op.stiffness.diag[i];
    M(i, i) = op.mass.diag[i];
    if (i + 1 < n) {
      K(i, i + 1) = K(i + 1, i) = op.stiffness.off[i];
      M(i, i + 1) = M(i + 1, i) = op.mass.off[i];
    }
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("dense generalized eigensolver failed");
  std::vector<EigenPair> out;
  for (int j = 0; j < m; ++j) {
    EigenPair ep;
    ep.lambda = -es.eigenvalues()(j);
    ep.ell = op.ell;
    ep.index = j;
    ep.psi.resize(static_cast<std::size_t>(n) + 1, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) ep.psi[i] = es.eigenvectors()(i, j);
    double amax = 0.0;
    for (double v : ep.psi) amax = std::max(amax, std::abs(v));
    for (double v : ep.psi) {
      if (std::abs(v) > 1e-8 * amax) {
        if (v < 0.0)
          for (double& w : ep.psi) w = -w;
        break;
      }
    }
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace

std::vector<EigenPair> solve_eigenpairs(const SectorOperator& op, int m, EigenBackend backend) {
  const std::size_t n = op.stiffness.size();
  if (m < 1 || static_cast<std::size_t>(m) > n) throw InvalidInput("mode count must be in [1, dofs]");
  if (backend == EigenBackend::Dense) return dense_solve(op, m);
  const TridiagonalPencil pencil(op.stiffness, op.mass);
  auto modes = pencil.smallest(static_cast<std::size_t>(m));
  std::vector<EigenPair> out;
  out.reserve(modes.size());
  for (std::size_t j = 0; j < modes.size(); ++j) {
    EigenPair ep;
    ep.lambda = -modes[j].mu;
    ep.ell = op.ell;
    ep.index = static_cast<int>(j);
    ep.psi = std::move(modes[j].u);
    ep.psi.push_back(0.0);
    out.push_back(std::move(ep));
  }
  for (std::size_t j = 1; j < out.size(); ++j) {
    if (!(out[j].lambda < out[j - 1].lambda))
      throw ConvergenceFailure("eigenvalues not strictly separated at index " + std::to_string(j));
  }
  return out;
}

double orthonormality_residual(const SectorOperator& op, const std::vector<EigenPair>& pairs) {
  const std::size_t n = op.mass.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const std::span<const double> a(pairs[i].psi.data(), n), b(pairs[j].psi.data(), n);
      const double g = op.mass.bilinear(a, b);
      worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double eigen_residual(const SectorOperator& op, const std::vector<EigenPair>& pairs) {
  const std::size_t n = op.mass.size();
  std::vector<double> kx(n), mx(n);
  double worst = 0.0;
  for (const auto& ep : pairs) {
    const std::span<const double> x(ep.psi.data(), n);
    op.stiffness.multiply(x, kx);
    op.mass.multiply(x, mx);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = -kx[i] - ep.lambda * mx[i];
      num += r * r;
      den += mx[i] * mx[i];
    }
    worst = std::max(worst, std::sqrt(num / den) / std::max(1.0, std::abs(ep.lambda)));
  }
  return worst;
}

int sign_changes(const std::vector<double>& psi, double rel_floor) {
  double amax = 0.0;
  for (double v : psi) amax = std::max(amax, std::abs(v));
  int changes = 0, last = 0;
  for (double v : psi) {
    if (std::abs(v) <= rel_floor * amax) continue;
    const int s = v > 0.0 ? 1 : -1;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

double interpolate(const RadialGrid& grid, const std::vector<double>& values, double r) {
  const std::size_t e = grid.locate(r);
  const double ra = grid.nodes[e], rb = grid.nodes[e + 1];
  const double t = std::clamp((r - ra) / (rb - ra), 0.0, 1.0);
  return (1.0 - t) * values[e] + t * values[e + 1];
}

double interpolate_log(const RadialGrid& grid, const std::vector<double>& values, double r) {
  const std::size_t e = grid.locate(r);
  const double ra = grid.nodes[e], rb = grid.nodes[e + 1];
  const double t = std::clamp((r - ra) / (rb - ra), 0.0, 1.0);
  const double va = std::abs(values[e]), vb = std::abs(values[e + 1]);
  if (t == 0.0) return va;
  if (t == 1.0 || va == 0.0 || vb == 0.0) return (1.0 - t) * va + t * vb;
  return std::exp((1.0 - t) * std::log(va) + t * std::log(vb));
}

GroundState ground_state(const OperatorParams& p, const GroundStateOptions& opts) {
  if (!(opts.tol > 0.0)) throw InvalidInput("ground_state tolerance must be > 0");
  if (opts.max_depth < 2) throw InvalidInput("ground_state ladder depth must be >= 2");
  const bool auto_r = !(opts.r_max > 0.0);
  int n0 = opts.n0;
  if (n0 <= 0) {
    const double r_max = auto_r ? envelope_cutoff(p) : opts.r_max;
    n0 = std::max(1000, static_cast<int>(std::ceil(r_max / kLadderSpacing)));
  }
  GroundState gs;
  double prev = 0.0;
  for (int level = 0; level < opts.max_depth; ++level) {
    const int n = n0 << level;
    auto grid = build_grid(p, opts.r_max, n, opts.grading, opts.ratio, auto_r);
    const auto op = build_sector_operator(p, grid, 0);
    auto pairs = solve_eigenpairs(op, std::max(1, opts.modes));
    LadderLevel lv{n, grid.r_max, pairs[0].lambda, pairs.size() > 1 ? pairs[1].lambda : 0.0};
    gs.ladder.push_back(lv);
    if (level > 0 && lv.lambda0 < prev - 1e-12 * std::max(1.0, std::abs(prev))) gs.monotone = false;
    gs.grid = std::move(grid);
    gs.pairs = std::move(pairs);
    gs.lambda0 = lv.lambda0;
    if (level > 0) {
      gs.richardson = lv.lambda0 + (lv.lambda0 - prev) / 3.0;
      if (std::abs(lv.lambda0 - prev) < opts.tol) return gs;
    }
    prev = lv.lambda0;
  }
  std::ostringstream os;
  os.precision(12);
  os << "ground state ladder did not converge to " << opts.tol << ":";
  for (const auto& lv : gs.ladder) os << " [n=" << lv.n << " lambda0=" << lv.lambda0 << "]";
  throw ConvergenceFailure(os.str(), gs.ladder.size() >= 2
                                         ? std::abs(gs.ladder.back().lambda0 - gs.ladder[gs.ladder.size() - 2].lambda0)
                                         : 0.0);
}

RadialGroundReport verify_radial_ground(const OperatorParams& p, const RadialGrid& grid) {
  RadialGroundReport rep;
  rep.top_l0 = solve_eigenpairs(build_sector_operator(p, grid, 0), 1)[0].lambda;
  rep.top_l1 = solve_eigenpairs(build_sector_operator(p, grid, 1), 1)[0].lambda;
  rep.gap = rep.top_l0 - rep.top_l1;
  rep.radial = rep.gap > 0.0;
  return rep;
}

std::vector<SectorSpectrum> solve_sectors(const OperatorParams& p, const RadialGrid& grid, int ell_max,
                                          int modes, int threads) {
  return solve_sectors(
      p, grid, ell_max, [modes](const SectorOperator& op) { return std::min<int>(modes, static_cast<int>(op.stiffness.size())); },
      threads);
}

std::vector<SectorSpectrum> solve_sectors(const OperatorParams& p, const RadialGrid& grid, int ell_max,
                                          const std::function<int(const SectorOperator&)>& modes,
                                          int threads) {
  if (ell_max < 0) throw InvalidInput("ell_max must be >= 0");
  std::vector<SectorSpectrum> out(static_cast<std::size_t>(ell_max) + 1);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(out.size());
  auto worker = [&]() {
    for (int l = next++; l <= ell_max; l = next++) {
      try {
        const auto op = build_sector_operator(p, grid, l);
        const int m = modes(op);
        out[static_cast<std::size_t>(l)] = SectorSpectrum{l, solve_eigenpairs(op, m)};
      } catch (...) {
        errors[static_cast<std::size_t>(l)] = std::current_exception();
      }
    }
  };
  const int nt = std::max(1, std::min(threads, ell_max + 1));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace hkest
