#include <doctest.h>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "hkest/errors.hpp"
#include "hkest/spectral.hpp"

using namespace hkest;

namespace {

// psi'' = -(N-1)/r psi' + (r^beta + lambda)/(1 + r^alpha) psi from the
// regular series at r0, integrated to R.
double shoot(int N, double alpha, double beta, double lambda, double R) {
  using State = std::array<double, 2>;
  const double r0 = 1e-5;
  State y = {1.0 + lambda * r0 * r0 / (2.0 * N), lambda * r0 / N};
  auto rhs = [&](const State& s, State& d, double r) {
    d[0] = s[1];
    d[1] = -(N - 1) / r * s[1] + (std::pow(r, beta) + lambda) / (1.0 + std::pow(r, alpha)) * s[0];
  };
  namespace ode = boost::numeric::odeint;
  ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-13, 1e-13), rhs, y, r0, R, 1e-3);
  return y[0];
}

}  // namespace

TEST_CASE("oscillator: lambda_0 = -3, lambda_1 = -7, Gaussian ground state") {
  const auto p = make_params(3, 0.0, 2.0, true);
  const auto gs = ground_state(p);
  CHECK(gs.lambda0 == doctest::Approx(-3.0).epsilon(1e-6 / 3));
  CHECK(gs.pairs.at(1).lambda == doctest::Approx(-7.0).epsilon(1e-5 / 7));
  CHECK(gs.ladder.size() <= 6);
  CHECK(gs.monotone);
  const double ref = interpolate(gs.grid, gs.psi(), 0.0);
  for (double r = 0.0; r <= 4.0; r += 0.25)
    CHECK(interpolate(gs.grid, gs.psi(), r) / std::exp(-r * r / 2) == doctest::Approx(ref).epsilon(1e-4));
}

TEST_CASE("(3, 2, 4) ground state agrees with an independent shooting solve") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto gs = ground_state(p);
  const double R = gs.grid.r_max;
  auto f = [&](double l) { return shoot(3, 2.0, 4.0, l, R); };
  boost::math::tools::eps_tolerance<double> tol(40);
  std::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::bisect(f, -5.5, -4.5, tol, iters);
  CHECK(gs.lambda0 == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-7));
  for (const auto& e : gs.pairs) CHECK(e.lambda < 0.0);
}

TEST_CASE("eigenpairs: orthonormal, residual-free, Sturm ordered") {
  const auto p = make_params(4, 4.0, 4.0);
  const auto grid = build_grid(p, 0.0, 2000, Grading::Uniform, 1.0, true);
  const auto op = build_sector_operator(p, grid, 0);
  const auto pairs = solve_eigenpairs(op, 6);
  CHECK(orthonormality_residual(op, pairs) < 1e-10);
  CHECK(eigen_residual(op, pairs) < 1e-8);
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    CHECK(sign_changes(pairs[j].psi) == static_cast<int>(j));
    if (j > 0) CHECK(pairs[j].lambda < pairs[j - 1].lambda);
  }
}

TEST_CASE("banded and dense backends agree") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto grid = build_grid(p, 6.0, 300);
  for (int ell : {0, 2}) {
    const auto op = build_sector_operator(p, grid, ell);
    const auto b = solve_eigenpairs(op, 5, EigenBackend::Banded);
    const auto d = solve_eigenpairs(op, 5, EigenBackend::Dense);
    for (std::size_t j = 0; j < b.size(); ++j) {
      CHECK(b[j].lambda == doctest::Approx(d[j].lambda).epsilon(1e-10));
      double diff = 0.0;
      for (std::size_t i = 0; i < b[j].psi.size(); ++i) diff = std::max(diff, std::abs(b[j].psi[i] - d[j].psi[i]));
      CHECK(diff < 1e-7);
    }
  }
}

TEST_CASE("the ground state is radial") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto rep = verify_radial_ground(p, build_grid(p, 0.0, 1000, Grading::Uniform, 1.0, true));
  CHECK(rep.radial);
  CHECK(rep.gap > 0.0);
}

TEST_CASE("higher sectors lie below l = 0") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto grid = build_grid(p, 6.0, 400);
  const auto s = solve_sectors(p, grid, 4, 2);
  for (std::size_t l = 1; l < s.size(); ++l) CHECK(s[l].pairs[0].lambda < s[l - 1].pairs[0].lambda);
}

TEST_CASE("grids") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto g = build_grid(p, 5.0, 100, Grading::Geometric, 1.01);
  CHECK(g.nodes.front() == 0.0);
  CHECK(g.nodes.back() == doctest::Approx(5.0));
  for (std::size_t i = 1; i + 1 < g.nodes.size(); ++i)
    CHECK(g.nodes[i + 1] - g.nodes[i] == doctest::Approx(1.01 * (g.nodes[i] - g.nodes[i - 1])));
  CHECK_THROWS_AS(build_grid(p, 5.0, 10), InvalidInput);
}
