#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <random>

#include "hkest/spectral.hpp"
#include "hkest/verify.hpp"

using namespace hkest;

TEST_CASE("Lyapunov exponent spot checks") {
  CHECK(lyapunov_gamma(make_params(3, 6.0, 5.0)) == -1.5);
  CHECK(lyapunov_gamma(make_params(5, 5.0, 4.0)) == -3.75);
  CHECK(lyapunov_gamma(make_params(4, 2.0, 4.0)) == -1.0);
}

TEST_CASE("Lyapunov certificate for (5, 5, 4)") {
  const auto rep = lyapunov_check(make_params(5, 5.0, 4.0));
  CHECK(rep.verdict == Verdict::Pass);
  CHECK(std::isfinite(rep.constant("kappa")));
  CHECK(rep.constant("max_A_phi_minus_kappa_phi") <= 0.0);
}

TEST_CASE("A phi / phi against a finite-difference Laplacian") {
  const auto p = make_params(5, 5.0, 4.0);
  const double e = (2.0 - 5) / 4.0;
  auto phi = [&](double r) { return std::pow(1 + std::pow(r, 5.0), e); };
  for (double r : {0.5, 1.0, 2.0, 4.0}) {
    auto fd = [&](double s) {
      return (phi(r + s) - 2 * phi(r) + phi(r - s)) / (s * s) + 4 / r * (phi(r + s) - phi(r - s)) / (2 * s);
    };
    const double s = 1e-2 * r;
    const double lap = (4 * fd(s / 2) - fd(s)) / 3;
    const double expect = ((1 + std::pow(r, 5.0)) * lap - std::pow(r, 4.0) * phi(r)) / phi(r);
    CHECK(lyapunov_ratio(p, r) == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("Sobolev ratio of the half hat at the origin") {
  // u = 1 - r/h on [0, h], g = 1 there, a = 1, V = 0:
  // ratio = 3^{2/3} / (10 |S^2|^{2/3}) for every h
  const auto p = make_params(3, 0.0, 0.0, true);
  const double expect = std::pow(3.0, 2.0 / 3.0) / (10.0 * std::pow(4 * M_PI, 2.0 / 3.0));
  for (double r_max : {1.0, 7.0}) {
    const auto grid = build_grid(p, r_max, 64);
    std::vector<double> u(64, 0.0), g(64, 0.0);
    u[0] = 1.0;
    g[0] = 1.0;
    CHECK(sobolev_ratio(p, grid, u, g) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("Sobolev ratio is invariant under scaling of u and g") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto grid = build_grid(p, 4.0, 200);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> u(200), g(200), u2(200), g2(200);
  for (std::size_t i = 0; i < 200; ++i) {
    u[i] = U(rng);
    g[i] = U(rng);
    u2[i] = -3.5 * u[i];
    g2[i] = 0.01 * g[i];
  }
  const double base = sobolev_ratio(p, grid, u, g);
  CHECK(base > 0.0);
  CHECK(sobolev_ratio(p, grid, u2, g2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("Sobolev sampling is reproducible and bounded") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto grid = build_grid(p, 0.0, 800, Grading::Uniform, 1.0, true);
  const auto a = sobolev_sample_check(p, grid, 400, 11);
  const auto b = sobolev_sample_check(p, grid, 400, 11);
  CHECK(to_json(a) == to_json(b));
  CHECK(a.constant("max_ratio") > 0.0);
  CHECK(a.constant("max_ratio") < 1.0);
}

TEST_CASE("report JSON carries the documented fields") {
  BoundReport r;
  r.id = "x";
  r.set("C", 1.5);
  r.worst_point = {{"r", 2.0}, {"margin", 0.1}};
  r.lattice = "lattice";
  r.notes = {"note"};
  const auto j = nlohmann::json::parse(to_json(r));
  for (const char* f : {"id", "constants", "verdict", "worst_point", "lattice", "notes"}) CHECK(j.contains(f));
  CHECK(j["verdict"] == "pass");
  CHECK(j["constants"]["C"] == 1.5);
  CHECK_THROWS_AS(r.constant("missing"), std::out_of_range);
  CHECK(std::string(to_string(Verdict::InconclusiveWithDrift)) == "inconclusive-with-drift");

  BoundReport z = r;
  z.id = "a";
  const auto arr = nlohmann::json::parse(to_json(std::vector<BoundReport>{r, z}));
  CHECK(arr[0]["id"] == "a");
}

TEST_CASE("groundstate envelope: passes for (4, 4, 4), fails when the phase is corrupted") {
  const auto p = make_params(4, 4.0, 4.0);
  GroundStateOptions o;
  o.r_max = 8.0;
  const auto gs = ground_state(p, o);
  o.r_max = 16.0;
  const auto gs2 = ground_state(p, o);
  const auto ok = check_groundstate_envelope(p, gs.grid, gs.psi(), gs2.grid, gs2.psi());
  CHECK(ok.verdict == Verdict::Pass);
  CHECK(ok.constant("C2") / ok.constant("C1") <= 10.0);
  const auto bad = corrupt_phase_for_testing(p);
  const auto rep = check_groundstate_envelope(bad, gs.grid, gs.psi(), gs2.grid, gs2.psi());
  CHECK(rep.verdict == Verdict::Fail);
}

TEST_CASE("log psi fit for (3, 2, 4)") {
  const auto p = make_params(3, 2.0, 4.0);
  const auto gs = ground_state(p);
  const auto rep = check_log_psi(p, gs.grid, gs.psi());
  CHECK(rep.verdict == Verdict::Pass);
}

TEST_CASE("sanity parameters are skipped by hypothesis-bound checkers") {
  const auto rep = skipped_report("main-upper", make_params(3, 0.0, 2.0, true));
  CHECK(rep.verdict == Verdict::Skipped);
  CHECK_FALSE(rep.notes.empty());
}
