#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "hkest/config.hpp"
#include "hkest/errors.hpp"
#include "hkest/pipeline.hpp"

using namespace hkest;

namespace {

KeyValues kv_of(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hkest_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("parsing") {
  const auto kv = kv_of("# comment\nparams.N = 3\n\nparams.alpha=2 # trailing\n params.beta=4\n");
  CHECK(kv.at("params.N") == "3");
  CHECK(kv.at("params.alpha") == "2");
  CHECK(kv.at("params.beta") == "4");
  CHECK_THROWS_AS(kv_of("params.N 3\n"), InvalidInput);
  KeyValues o = kv;
  apply_assignment(o, "params.beta=5");
  CHECK(o.at("params.beta") == "5");
  CHECK_THROWS_AS(apply_assignment(o, "nonsense"), InvalidInput);
}

TEST_CASE("missing beta names the key") {
  try {
    resolve_config(kv_of("params.N=3\nparams.alpha=2\n"));
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("params.beta") != std::string::npos);
  }
}

TEST_CASE("validation") {
  const std::string base = "params.N=3\nparams.alpha=2\nparams.beta=4\n";
  CHECK_NOTHROW(resolve_config(kv_of(base)));
  CHECK_THROWS_AS(resolve_config(kv_of(base + "params.gamma=1\n")), InvalidInput);
  CHECK_THROWS_AS(resolve_config(kv_of(base + "verify.checkers=nope\n")), InvalidInput);
  CHECK_THROWS_AS(resolve_config(kv_of(base + "grid.n=abc\n")), InvalidInput);
  CHECK_THROWS_AS(resolve_config(kv_of("params.N=3\nparams.alpha=1\nparams.beta=4\n")), InvalidInput);
  const auto c = resolve_config(kv_of(base));
  CHECK(c.checkers == known_checkers());
  CHECK(c.resolved.size() == config_keys().size());
  // the echo parses back to the same configuration
  std::istringstream echo(config_echo(c));
  CHECK(config_echo(resolve_config(parse_key_values(echo))) == config_echo(c));
}

TEST_CASE("cmd_spectrum on the oscillator") {
  const auto dir = scratch("spectrum");
  auto c = resolve_config(kv_of("params.N=3\nparams.alpha=0\nparams.beta=2\nparams.sanity_mode=true\noutput.dir=" +
                                dir.string() + "\n"));
  std::ostringstream log, err;
  CHECK(run_command("spectrum", c, log, err) == kExitPass);
  std::istringstream csv(slurp(dir / "spectrum.csv"));
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "ell,index,lambda");
  CHECK(first.rfind("0,0,", 0) == 0);
  CHECK(std::stod(first.substr(4)) == doctest::Approx(-3.0).epsilon(1e-6 / 3));
  CHECK(std::filesystem::exists(dir / "resolved_config.txt"));
  CHECK(std::filesystem::exists(dir / "run_info.json"));
}

TEST_CASE("cmd_wkb golden file and low-order warning") {
  const auto dir = scratch("wkb");
  auto c = resolve_config(kv_of("params.N=3\nparams.alpha=2\nparams.beta=4\nwkb.k=3\noutput.dir=" + dir.string() + "\n"));
  std::ostringstream log, err;
  CHECK(run_command("wkb", c, log, err) == kExitPass);
  const auto text = slurp(dir / "wkb_coefficients.csv");
  for (const char* v : {"-0.375", "0.75", "-2.3203125"}) CHECK(text.find(v) != std::string::npos);

  c = resolve_config(kv_of("params.N=3\nparams.alpha=6\nparams.beta=4.5\nwkb.k=1\noutput.dir=" + dir.string() + "\n"));
  std::ostringstream log2;
  CHECK(run_command("wkb", c, log2, err) == kExitPass);
  CHECK(log2.str().find("warning") != std::string::npos);

  c = resolve_config(kv_of("params.N=3\nparams.alpha=2\nparams.beta=4\nwkb.lambda=0.75\noutput.dir=" + dir.string() + "\n"));
  CHECK(run_command("wkb", c, log, err) == kExitPass);
  const auto j = nlohmann::json::parse(slurp(dir / "wkb_slope.json"));
  CHECK(j["vacuous"] == true);
  for (double v : j["coefficients"]) CHECK(v == 0.0);
}

TEST_CASE("cmd_kernel refuses t = 0.001 and writes symmetric rows") {
  const auto dir = scratch("kernel");
  const std::string base = "params.N=3\nparams.alpha=2\nparams.beta=4\ngrid.n=800\nspectral.ell_max=8\noutput.dir=" +
                           dir.string() + "\n";
  std::ostringstream log, err;
  CHECK(run_command("kernel", resolve_config(kv_of(base + "kernel.t=0.001\n")), log, err) == kExitNonConvergence);
  CHECK(err.str().find("insufficient spectral resolution") != std::string::npos);

  CHECK(run_command("kernel", resolve_config(kv_of(base + "kernel.t=0.5\n")), log, err) == kExitPass);
  std::istringstream csv(slurp(dir / "kernel.csv"));
  std::string line;
  std::getline(csv, line);
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::string> rows;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string s; std::getline(ls, s, ',');) f.push_back(s);
    rows[{f[0], f[1], f[2], f[3]}] = f[4];
  }
  CHECK(rows.size() == 80);
  for (const auto& [k, v] : rows) {
    const auto& [t, a, b, cth] = k;
    CHECK(std::stod(rows.at({t, b, a, cth})) == doctest::Approx(std::stod(v)).epsilon(1e-12));
  }
}

TEST_CASE("cmd_verify report schema, determinism and report round trip") {
  const auto d1 = scratch("verify1"), d2 = scratch("verify2");
  const std::string base = "params.N=3\nparams.alpha=2\nparams.beta=4\nverify.checkers=lyapunov,sobolev-sample,log-psi\n"
                           "verify.sobolev_samples=300\ngrid.n=600\n";
  std::ostringstream log, err;
  auto c1 = resolve_config(kv_of(base + "output.dir=" + d1.string() + "\n"));
  auto c2 = resolve_config(kv_of(base + "output.dir=" + d1.string() + "\nrun.threads=3\n"));
  CHECK(run_command("verify", c1, log, err) == kExitPass);
  const auto first = slurp(d1 / "verify_report.json");
  c2.out_dir = d2.string();
  c2.resolved = c1.resolved;
  CHECK(run_command("verify", c2, log, err) == kExitPass);
  CHECK(slurp(d2 / "verify_report.json") == first);

  const auto j = nlohmann::json::parse(first);
  for (const char* f : {"schema", "params", "summary", "reports", "config"}) CHECK(j.contains(f));
  CHECK(j["reports"].size() == 3);
  for (const auto& r : j["reports"])
    for (const char* f : {"id", "constants", "verdict", "worst_point", "lattice", "notes"}) CHECK(r.contains(f));

  CHECK(run_command("report", c1, log, err) == kExitPass);
  CHECK(std::filesystem::exists(d1 / "verify_summary.csv"));
}

TEST_CASE("cmd_verify exits 1 when the envelope phase is corrupted") {
  const auto dir = scratch("corrupt");
  auto c = resolve_config(kv_of("params.N=3\nparams.alpha=2\nparams.beta=4\ndebug.corrupt_envelope_phase=true\n"
                                "verify.checkers=groundstate-envelope\noutput.dir=" + dir.string() + "\n"));
  std::ostringstream log, err;
  CHECK(run_command("verify", c, log, err) == kExitViolation);
}
