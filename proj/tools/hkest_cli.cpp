#include <CLI11.hpp>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hkest/config.hpp"
#include "hkest/errors.hpp"
#include "hkest/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<long long> seed;
  std::optional<int> threads;
  bool sanity = false;
  bool corrupt = false;
  std::vector<std::string> assignments;
  std::optional<double> lambda;
  std::optional<int> k;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "key=value configuration file")->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory (output.dir)");
  sub->add_option("--seed", f.seed, "random seed (verify.seed)");
  sub->add_option("--threads", f.threads, "worker threads (run.threads)");
  sub->add_flag("--sanity", f.sanity, "accept exactly solvable cases (params.sanity_mode)");
  sub->add_option("--set", f.assignments, "override one key, e.g. --set params.beta=4")->allow_extra_args(false);
}

hkest::KeyValues collect(const Flags& f) {
  hkest::KeyValues kv;
  if (!f.config.empty()) kv = hkest::read_config_file(f.config);
  for (const auto& a : f.assignments) hkest::apply_assignment(kv, a);
  if (f.out) kv["output.dir"] = *f.out;
  if (f.seed) kv["verify.seed"] = std::to_string(*f.seed);
  if (f.threads) kv["run.threads"] = std::to_string(*f.threads);
  if (f.sanity) kv["params.sanity_mode"] = "true";
  if (f.corrupt) kv["debug.corrupt_envelope_phase"] = "true";
  if (f.lambda) {
    std::ostringstream os;
    os << std::setprecision(17) << *f.lambda;
    kv["wkb.lambda"] = os.str();
  }
  if (f.k) kv["wkb.k"] = std::to_string(*f.k);
  return kv;
}

void print_keys() {
  for (const auto& k : hkest::config_keys())
    std::cout << std::left << std::setw(30) << k.key << " " << std::setw(18)
              << (k.fallback.empty() ? "(required)" : k.fallback) << " " << k.help << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat-kernel estimates for (1+|x|^alpha) Laplacian - |x|^beta"};
  app.require_subcommand(0, 1);
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print configuration keys with defaults");

  Flags f;
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues, eigenfunctions and the convergence ladder");
  auto* wkb = app.add_subcommand("wkb", "asymptotic expansion coefficients and residual decay");
  auto* kernel = app.add_subcommand("kernel", "heat-kernel slices");
  auto* verify = app.add_subcommand("verify", "run the bound checkers");
  auto* report = app.add_subcommand("report", "summarize an existing verify_report.json");
  for (auto* sub : {spectrum, wkb, kernel, verify, report}) add_common(sub, f);
  wkb->add_option("--lambda", f.lambda, "eigenvalue parameter (wkb.lambda)");
  wkb->add_option("--k", f.k, "expansion order (wkb.k)");
  verify->add_flag("--corrupt-envelope-phase", f.corrupt, "debug: inject an exponent error into the envelope");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hkest::kExitInvalid;
  }
  if (list_keys) {
    print_keys();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return hkest::kExitInvalid;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  hkest::RunConfig config;
  try {
    auto kv = collect(f);
    // report only reads an existing directory; the operator keys are optional there.
    if (name == "report" && !kv.count("params.N")) {
      kv.emplace("params.N", "3");
      kv.emplace("params.alpha", "2");
      kv.emplace("params.beta", "4");
    }
    config = hkest::resolve_config(kv);
  } catch (const hkest::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hkest::kExitInvalid;
  }
  return hkest::run_command(name, config, std::cout, std::cerr);
}
