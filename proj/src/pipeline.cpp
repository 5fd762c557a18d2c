#include "hkest/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "hkest/errors.hpp"
#include "hkest/fit.hpp"
#include "hkest/heat.hpp"
#include "hkest/wkb.hpp"

namespace hkest {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

bool wants(const RunConfig& c, const std::string& format) {
  return c.formats.empty() || std::find(c.formats.begin(), c.formats.end(), format) != c.formats.end();
}

fs::path prepare_dir(const RunConfig& c) {
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InvalidInput("cannot create output directory '" + c.out_dir + "'");
  return dir;
}

void write_text(const fs::path& path, const std::string& text, std::ostream& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InvalidInput("write failed for '" + path.string() + "'");
  log << "wrote " << path.string() << "\n";
}

std::ostringstream csv_stream() {
  std::ostringstream os;
  os << std::setprecision(15);
  return os;
}

json params_json(const OperatorParams& p) {
  json j;
  j["N"] = p.N();
  j["alpha"] = p.alpha();
  j["beta"] = p.beta();
  j["sanity_mode"] = p.sanity_mode();
  j["description"] = p.describe();
  return j;
}

json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : c.resolved) j[k] = v;
  return j;
}

void write_echo(const RunConfig& c, const fs::path& dir, std::ostream& log) {
  write_text(dir / "resolved_config.txt", config_echo(c), log);
}

RadialGrid kernel_grid(const RunConfig& c, const OperatorParams& p) {
  return build_grid(p, c.r_max, c.n, c.grading, c.ratio, !(c.r_max > 0.0));
}

GroundStateOptions ladder_options(const RunConfig& c, double r_max, int modes) {
  GroundStateOptions o;
  o.tol = c.tol;
  o.max_depth = c.max_depth;
  o.r_max = r_max;
  o.modes = modes;
  return o;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

int cmd_spectrum(const RunConfig& c, std::ostream& log) {
  const auto p = c.params();
  const auto dir = prepare_dir(c);
  write_echo(c, dir, log);
  const auto gs = ground_state(p, ladder_options(c, c.r_max, c.modes));
  const auto op0 = build_sector_operator(p, gs.grid, 0);

  std::vector<std::vector<EigenPair>> sectors = {gs.pairs};
  for (int l = 1; l <= c.sectors; ++l)
    sectors.push_back(solve_eigenpairs(build_sector_operator(p, gs.grid, l), c.modes));

  if (wants(c, "csv")) {
    auto os = csv_stream();
    os << "ell,index,lambda\n";
    for (const auto& sec : sectors)
      for (const auto& e : sec) os << e.ell << "," << e.index << "," << e.lambda << "\n";
    write_text(dir / "spectrum.csv", os.str(), log);

    auto ef = csv_stream();
    ef << "r";
    for (const auto& e : gs.pairs) ef << ",psi_" << e.index;
    ef << "\n";
    const int samples = 1000;
    for (int i = 0; i <= samples; ++i) {
      const double r = gs.grid.r_max * i / samples;
      ef << r;
      for (const auto& e : gs.pairs) ef << "," << interpolate(gs.grid, e.psi, r);
      ef << "\n";
    }
    write_text(dir / "eigenfunctions.csv", ef.str(), log);
  }
  if (wants(c, "json")) {
    json j;
    j["params"] = params_json(p);
    j["levels"] = json::array();
    for (const auto& lv : gs.ladder)
      j["levels"].push_back({{"n", lv.n}, {"r_max", lv.r_max}, {"lambda0", lv.lambda0}, {"lambda1", lv.lambda1}});
    j["lambda0"] = gs.lambda0;
    j["richardson"] = gs.richardson;
    j["monotone"] = gs.monotone;
    const auto rg = verify_radial_ground(p, gs.grid);
    j["radial_ground"] = {{"top_l0", rg.top_l0}, {"top_l1", rg.top_l1}, {"gap", rg.gap}, {"radial", rg.radial}};
    j["eigen_residual"] = eigen_residual(op0, gs.pairs);
    j["orthonormality_residual"] = orthonormality_residual(op0, gs.pairs);
    j["normalization"] = gs.pairs.front().normalization;
    j["config"] = config_json(c);
    write_text(dir / "ladder.json", j.dump(2) + "\n", log);
  }
  log << "lambda0 = " << std::setprecision(12) << gs.lambda0 << " after " << gs.ladder.size() << " levels\n";
  return kExitPass;
}

int cmd_wkb(const RunConfig& c, std::ostream& log) {
  const auto p = c.params();
  const auto dir = prepare_dir(c);
  write_echo(c, dir, log);
  const int k = c.wkb_k > 0 ? c.wkb_k : default_wkb_order(p);
  const auto e = wkb_coefficients(p, c.wkb_lambda, k, 1.0, c.wkb_allow_low_order);
  std::vector<std::string> warnings;
  if (e.order_below_threshold && !c.wkb_allow_low_order) {
    warnings.push_back("warning: k = " + std::to_string(k) +
                       " violates k xi + 2 - alpha > 0; the residual need not decay like r^-2");
    log << warnings.back() << "\n";
  }
  const auto rep = residual_decay_report(p, e, c.wkb_r_lo, c.wkb_r_hi, c.wkb_samples);
  if (wants(c, "csv")) {
    auto os = csv_stream();
    os << std::setprecision(17) << "i,c_i\n";
    for (std::size_t i = 0; i < e.coeffs.size(); ++i) os << i + 1 << "," << e.coeffs[i] << "\n";
    for (const auto& w : warnings) os << "# " << w << "\n";
    write_text(dir / "wkb_coefficients.csv", os.str(), log);
    auto rs = csv_stream();
    rs << "r,r2g_minus_lambda\n";
    for (std::size_t i = 0; i < rep.r.size(); ++i) rs << rep.r[i] << "," << rep.deviation[i] << "\n";
    write_text(dir / "wkb_residuals.csv", rs.str(), log);
  }
  if (wants(c, "json")) {
    json j;
    j["params"] = params_json(p);
    j["lambda"] = e.lambda;
    j["k"] = e.order_k;
    j["xi"] = e.xi;
    j["c0"] = e.c0;
    j["coefficients"] = e.coeffs;
    j["recurrence_residual"] = recurrence_residual(e);
    j["measured_slope"] = rep.measured_slope;
    j["expected_slope"] = rep.expected_slope;
    j["fit_rms_residual"] = rep.fit_rms_residual;
    j["r_squared"] = rep.r_squared;
    j["vacuous"] = rep.vacuous;
    j["note"] = rep.note;
    j["r_range"] = {c.wkb_r_lo, c.wkb_r_hi};
    j["warnings"] = warnings;
    j["config"] = config_json(c);
    write_text(dir / "wkb_slope.json", j.dump(2) + "\n", log);
  }
  if (rep.vacuous) log << "slope report: " << rep.note << "\n";
  else log << "slope " << rep.measured_slope << " (expected " << rep.expected_slope << ")\n";
  return kExitPass;
}

int cmd_kernel(const RunConfig& c, std::ostream& log) {
  const auto p = c.params();
  const auto dir = prepare_dir(c);
  write_echo(c, dir, log);
  const CoefficientFunctions cf(p);
  auto ts = c.kernel_t;
  std::sort(ts.begin(), ts.end());
  const auto grid = kernel_grid(c, p);
  auto os = csv_stream();
  os << "t,r_x,r_y,cos_theta,k_mu,k\n";
  json meta;
  meta["params"] = params_json(p);
  meta["backend"] = c.kernel_backend;
  meta["sanity_mode"] = p.sanity_mode();
  meta["grid"] = {{"r_max", grid.r_max}, {"intervals", grid.intervals()}};
  if (c.kernel_backend == "expansion") {
    const auto model = build_kernel_model(p, grid, c.ell_max, ts.front(), c.threads);
    meta["lambda0"] = model.lambda0;
    meta["ell_max"] = model.ell_max();
    meta["slices"] = json::array();
    for (double t : ts) {
      const auto s = kernel_slice(model, t, c.kernel_radii, c.kernel_cosines, c.ell_tol);
      for (std::size_t ci = 0; ci < s.cosines.size(); ++ci)
        for (std::size_t i = 0; i < s.radii.size(); ++i)
          for (std::size_t j = 0; j < s.radii.size(); ++j) {
            const double kmu = s.values[ci](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            os << t << "," << s.radii[i] << "," << s.radii[j] << "," << s.cosines[ci] << "," << kmu << ","
               << kmu / cf.a(s.radii[j]) << "\n";
          }
      const auto mass = mass_check(model, t);
      meta["slices"].push_back({{"t", t},
                                {"modes_used", s.modes_used},
                                {"truncation_bounds", s.truncation_bounds},
                                {"ell_tail_estimate", s.ell_tail_estimate},
                                {"mass_sup", mass.sup}});
    }
  } else {
    std::vector<std::size_t> nodes;
    for (double r : c.kernel_radii) nodes.push_back(nearest_node(grid, r));
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    const auto sd = stepped_diagonal(p, grid, nodes, ts, 160, c.ell_tol, {}, c.threads);
    std::vector<double> snapped;
    for (auto n : nodes) snapped.push_back(grid.nodes[n]);
    for (std::size_t k = 0; k < ts.size(); ++k)
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double kmu = sd.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
        os << ts[k] << "," << snapped[j] << "," << snapped[j] << ",1," << kmu << "," << kmu / cf.a(snapped[j]) << "\n";
      }
    meta["snapped_radii"] = snapped;
    meta["ell_used"] = sd.ell_used;
    meta["last_sector_contribution"] = sd.last_contribution;
    meta["note"] = "time stepper backend: on-diagonal values at grid nodes only";
  }
  meta["config"] = config_json(c);
  if (wants(c, "csv")) write_text(dir / "kernel.csv", os.str(), log);
  if (wants(c, "json")) write_text(dir / "kernel_meta.json", meta.dump(2) + "\n", log);
  return kExitPass;
}

VerifyOutcome run_verify_suite(const RunConfig& c) {
  const auto p = c.params();
  auto selected = [&](const std::string& id) {
    return std::find(c.checkers.begin(), c.checkers.end(), id) != c.checkers.end();
  };
  const bool sanity = p.sanity_mode();
  std::map<std::string, BoundReport> done;
  std::vector<std::pair<std::string, std::function<BoundReport()>>> jobs;

  if (sanity) {
    for (const char* id : {"groundstate-envelope", "eigenfunction-decay", "on-diagonal-lower", "main-upper", "log-psi"})
      if (selected(id)) done[id] = skipped_report(id, p);
  }
  const bool need_gs = !sanity && (selected("groundstate-envelope") || selected("log-psi") ||
                                   selected("on-diagonal-lower"));
  const bool need_model =
      !sanity && (selected("eigenfunction-decay") || selected("on-diagonal-lower") || selected("main-upper"));

  std::optional<GroundState> gs;
  if (need_gs) gs = ground_state(p, ladder_options(c, c.r_max, 2));
  double c1 = 0.0;
  if (need_gs && (selected("groundstate-envelope") || selected("on-diagonal-lower"))) {
    const auto gs2 = ground_state(p, ladder_options(c, 2.0 * gs->grid.r_max, 2));
    auto env = check_groundstate_envelope(p, gs->grid, gs->psi(), gs2.grid, gs2.psi(), c.lattice_radii);
    c1 = env.constant("C1");
    if (selected("groundstate-envelope")) done[env.id] = std::move(env);
  }
  std::optional<KernelModel> model;
  if (need_model) model = build_kernel_model(p, kernel_grid(c, p), c.ell_max, kExpansionMinTime, c.threads);

  if (selected("log-psi") && gs) jobs.emplace_back("log-psi", [&] { return check_log_psi(p, gs->grid, gs->psi()); });
  if (selected("eigenfunction-decay") && model)
    jobs.emplace_back("eigenfunction-decay", [&] {
      const auto& pairs = model->sectors[0].pairs;
      const std::vector<EigenPair> first(pairs.begin(),
                                         pairs.begin() + std::min<std::ptrdiff_t>(c.eigen_modes, std::ssize(pairs)));
      return check_eigenfunction_decay(p, model->grid, first, c.lattice_radii);
    });
  if (selected("on-diagonal-lower") && model)
    jobs.emplace_back("on-diagonal-lower", [&] {
      std::vector<double> ts(static_cast<std::size_t>(c.lattice_times));
      log_space(kExpansionMinTime, 2.0, ts);
      ts.push_back(20.0 / std::abs(model->lambda0));
      return check_on_diagonal_lower(*model, ts, c.lattice_radii, c1);
    });
  if (selected("main-upper") && model)
    jobs.emplace_back("main-upper", [&] {
      MainUpperOptions o;
      o.radii = c.lattice_radii;
      o.cosines = c.lattice_cosines;
      o.times = c.lattice_times;
      return check_main_upper(*model, o);
    });
  if (selected("small-time"))
    jobs.emplace_back("small-time", [&] {
      const double r_max = c.small_time_r_max > 0.0 ? c.small_time_r_max : c.r_max;
      const auto grid = build_grid(p, r_max, c.small_time_n, Grading::Geometric, c.small_time_ratio, !(r_max > 0.0));
      SmallTimeOptions o;
      o.radii = c.small_time_radii;
      o.ell_tol = c.ell_tol;
      return check_small_time(p, grid, o);
    });
  if (selected("lyapunov")) jobs.emplace_back("lyapunov", [&] { return lyapunov_check(p); });
  if (selected("sobolev-sample"))
    jobs.emplace_back("sobolev-sample",
                      [&] { return sobolev_sample_check(p, kernel_grid(c, p), c.sobolev_samples, c.seed); });

  std::vector<BoundReport> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = jobs[i].second();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto nthreads = std::min<std::size_t>(static_cast<std::size_t>(c.threads), jobs.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    done[jobs[i].first] = std::move(results[i]);
  }

  VerifyOutcome out;
  for (auto& [id, rep] : done) {
    if (rep.verdict == Verdict::Fail) ++out.failed;
    if (rep.verdict == Verdict::InconclusiveWithDrift) ++out.inconclusive;
    if (rep.verdict == Verdict::Skipped) ++out.skipped;
    out.reports.push_back(std::move(rep));
  }
  return out;
}

std::string verify_report_json(const RunConfig& c, const VerifyOutcome& v) {
  json j;
  j["schema"] = "hkest-verify-report/1";
  j["params"] = params_json(c.params());
  j["corrupted_envelope_phase"] = c.corrupt_envelope_phase;
  j["summary"] = {{"checkers", v.reports.size()},
                  {"failed", v.failed},
                  {"inconclusive", v.inconclusive},
                  {"skipped", v.skipped},
                  {"exit_code", v.exit_code()}};
  j["reports"] = json::parse(to_json(v.reports));
  j["config"] = config_json(c);
  return j.dump(2) + "\n";
}

int cmd_verify(const RunConfig& c, std::ostream& log) {
  const auto dir = prepare_dir(c);
  write_echo(c, dir, log);
  const auto v = run_verify_suite(c);
  for (const auto& r : v.reports) log << std::left << std::setw(22) << r.id << " " << to_string(r.verdict) << "\n";
  write_text(dir / "verify_report.json", verify_report_json(c, v), log);
  if (v.inconclusive > 0) log << "warnings: " << v.inconclusive << " inconclusive-with-drift\n";
  if (v.failed > 0) log << "failed: " << v.failed << "\n";
  return v.exit_code();
}

int cmd_report(const RunConfig& c, std::ostream& log) {
  const fs::path dir(c.out_dir);
  const auto path = dir / "verify_report.json";
  std::ifstream in(path);
  if (!in) throw InvalidInput("no verify report at '" + path.string() + "'; run verify first");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput("malformed verify report: " + std::string(e.what()));
  }
  if (!j.contains("reports") || !j["reports"].is_array()) throw InvalidInput("verify report has no reports array");
  auto os = csv_stream();
  os << "id,verdict,margin,notes\n";
  int failed = 0;
  for (const auto& r : j["reports"]) {
    for (const char* field : {"id", "constants", "verdict", "worst_point", "lattice", "notes"})
      if (!r.contains(field)) throw InvalidInput(std::string("report entry lacks field '") + field + "'");
    const auto verdict = r["verdict"].get<std::string>();
    if (verdict == "fail") ++failed;
    std::string margin;
    if (r["worst_point"].contains("margin") && r["worst_point"]["margin"].is_number()) {
      std::ostringstream m;
      m << std::setprecision(6) << r["worst_point"]["margin"].get<double>();
      margin = m.str();
    }
    std::string notes;
    for (const auto& n : r["notes"]) notes += (notes.empty() ? "" : "; ") + n.get<std::string>();
    std::replace(notes.begin(), notes.end(), '"', '\'');
    os << r["id"].get<std::string>() << "," << verdict << "," << margin << ",\"" << notes << "\"\n";
    log << std::left << std::setw(22) << r["id"].get<std::string>() << " " << std::setw(24) << verdict << " "
        << margin << "\n";
  }
  write_text(dir / "verify_summary.csv", os.str(), log);
  return failed > 0 ? kExitViolation : kExitPass;
}

int run_command(const std::string& name, const RunConfig& c, std::ostream& log, std::ostream& err) {
  static const std::map<std::string, std::function<int(const RunConfig&, std::ostream&)>> commands = {
      {"spectrum", cmd_spectrum}, {"wkb", cmd_wkb}, {"kernel", cmd_kernel}, {"verify", cmd_verify}, {"report", cmd_report}};
  const auto it = commands.find(name);
  if (it == commands.end()) {
    err << "error: unknown command '" << name << "'\n";
    return kExitInvalid;
  }
  const auto started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitPass;
  std::string message;
  try {
    code = it->second(c, log);
  } catch (const InvalidInput& e) {
    code = kExitInvalid;
    message = e.what();
  } catch (const ConvergenceFailure& e) {
    code = kExitNonConvergence;
    message = e.what();
  }
  if (!message.empty()) err << "error: " << message << "\n";
  if (name != "report") {
    std::error_code ec;
    if (fs::is_directory(c.out_dir, ec)) {
      json info;
      info["command"] = name;
      info["started_utc"] = started;
      info["finished_utc"] = utc_now();
      info["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      info["exit_code"] = code;
      info["message"] = message;
      std::ofstream(fs::path(c.out_dir) / "run_info.json") << info.dump(2) << "\n";
    }
  }
  return code;
}

}  // namespace hkest
