#pragma once

// Subcommand pipelines behind the command-line tool. Each command writes its
// files into RunConfig::out_dir next to resolved_config.txt; run_command adds
// run_info.json with the timestamps and maps failures to exit codes.

#include <iosfwd>
#include <string>
#include <vector>

#include "hkest/config.hpp"
#include "hkest/verify.hpp"

namespace hkest {

inline constexpr int kExitPass = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNonConvergence = 3;

/// spectrum.csv (ell, index, lambda), eigenfunctions.csv and ladder.json.
int cmd_spectrum(const RunConfig& c, std::ostream& log);
/// wkb_coefficients.csv, wkb_residuals.csv and wkb_slope.json.
int cmd_wkb(const RunConfig& c, std::ostream& log);
/// kernel.csv (t, r_x, r_y, cos_theta, k_mu, k) and kernel_meta.json.
int cmd_kernel(const RunConfig& c, std::ostream& log);
/// verify_report.json; 1 if any checker fails.
int cmd_verify(const RunConfig& c, std::ostream& log);
/// Reads verify_report.json from out_dir and writes verify_summary.csv.
int cmd_report(const RunConfig& c, std::ostream& log);

struct VerifyOutcome {
  std::vector<BoundReport> reports;  // sorted by id
  int failed = 0;
  int inconclusive = 0;
  int skipped = 0;
  int exit_code() const { return failed > 0 ? kExitViolation : kExitPass; }
};

/// Runs the checkers selected in c.checkers and merges their reports.
VerifyOutcome run_verify_suite(const RunConfig& c);

/// The aggregate report: params, resolved config, summary and reports.
/// Contains no timestamps, so equal inputs give byte-identical text.
std::string verify_report_json(const RunConfig& c, const VerifyOutcome& v);

/// Dispatches "spectrum" | "wkb" | "kernel" | "verify" | "report", maps
/// InvalidInput to 2 and ConvergenceFailure to 3, and writes run_info.json.
int run_command(const std::string& name, const RunConfig& c, std::ostream& log, std::ostream& err);

}  // namespace hkest
