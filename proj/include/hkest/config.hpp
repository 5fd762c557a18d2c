#pragma once

// Run configuration: flat key=value text with dotted section prefixes
// (params.N=3). Later sources override earlier ones; every key has a
// documented default except params.N, params.alpha and params.beta.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hkest/model.hpp"
#include "hkest/spectral.hpp"

namespace hkest {

using KeyValues = std::map<std::string, std::string>;

/// Parses "key = value" lines; '#' starts a comment. Throws InvalidInput
/// naming the source and line for malformed lines.
KeyValues parse_key_values(std::istream& in, const std::string& source = "config");
KeyValues read_config_file(const std::string& path);
/// "key=value" from the command line.
void apply_assignment(KeyValues& kv, const std::string& assignment);

struct RunConfig {
  int N = 3;
  double alpha = 0.0;
  double beta = 0.0;
  bool sanity_mode = false;
  bool corrupt_envelope_phase = false;

  double r_max = 0.0;  // <= 0: automatic
  int n = 4000;
  Grading grading = Grading::Uniform;
  double ratio = 1.002;

  int modes = 10;
  int ell_max = 32;
  double tol = 1e-8;
  int max_depth = 8;
  int sectors = 1;

  std::vector<double> kernel_t;
  std::vector<double> kernel_radii;
  std::vector<double> kernel_cosines;
  std::string kernel_backend = "expansion";
  double ell_tol = 1e-6;

  double wkb_lambda = 0.0;
  int wkb_k = 0;  // 0: default order
  bool wkb_allow_low_order = false;
  double wkb_r_lo = 10.0;
  double wkb_r_hi = 100.0;
  int wkb_samples = 50;

  std::vector<std::string> checkers;
  std::uint64_t seed = 42;
  int sobolev_samples = 5000;
  int lattice_radii = 24;
  int lattice_cosines = 8;
  int lattice_times = 12;
  int eigen_modes = 6;
  std::vector<double> small_time_radii;
  int small_time_n = 2000;
  double small_time_ratio = 1.002;
  double small_time_r_max = 0.0;  // <= 0: the grid r_max

  std::string out_dir = "out";
  std::vector<std::string> formats;
  int threads = 1;

  KeyValues resolved;  // every key with its effective value

  OperatorParams params() const;
};

/// Validates kv against the known keys and fills defaults. Throws
/// InvalidInput for unknown keys, missing required keys and values outside
/// their documented ranges.
RunConfig resolve_config(const KeyValues& kv);

/// The resolved configuration as key=value lines, sorted by key.
std::string config_echo(const RunConfig& c);

/// Checker identifiers accepted by verify.checkers.
const std::vector<std::string>& known_checkers();

/// Known keys with their defaults ("" for required) and a one-line summary.
struct ConfigKey {
  std::string key;
  std::string fallback;
  std::string help;
};
const std::vector<ConfigKey>& config_keys();

}  // namespace hkest
