#include "hkest/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "hkest/errors.hpp"

namespace hkest {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw InvalidInput("config key '" + key + "' = '" + value + "': " + why);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(x)) bad(key, v, "expected a finite number");
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end) bad(key, v, "expected an integer");
  return x;
}

int to_int(const std::string& key, const std::string& v, long long lo, long long hi) {
  const auto x = to_integer(key, v);
  if (x < lo || x > hi) bad(key, v, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(x);
}

double positive(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (!(x > 0.0)) bad(key, v, "expected a positive number");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "expected true or false");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) bad(key, v, "expected a comma-separated list of numbers");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

struct KeySpec {
  ConfigKey doc;
  Setter set;
};

const std::vector<KeySpec>& specs() {
  static const std::vector<KeySpec> s = {
      {{"params.N", "", "dimension, > 2"}, [](RunConfig& c, auto& k, auto& v) { c.N = to_int(k, v, 1, 64); }},
      {{"params.alpha", "", "diffusion exponent"}, [](RunConfig& c, auto& k, auto& v) { c.alpha = to_double(k, v); }},
      {{"params.beta", "", "potential exponent"}, [](RunConfig& c, auto& k, auto& v) { c.beta = to_double(k, v); }},
      {{"params.sanity_mode", "false", "accept exactly solvable cases outside the hypotheses"},
       [](RunConfig& c, auto& k, auto& v) { c.sanity_mode = to_bool(k, v); }},
      {{"debug.corrupt_envelope_phase", "false", "negative control: halve the envelope phase coefficient"},
       [](RunConfig& c, auto& k, auto& v) { c.corrupt_envelope_phase = to_bool(k, v); }},
      {{"grid.r_max", "auto", "outer radius or auto"},
       [](RunConfig& c, auto& k, auto& v) { c.r_max = v == "auto" ? 0.0 : positive(k, v); }},
      {{"grid.n", "4000", "intervals of the kernel grid"},
       [](RunConfig& c, auto& k, auto& v) { c.n = to_int(k, v, kMinIntervals, 1 << 24); }},
      {{"grid.grading", "uniform", "uniform or geometric"},
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "uniform")
           c.grading = Grading::Uniform;
         else if (v == "geometric")
           c.grading = Grading::Geometric;
         else
           bad(k, v, "expected uniform or geometric");
       }},
      {{"grid.ratio", "1.002", "spacing growth for geometric grading"},
       [](RunConfig& c, auto& k, auto& v) { c.ratio = positive(k, v); }},
      {{"spectral.modes", "10", "l = 0 modes reported by spectrum"},
       [](RunConfig& c, auto& k, auto& v) { c.modes = to_int(k, v, 1, 50); }},
      {{"spectral.ell_max", "32", "highest angular sector of the kernel model"},
       [](RunConfig& c, auto& k, auto& v) { c.ell_max = to_int(k, v, 0, 400); }},
      {{"spectral.tol", "1e-8", "ground-state ladder tolerance"},
       [](RunConfig& c, auto& k, auto& v) { c.tol = positive(k, v); }},
      {{"spectral.max_depth", "8", "ground-state ladder depth"},
       [](RunConfig& c, auto& k, auto& v) { c.max_depth = to_int(k, v, 2, 12); }},
      {{"spectral.sectors", "1", "sectors l >= 1 reported by spectrum"},
       [](RunConfig& c, auto& k, auto& v) { c.sectors = to_int(k, v, 0, 400); }},
      {{"kernel.t", "0.1,0.5,1", "kernel times"},
       [](RunConfig& c, auto& k, auto& v) {
         c.kernel_t = to_doubles(k, v);
         for (double t : c.kernel_t)
           if (!(t > 0.0)) bad(k, v, "times must be positive");
       }},
      {{"kernel.radii", "0.5,1,1.5,2", "kernel sample radii"},
       [](RunConfig& c, auto& k, auto& v) {
         c.kernel_radii = to_doubles(k, v);
         for (double r : c.kernel_radii)
           if (r < 0.0) bad(k, v, "radii must be nonnegative");
       }},
      {{"kernel.cosines", "-1,-0.5,0,0.5,1", "kernel sample cosines"},
       [](RunConfig& c, auto& k, auto& v) {
         c.kernel_cosines = to_doubles(k, v);
         for (double x : c.kernel_cosines)
           if (x < -1.0 || x > 1.0) bad(k, v, "cosines must lie in [-1, 1]");
       }},
      {{"kernel.backend", "expansion", "expansion, or stepper for on-diagonal values"},
       [](RunConfig& c, auto& k, auto& v) {
         if (v != "expansion" && v != "stepper") bad(k, v, "expected expansion or stepper");
         c.kernel_backend = v;
       }},
      {{"kernel.ell_tol", "1e-6", "angular truncation tolerance"},
       [](RunConfig& c, auto& k, auto& v) { c.ell_tol = positive(k, v); }},
      {{"wkb.lambda", "0", "eigenvalue parameter"}, [](RunConfig& c, auto& k, auto& v) { c.wkb_lambda = to_double(k, v); }},
      {{"wkb.k", "0", "expansion order, 0 for the default"},
       [](RunConfig& c, auto& k, auto& v) { c.wkb_k = to_int(k, v, 0, 64); }},
      {{"wkb.allow_low_order", "false", "accept k with k xi + 2 - alpha <= 0"},
       [](RunConfig& c, auto& k, auto& v) { c.wkb_allow_low_order = to_bool(k, v); }},
      {{"wkb.r_lo", "10", "residual fit range start"}, [](RunConfig& c, auto& k, auto& v) { c.wkb_r_lo = positive(k, v); }},
      {{"wkb.r_hi", "100", "residual fit range end"}, [](RunConfig& c, auto& k, auto& v) { c.wkb_r_hi = positive(k, v); }},
      {{"wkb.samples", "50", "residual samples"},
       [](RunConfig& c, auto& k, auto& v) { c.wkb_samples = to_int(k, v, 3, 100000); }},
      {{"verify.checkers", "all", "comma-separated checker ids or all"},
       [](RunConfig& c, auto& k, auto& v) {
         c.checkers.clear();
         if (v == "all") {
           c.checkers = known_checkers();
           return;
         }
         for (const auto& id : split_list(v)) {
           const auto& kc = known_checkers();
           if (std::find(kc.begin(), kc.end(), id) == kc.end()) bad(k, v, "unknown checker '" + id + "'");
           c.checkers.push_back(id);
         }
         if (c.checkers.empty()) bad(k, v, "no checkers selected");
       }},
      {{"verify.seed", "42", "seed for sobolev-sample"},
       [](RunConfig& c, auto& k, auto& v) {
         std::uint64_t x = 0;
         const auto* end = v.data() + v.size();
         const auto res = std::from_chars(v.data(), end, x);
         if (res.ec != std::errc() || res.ptr != end) bad(k, v, "expected an unsigned integer");
         c.seed = x;
       }},
      {{"verify.sobolev_samples", "5000", "random test functions"},
       [](RunConfig& c, auto& k, auto& v) { c.sobolev_samples = to_int(k, v, 100, 10000000); }},
      {{"verify.lattice.radii", "24", "radial samples on [1, 0.8 r_max]"},
       [](RunConfig& c, auto& k, auto& v) { c.lattice_radii = to_int(k, v, 2, 4096); }},
      {{"verify.lattice.cosines", "8", "angular samples"},
       [](RunConfig& c, auto& k, auto& v) { c.lattice_cosines = to_int(k, v, 1, 4096); }},
      {{"verify.lattice.times", "12", "times for the main bound"},
       [](RunConfig& c, auto& k, auto& v) { c.lattice_times = to_int(k, v, 3, 4096); }},
      {{"verify.eigen_modes", "6", "modes for eigenfunction-decay"},
       [](RunConfig& c, auto& k, auto& v) { c.eigen_modes = to_int(k, v, 1, 50); }},
      {{"verify.small_time.radii", "0,0.25,0.5,0.75,1", "diagonal radii for small-time"},
       [](RunConfig& c, auto& k, auto& v) {
         c.small_time_radii = to_doubles(k, v);
         for (double r : c.small_time_radii)
           if (r < 0.0) bad(k, v, "radii must be nonnegative");
       }},
      {{"verify.small_time.n", "2000", "intervals of the small-time grid"},
       [](RunConfig& c, auto& k, auto& v) { c.small_time_n = to_int(k, v, kMinIntervals, 1 << 24); }},
      {{"verify.small_time.ratio", "1.002", "geometric spacing growth of the small-time grid"},
       [](RunConfig& c, auto& k, auto& v) { c.small_time_ratio = positive(k, v); }},
      {{"verify.small_time.r_max", "auto", "outer radius of the small-time grid, auto for grid.r_max"},
       [](RunConfig& c, auto& k, auto& v) { c.small_time_r_max = v == "auto" ? 0.0 : positive(k, v); }},
      {{"output.dir", "out", "output directory"},
       [](RunConfig& c, auto& k, auto& v) {
         if (v.empty()) bad(k, v, "empty directory");
         c.out_dir = v;
       }},
      {{"output.formats", "csv,json", "csv and/or json"},
       [](RunConfig& c, auto& k, auto& v) {
         c.formats = split_list(v);
         if (c.formats.empty()) bad(k, v, "no formats");
         for (const auto& f : c.formats)
           if (f != "csv" && f != "json") bad(k, v, "unknown format '" + f + "'");
       }},
      {{"run.threads", "1", "worker threads"}, [](RunConfig& c, auto& k, auto& v) { c.threads = to_int(k, v, 1, 256); }},
  };
  return s;
}

}  // namespace

const std::vector<std::string>& known_checkers() {
  static const std::vector<std::string> ids = {"eigenfunction-decay", "groundstate-envelope", "log-psi",
                                               "lyapunov",            "main-upper",           "on-diagonal-lower",
                                               "small-time",          "sobolev-sample"};
  return ids;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& s : specs()) k.push_back(s.doc);
    return k;
  }();
  return keys;
}

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw InvalidInput(source + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read config file '" + path + "'");
  return parse_key_values(in, path);
}

void apply_assignment(KeyValues& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
    throw InvalidInput("expected key=value, got '" + assignment + "'");
  kv[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

RunConfig resolve_config(const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    const auto& s = specs();
    if (std::none_of(s.begin(), s.end(), [&](const KeySpec& k) { return k.doc.key == key; }))
      throw InvalidInput("unknown config key '" + key + "'");
  }
  RunConfig c;
  for (const auto& s : specs()) {
    const auto it = kv.find(s.doc.key);
    std::string value;
    if (it != kv.end()) {
      value = it->second;
    } else if (s.doc.fallback.empty()) {
      throw InvalidInput("missing required config key '" + s.doc.key + "'");
    } else {
      value = s.doc.fallback;
    }
    s.set(c, s.doc.key, value);
    c.resolved[s.doc.key] = value;
  }
  if (c.wkb_r_hi <= c.wkb_r_lo) throw InvalidInput("config key 'wkb.r_hi' must exceed 'wkb.r_lo'");
  // surfaces hypothesis violations as invalid input
  (void)c.params();
  return c;
}

OperatorParams RunConfig::params() const {
  auto p = make_params(N, alpha, beta, sanity_mode);
  return corrupt_envelope_phase ? corrupt_phase_for_testing(p) : p;
}

std::string config_echo(const RunConfig& c) {
  std::ostringstream os;
  for (const auto& [k, v] : c.resolved) os << k << "=" << v << "\n";
  return os.str();
}

}  // namespace hkest
