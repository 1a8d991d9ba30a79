#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "l1reg/errors.hpp"
#include "l1reg/io.hpp"
#include "l1reg/solvers.hpp"

#ifndef L1REG_DATA_DIR
#define L1REG_DATA_DIR "data"
#endif

namespace l1reg::harness {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class ProblemKind { d1, d2 };

inline const char* to_string(ProblemKind k) { return k == ProblemKind::d1 ? "1d" : "2d"; }

struct SweepConfig {
  double lo = 1e-1;
  double hi = 1e3;
  int count = 121;
};

/// Crop window of the 2-D reconstruction written next to the full image.
/// Zoom window for 2-D reconstructions; the default frames the head and camera.
struct CropWindow {
  int row = 64;
  int col = 160;
  int rows = 192;
  int cols = 192;
};

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::d1;
  /// Signal length (1d) or image side (2d).
  int n = 512;
  double sigma2 = 24.0;
  int band = 60;
  double snr_db = 20.0;
  std::uint64_t seed = 1;
  /// Ground truth: a CSV (1d) or graymap (2d). "synthetic" makes a built-in
  /// piecewise-constant phantom of size n, for small runs.
  std::string truth = "";
  SolverConfig solver;
  SelectorConfig selector;
  SweepConfig sweep;
  std::filesystem::path output_dir = "out";
  CropWindow crop;

  /// Reference settings for each experiment.
  static ExperimentConfig defaults(ProblemKind kind) {
    ExperimentConfig c;
    c.problem = kind;
    if (kind == ProblemKind::d1) {
      c.n = 512;
      c.sigma2 = 24.0;
      c.band = 60;
      c.solver.tau = 0.005;
      c.solver.epsilon = 0.0003;
      c.truth = std::string(L1REG_DATA_DIR) + "/signal_1d.csv";
    } else {
      c.n = 512;
      c.sigma2 = 16.0;
      c.band = 40;
      c.solver.tau = 0.01;
      c.solver.epsilon = 0.01;
      c.truth = std::string(L1REG_DATA_DIR) + "/cameraman.pgm";
    }
    return c;
  }

  void validate() const {
    BlurSpec1D{n, sigma2, band}.validate();
    if (sweep.count < 2 || !(sweep.lo > 0.0) || !(sweep.lo < sweep.hi)) {
      throw ConfigError("sweep: need count >= 2 and 0 < lo < hi");
    }
    solver.validate();
    selector.validate();
  }
};

inline SelectorKind parse_selector_kind(const std::string& s) {
  if (s == "gcv") return SelectorKind::gcv;
  if (s == "chi2-central" || s == "chi2c" || s == "central") return SelectorKind::chi2_central;
  if (s == "chi2-noncentral" || s == "chi2nc" || s == "noncentral") return SelectorKind::chi2_noncentral;
  if (s == "dp") return SelectorKind::dp;
  if (s == "rwp") return SelectorKind::rwp;
  throw ConfigError("unknown selector '" + s + "'");
}

inline Method parse_method(const std::string& s) {
  if (s == "sb" || s == "SB") return Method::sb;
  if (s == "mm" || s == "MM") return Method::mm;
  throw ConfigError("unknown method '" + s + "'");
}

/// "off" disables freezing.
inline std::optional<double> parse_tol_lambda(const std::string& s) {
  if (s == "off" || s == "none") return std::nullopt;
  return parse_double(s);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace detail

/// Flat "section.key" -> value map of a key=value file with [section] headers.
inline std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    kv[full] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

/// Applies one "section.key" setting.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "problem.kind") {
    // handled before defaults are chosen
  } else if (key == "problem.n" || key == "problem.n_side") {
    c.n = parse_int(key, v);
  } else if (key == "problem.sigma2") {
    c.sigma2 = parse_real(key, v);
  } else if (key == "problem.band") {
    c.band = parse_int(key, v);
  } else if (key == "problem.snr_db") {
    c.snr_db = parse_real(key, v);
  } else if (key == "problem.seed") {
    try {
      c.seed = std::stoull(v);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected an unsigned integer");
    }
  } else if (key == "problem.truth") {
    c.truth = v;
  } else if (key == "solver.method") {
    c.solver.method = parse_method(v);
  } else if (key == "solver.tau") {
    c.solver.tau = parse_real(key, v);
  } else if (key == "solver.epsilon") {
    c.solver.epsilon = parse_real(key, v);
  } else if (key == "solver.tol_x") {
    c.solver.tol_x = parse_real(key, v);
  } else if (key == "solver.tol_lambda") {
    c.solver.tol_lambda = parse_tol_lambda(v);
  } else if (key == "solver.max_iter") {
    c.solver.max_iter = parse_int(key, v);
  } else if (key == "solver.x_init") {
    if (v == "data") {
      c.solver.x_init = InitPolicy::data;
    } else if (v == "zero") {
      c.solver.x_init = InitPolicy::zero;
    } else {
      throw ConfigError(key + ": expected data or zero");
    }
  } else if (key == "solver.fixed_lambda") {
    c.solver.selector = FixedLambda{parse_real(key, v)};
  } else if (key == "solver.record_time") {
    c.solver.record_time = parse_bool(key, v);
  } else if (key == "selector.kind") {
    c.selector.kind = parse_selector_kind(v);
  } else if (key == "selector.alpha") {
    c.selector.alpha = parse_real(key, v);
  } else if (key == "selector.nu") {
    c.selector.nu = parse_real(key, v);
  } else if (key == "selector.delta") {
    c.selector.delta = parse_real(key, v);
  } else if (key == "selector.grid_lo") {
    c.selector.grid_lo = parse_real(key, v);
  } else if (key == "selector.grid_hi") {
    c.selector.grid_hi = parse_real(key, v);
  } else if (key == "selector.grid_count") {
    c.selector.grid_count = parse_int(key, v);
  } else if (key == "selector.newton_tol") {
    c.selector.newton_tol = parse_real(key, v);
  } else if (key == "selector.newton_max_iter") {
    c.selector.newton_max_iter = parse_int(key, v);
  } else if (key == "sweep.lo") {
    c.sweep.lo = parse_real(key, v);
  } else if (key == "sweep.hi") {
    c.sweep.hi = parse_real(key, v);
  } else if (key == "sweep.count") {
    c.sweep.count = parse_int(key, v);
  } else if (key == "output.dir") {
    c.output_dir = v;
  } else if (key == "output.crop_row") {
    c.crop.row = parse_int(key, v);
  } else if (key == "output.crop_col") {
    c.crop.col = parse_int(key, v);
  } else if (key == "output.crop_rows") {
    c.crop.rows = parse_int(key, v);
  } else if (key == "output.crop_cols") {
    c.crop.cols = parse_int(key, v);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

/// Parses a config; `kind_hint` is used when the text has no problem.kind.
inline ExperimentConfig parse_config(std::istream& in, ProblemKind kind_hint = ProblemKind::d1) {
  const auto kv = read_key_values(in);
  ProblemKind kind = kind_hint;
  if (const auto it = kv.find("problem.kind"); it != kv.end()) {
    if (it->second == "1d") {
      kind = ProblemKind::d1;
    } else if (it->second == "2d") {
      kind = ProblemKind::d2;
    } else {
      throw ConfigError("problem.kind: expected 1d or 2d");
    }
  }
  ExperimentConfig c = ExperimentConfig::defaults(kind);
  for (const auto& [k, v] : kv) apply_setting(c, k, v);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    ProblemKind kind_hint = ProblemKind::d1) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, kind_hint);
}

}  // namespace l1reg::harness
