// Command-line driver for the deblurring experiments.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "l1reg/harness/config.hpp"
#include "l1reg/harness/experiment.hpp"
#include "l1reg/io.hpp"
#include "l1reg/testing/oracles.hpp"

namespace {

using namespace l1reg;
using namespace l1reg::harness;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string method;
  std::string selector;
  std::string tol_lambda;
  std::optional<double> snr;
  std::optional<double> lambda;
  std::string truth;
  bool no_timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key=value config file");
  cmd->add_option("--seed", f.seed, "noise seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--method", f.method, "sb or mm");
  cmd->add_option("--selector", f.selector, "gcv, chi2-central, chi2-noncentral, dp or rwp");
  cmd->add_option("--tol-lambda", f.tol_lambda, "lambda freeze tolerance, or off");
  cmd->add_option("--snr", f.snr, "noise level in dB (inf for noiseless data)");
  cmd->add_option("--lambda", f.lambda, "fixed lambda instead of a selector");
  cmd->add_option("--truth", f.truth, "ground-truth file, or synthetic");
  cmd->add_flag("--no-timing", f.no_timing, "write wall_ms = 0 so traces are reproducible byte for byte");
}

ExperimentConfig resolve(const CommonFlags& f, ProblemKind kind) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig::defaults(kind) : load_config(f.config, kind);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output_dir = f.out;
  if (!f.method.empty()) c.solver.method = parse_method(f.method);
  if (!f.selector.empty()) c.selector.kind = parse_selector_kind(f.selector);
  if (!f.tol_lambda.empty()) c.solver.tol_lambda = parse_tol_lambda(f.tol_lambda);
  if (f.snr) c.snr_db = *f.snr;
  if (f.lambda) c.solver.selector = FixedLambda{*f.lambda};
  if (!f.truth.empty()) c.truth = f.truth;
  if (f.no_timing) c.solver.record_time = false;
  return c;
}

/// Problem kind from the config file when present, else the fallback.
ProblemKind kind_of(const CommonFlags& f, ProblemKind fallback) {
  if (f.config.empty()) return fallback;
  return load_config(f.config, fallback).problem;
}

int run_single(const ExperimentConfig& cfg) {
  const BuiltProblem bp = build_problem(cfg);
  const bool fixed = std::holds_alternative<FixedLambda>(cfg.solver.selector);
  const LambdaRule rule = fixed ? cfg.solver.selector : LambdaRule(cfg.selector);
  const std::string label = fixed ? "fixed" : to_string(cfg.selector.kind);
  const RunRow row = run_one(cfg, bp, cfg.solver.method, rule, label, cfg.solver.tol_lambda, true);
  if (!row.ok) {
    std::cerr << "solve failed: " << row.error << '\n';
    return 1;
  }
  std::cout << to_string(row.method) << ' ' << row.selector << ": RE " << row.re << ", ISNR " << row.isnr
            << ", " << row.iterations << " iterations, final lambda " << row.lambda_final
            << (row.frozen_at ? ", frozen at " + std::to_string(*row.frozen_at) : std::string()) << '\n'
            << "trace: " << row.trace_file << "\nreconstruction: " << row.recon_file << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l1-regularized deblurring with per-iteration parameter selection"};
  app.require_subcommand(1);

  CommonFlags f1, f2, fs, fu;
  auto* run1 = app.add_subcommand("run-1d", "one solve of the 1-D problem");
  add_common(run1, f1);
  auto* run2 = app.add_subcommand("run-2d", "one solve of the 2-D problem");
  add_common(run2, f2);

  auto* sweep = app.add_subcommand("sweep", "optimal fixed-lambda sweep");
  add_common(sweep, fs);
  std::string sweep_problem = "1d";
  sweep->add_option("--problem", sweep_problem, "1d or 2d (ignored with --config)");

  auto* suite = app.add_subcommand("suite", "every method and selector, with and without lambda freezing");
  add_common(suite, fu);
  std::string suite_problem = "1d";
  suite->add_option("--problem", suite_problem, "1d or 2d (ignored with --config)");

  auto* self = app.add_subcommand("selftest", "property checks on small random instances");
  std::uint64_t self_seed = 7;
  self->add_option("--seed", self_seed, "seed for the random instances");

  CLI11_PARSE(app, argc, argv);

  auto to_kind = [](const std::string& s) {
    if (s == "1d") return ProblemKind::d1;
    if (s == "2d") return ProblemKind::d2;
    throw ConfigError("--problem: expected 1d or 2d");
  };

  try {
    if (*run1) return run_single(resolve(f1, ProblemKind::d1));
    if (*run2) return run_single(resolve(f2, ProblemKind::d2));
    if (*sweep) {
      const auto cfg = resolve(fs, kind_of(fs, to_kind(sweep_problem)));
      const BuiltProblem bp = build_problem(cfg);
      const auto res = optimal_sweep(bp.problem, bp.decomp, cfg.solver, cfg.sweep);
      std::filesystem::create_directories(cfg.output_dir);
      const auto path = cfg.output_dir / (std::string("sweep_") + to_string(cfg.problem) + "_" +
                                          (cfg.solver.method == Method::sb ? "sb" : "mm") + ".csv");
      write_text_atomic(path, sweep_csv(res));
      std::cout << to_string(cfg.solver.method) << " lambda* = " << res.lambda_star << ", RE = " << res.re_star
                << " (" << res.failures << " failed runs)\ntable: " << path.string() << '\n';
      return res.failures > 0 ? 2 : 0;
    }
    if (*suite) {
      const auto cfg = resolve(fu, kind_of(fu, to_kind(suite_problem)));
      const BuiltProblem bp = build_problem(cfg);
      SuiteOptions opt;
      opt.log = &std::cerr;
      const auto rep = run_suite(cfg, bp, opt);
      std::cout << summary_text(rep);
      return rep.any_failed() ? 2 : 0;
    }
    if (*self) {
      bool all = true;
      for (const auto& r : l1reg::testing::run_properties(self_seed)) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " (measured " << r.measured << ", tolerance "
                  << r.tolerance << ")\n";
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
