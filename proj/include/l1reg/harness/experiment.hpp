#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "l1reg/decompositions.hpp"
#include "l1reg/harness/config.hpp"
#include "l1reg/io.hpp"
#include "l1reg/metrics.hpp"
#include "l1reg/operators.hpp"
#include "l1reg/solvers.hpp"

namespace l1reg::harness {

/// Piecewise-constant test signal with sharp edges, unit 2-norm.
inline Eigen::VectorXd synthetic_signal(int n) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  auto fill = [&](double a, double b, double v) {
    for (int i = static_cast<int>(a * n); i < static_cast<int>(b * n) && i < n; ++i) x(i) = v;
  };
  fill(0.10, 0.22, 1.0);
  fill(0.30, 0.38, 2.0);
  fill(0.38, 0.46, 0.5);
  fill(0.55, 0.70, 1.5);
  fill(0.78, 0.84, -1.0);
  return x / x.norm();
}

/// Rectangles and a disc on a dark background, values in [0, 1].
inline Eigen::VectorXd synthetic_image(int n) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n) * n, 0.1);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double r = (i + 0.5) / n;
      const double c = (j + 0.5) / n;
      double v = 0.1;
      if (r > 0.15 && r < 0.45 && c > 0.1 && c < 0.6) v = 0.8;
      if (r > 0.55 && r < 0.9 && c > 0.5 && c < 0.85) v = 0.5;
      if ((r - 0.65) * (r - 0.65) + (c - 0.25) * (c - 0.25) < 0.02) v = 1.0;
      x(i + static_cast<Eigen::Index>(n) * j) = v;
    }
  }
  return x;
}

struct BuiltProblem {
  Problem problem;
  JointDecomposition decomp;
  /// Data before whitening, in the units of x_true.
  Eigen::VectorXd b_tilde;
};

inline Eigen::VectorXd load_truth(const ExperimentConfig& cfg) {
  if (cfg.problem == ProblemKind::d1) {
    if (cfg.truth == "synthetic") return synthetic_signal(cfg.n);
    if (!std::filesystem::exists(cfg.truth)) throw IoError("missing ground-truth file " + cfg.truth);
    Eigen::VectorXd x = read_vector_csv(cfg.truth);
    require_same_size(x.size(), cfg.n, "ground-truth signal length vs n");
    return x;
  }
  if (cfg.truth == "synthetic") return synthetic_image(cfg.n);
  if (!std::filesystem::exists(cfg.truth)) throw IoError("missing ground-truth file " + cfg.truth);
  const GrayImage img = read_pgm(cfg.truth);
  if (img.rows != cfg.n || img.cols != cfg.n) {
    throw ConfigError("ground-truth image is " + std::to_string(img.rows) + "x" +
                      std::to_string(img.cols) + " but n_side = " + std::to_string(cfg.n));
  }
  return img.pixels;
}

/// Blur, noise at snr_db, whitening and the matching decomposition for a
/// given ground truth.
inline BuiltProblem build_problem(const ExperimentConfig& cfg, const Eigen::VectorXd& x_true) {
  cfg.validate();
  BuiltProblem out;
  Problem& prob = out.problem;
  prob.x_true = x_true;

  if (cfg.problem == ProblemKind::d1) {
    require_same_size(x_true.size(), cfg.n, "build_problem: ground truth length");
    const BlurSpec1D spec{cfg.n, cfg.sigma2, cfg.band};
    const Eigen::MatrixXd a_tilde = build_toeplitz_1d(spec);
    const Eigen::VectorXd b_true = a_tilde * x_true;
    const NoisyData noisy = add_noise_snr(b_true, cfg.snr_db, cfg.seed);
    const Whitened w = whiten(a_tilde, noisy.b, noisy.sigma);
    DenseOperators ops{w.A, build_derivative_1d_zero_bc(cfg.n)};
    out.decomp = gsvd(ops.A, ops.L);
    prob.b = w.b;
    prob.m = ops.A.rows();
    prob.n = ops.A.cols();
    prob.p = ops.L.rows();
    prob.sigma = noisy.sigma;
    prob.ops = std::move(ops);
    out.b_tilde = noisy.b;
  } else {
    const int side = cfg.n;
    require_same_size(x_true.size(), static_cast<long>(side) * side, "build_problem: ground truth size");
    const Eigen::VectorXd row = symmetric_circulant_row(gaussian_row(side, cfg.sigma2, cfg.band));
    auto fft = std::make_shared<const Fft2D>(side);
    const Eigen::VectorXcd lam = separable_blur_eigenvalues(row, 1.0);
    const Eigen::VectorXd b_true = fft->inverse_real(lam.cwiseProduct(fft->forward(x_true)));
    const NoisyData noisy = add_noise_snr(b_true, cfg.snr_db, cfg.seed);
    Spectral2D spec = spectral_2d(row, side, 1.0 / noisy.sigma);
    spec.fft = fft;
    prob.ops = PeriodicOperators2D{side, spec.lam_a, fft};
    prob.b = noisy.b / noisy.sigma;
    prob.m = static_cast<Eigen::Index>(side) * side;
    prob.n = prob.m;
    prob.p = 2 * prob.m;
    prob.sigma = noisy.sigma;
    out.decomp = std::move(spec);
    out.b_tilde = noisy.b;
  }
  prob.n_tilde = decomp_n_tilde(out.decomp);
  return out;
}

inline BuiltProblem build_problem(const ExperimentConfig& cfg) { return build_problem(cfg, load_truth(cfg)); }

struct SweepEntry {
  double lambda = 0.0;
  double re = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool ok = false;
  std::string error;
};

struct SweepResult {
  double lambda_star = std::numeric_limits<double>::quiet_NaN();
  double re_star = std::numeric_limits<double>::quiet_NaN();
  std::size_t index_star = 0;
  std::vector<SweepEntry> table;
  int failures = 0;
};

/// Runs the solver to completion for every lambda of a log grid and keeps the
/// lambda with the smallest final RE. Failed runs are recorded and skipped.
inline SweepResult optimal_sweep(const Problem& prob, const JointDecomposition& dec,
                                 SolverConfig solver_cfg, const SweepConfig& sweep) {
  if (!prob.x_true) throw DomainError("optimal_sweep: needs a ground truth");
  solver_cfg.record_time = false;
  SweepResult res;
  for (const double lambda : log_grid(sweep.lo, sweep.hi, sweep.count)) {
    SweepEntry e;
    e.lambda = lambda;
    solver_cfg.selector = FixedLambda{lambda};
    try {
      const auto r = solve(prob, dec, solver_cfg);
      e.re = r.trace.back().re;
      e.iterations = static_cast<int>(r.trace.size());
      e.ok = std::isfinite(e.re);
      if (!e.ok) e.error = "non-finite RE";
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    if (!e.ok) ++res.failures;
    res.table.push_back(e);
  }
  for (std::size_t i = 0; i < res.table.size(); ++i) {
    const auto& e = res.table[i];
    if (e.ok && !(e.re >= res.re_star)) {
      res.re_star = e.re;
      res.lambda_star = e.lambda;
      res.index_star = i;
    }
  }
  if (!std::isfinite(res.lambda_star)) throw NumericalFailure("optimal_sweep: every run failed");
  return res;
}

// ---------------------------------------------------------------- output

inline std::string trace_csv(const std::vector<IterationTrace>& trace, std::uint64_t seed) {
  std::ostringstream os;
  os << "# seed=" << seed << '\n';
  os << "k,lambda,re,isnr,rc_x,rc_lambda2,selector_value,frozen,wall_ms\n";
  for (const auto& t : trace) {
    os << t.k << ',' << format_double(t.lambda) << ',' << format_double(t.re) << ','
       << (t.isnr ? format_double(*t.isnr) : std::string("inf")) << ',' << format_double(t.rc_x)
       << ',' << format_double(t.rc_lambda2) << ',' << format_double(t.selector_value) << ','
       << (t.frozen ? 1 : 0) << ',' << format_double(t.wall_ms) << '\n';
  }
  return os.str();
}

inline std::string sweep_csv(const SweepResult& s) {
  std::ostringstream os;
  os << "lambda,re,iterations,ok\n";
  for (const auto& e : s.table) {
    os << format_double(e.lambda) << ',' << format_double(e.re) << ',' << e.iterations << ','
       << (e.ok ? 1 : 0) << '\n';
  }
  return os.str();
}

struct RunRow {
  Method method = Method::sb;
  /// "optimal" or a selector name.
  std::string selector;
  std::optional<double> tol_lambda;
  double lambda_final = std::numeric_limits<double>::quiet_NaN();
  double re = std::numeric_limits<double>::quiet_NaN();
  double isnr = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double wall_time_s = 0.0;
  std::optional<int> frozen_at;
  int selector_calls = 0;
  bool converged = false;
  bool ok = false;
  bool best = false;
  std::string error;
  std::string trace_file;
  std::string recon_file;
  SolveResult result;
};

struct ExperimentReport {
  ProblemKind problem = ProblemKind::d1;
  std::uint64_t seed = 0;
  std::vector<RunRow> rows;
  std::vector<std::pair<Method, SweepResult>> sweeps;
  std::vector<std::string> files;

  bool any_failed() const {
    return std::any_of(rows.begin(), rows.end(), [](const RunRow& r) { return !r.ok; });
  }
  const RunRow* find(Method m, const std::string& sel, bool tol) const {
    for (const auto& r : rows) {
      if (r.method == m && r.selector == sel && (sel == "optimal" || r.tol_lambda.has_value() == tol)) return &r;
    }
    return nullptr;
  }
};

inline std::string tol_label(const std::optional<double>& tol) {
  return tol ? format_double(*tol) : std::string("off");
}

inline std::string summary_csv(const ExperimentReport& rep) {
  std::ostringstream os;
  os << "method,selector,tol_lambda,lambda,re,isnr,iterations,wall_time_s,frozen_at,selector_calls,"
        "converged,best,status\n";
  for (const auto& r : rep.rows) {
    os << to_string(r.method) << ',' << r.selector << ',' << tol_label(r.tol_lambda) << ','
       << format_double(r.lambda_final) << ',' << format_double(r.re) << ','
       << format_double(r.isnr) << ',' << r.iterations << ',' << format_double(r.wall_time_s) << ','
       << (r.frozen_at ? std::to_string(*r.frozen_at) : std::string()) << ',' << r.selector_calls
       << ',' << (r.converged ? "true" : "false") << ',' << (r.best ? "true" : "false") << ','
       << (r.ok ? std::string("ok") : "failed: " + r.error) << '\n';
  }
  return os.str();
}

inline std::string summary_text(const ExperimentReport& rep) {
  std::ostringstream os;
  os << "problem " << to_string(rep.problem) << ", seed " << rep.seed << "\n";
  for (const auto& [m, s] : rep.sweeps) {
    os << "optimal sweep " << to_string(m) << ": lambda* = " << std::setprecision(5) << s.lambda_star
       << ", RE = " << s.re_star << " (" << s.failures << " failed runs)\n";
  }
  os << '\n';
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %-16s %-6s %10s %8s %8s %5s %9s %7s %6s %s\n", "meth", "selector",
                "tol", "lambda", "RE", "ISNR", "iter", "time[s]", "frozen", "calls", "");
  os << buf;
  for (const auto& r : rep.rows) {
    if (!r.ok) {
      std::snprintf(buf, sizeof buf, "%-4s %-16s %-6s FAILED: %s\n", to_string(r.method), r.selector.c_str(),
                    tol_label(r.tol_lambda).c_str(), r.error.c_str());
      os << buf;
      continue;
    }
    std::snprintf(buf, sizeof buf, "%-4s %-16s %-6s %10.4g %8.4f %8.2f %5d %9.3f %7s %6d %s\n",
                  to_string(r.method), r.selector.c_str(), tol_label(r.tol_lambda).c_str(),
                  r.lambda_final, r.re, r.isnr, r.iterations, r.wall_time_s,
                  r.frozen_at ? std::to_string(*r.frozen_at).c_str() : "-", r.selector_calls,
                  r.best ? "*" : "");
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------- runs

struct SuiteOptions {
  bool write_files = true;
  bool with_tol_variants = true;
  std::vector<Method> methods{Method::sb, Method::mm};
  /// Empty means every selector that applies to the problem.
  std::vector<SelectorKind> selectors;
  /// Skip the sweep and use these optimal lambdas (per method) instead.
  std::vector<std::pair<Method, double>> known_optimal;
  std::ostream* log = nullptr;
};

inline std::vector<SelectorKind> selectors_for(ProblemKind kind) {
  std::vector<SelectorKind> s{SelectorKind::gcv, SelectorKind::chi2_central,
                              SelectorKind::chi2_noncentral, SelectorKind::dp};
  if (kind == ProblemKind::d2) s.push_back(SelectorKind::rwp);
  return s;
}

inline std::string run_stem(ProblemKind kind, Method m, const std::string& sel,
                            const std::optional<double>& tol) {
  std::string s = std::string(to_string(kind)) + "_" + (m == Method::sb ? "sb" : "mm") + "_" + sel;
  if (sel != "optimal") s += tol ? "_tol" : "_notol";
  return s;
}

/// Writes the reconstruction of one run; returns the main file.
inline std::string write_reconstruction(const ExperimentConfig& cfg, const std::string& stem,
                                        const Eigen::VectorXd& x) {
  namespace fs = std::filesystem;
  const fs::path dir = cfg.output_dir / "recon";
  fs::create_directories(dir);
  if (cfg.problem == ProblemKind::d1) {
    const auto path = dir / (stem + ".csv");
    write_vector_csv(path, x, "x");
    return path.string();
  }
  const GrayImage img{cfg.n, cfg.n, x};
  const auto path = dir / (stem + ".pgm");
  write_pgm(path, img);
  if (cfg.crop.row + cfg.crop.rows <= cfg.n && cfg.crop.col + cfg.crop.cols <= cfg.n) {
    write_pgm(dir / (stem + "_crop.pgm"), crop(img, cfg.crop.row, cfg.crop.col, cfg.crop.rows, cfg.crop.cols));
  }
  return path.string();
}

/// One solve with bookkeeping; failures are captured in the row.
inline RunRow run_one(const ExperimentConfig& cfg, const BuiltProblem& bp, Method method,
                      const LambdaRule& rule, const std::string& label,
                      const std::optional<double>& tol, bool write_files) {
  RunRow row;
  row.method = method;
  row.selector = label;
  row.tol_lambda = tol;
  SolverConfig sc = cfg.solver;
  sc.method = method;
  sc.selector = rule;
  sc.tol_lambda = tol;
  const auto stem = run_stem(cfg.problem, method, label, tol);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    row.result = solve(bp.problem, bp.decomp, sc);
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& last = row.result.trace.back();
    row.lambda_final = last.lambda;
    row.re = last.re;
    row.isnr = last.isnr ? *last.isnr : std::numeric_limits<double>::infinity();
    row.iterations = static_cast<int>(row.result.trace.size());
    row.frozen_at = row.result.freeze_iter;
    row.selector_calls = row.result.selector_calls;
    row.converged = row.result.converged;
    row.ok = true;
    if (write_files) {
      namespace fs = std::filesystem;
      fs::create_directories(cfg.output_dir / "traces");
      const auto tpath = cfg.output_dir / "traces" / (stem + ".csv");
      write_text_atomic(tpath, trace_csv(row.result.trace, cfg.seed));
      row.trace_file = tpath.string();
      row.recon_file = write_reconstruction(cfg, stem, row.result.x);
    }
  } catch (const SolverAbort& e) {
    row.error = e.what();
    row.result.trace = e.trace();
    if (write_files) {
      std::filesystem::create_directories(cfg.output_dir / "traces");
      const auto tpath = cfg.output_dir / "traces" / (stem + ".csv");
      write_text_atomic(tpath, trace_csv(e.trace(), cfg.seed));
      row.trace_file = tpath.string();
    }
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

/// Marks, per method and TOL variant, the selector row with the smallest RE.
/// Optimal rows are excluded.
inline void mark_best(std::vector<RunRow>& rows) {
  for (auto& r : rows) r.best = false;
  for (const Method m : {Method::sb, Method::mm}) {
    for (const bool tol : {false, true}) {
      RunRow* best = nullptr;
      for (auto& r : rows) {
        if (r.method != m || r.selector == "optimal" || !r.ok || r.tol_lambda.has_value() != tol) continue;
        if (!best || r.re < best->re) best = &r;
      }
      if (best) best->best = true;
    }
  }
}

/// {SB, MM} x {optimal, selectors} x {no TOL, TOL = cfg tol_lambda or 0.01}.
inline ExperimentReport run_suite(const ExperimentConfig& cfg, const BuiltProblem& bp,
                                  const SuiteOptions& opt = {}) {
  namespace fs = std::filesystem;
  ExperimentReport rep;
  rep.problem = cfg.problem;
  rep.seed = cfg.seed;
  if (opt.write_files) fs::create_directories(cfg.output_dir);
  const double tol_value = cfg.solver.tol_lambda.value_or(0.01);
  const auto sels = opt.selectors.empty() ? selectors_for(cfg.problem) : opt.selectors;

  for (const Method m : opt.methods) {
    double lambda_star = std::numeric_limits<double>::quiet_NaN();
    for (const auto& [km, kl] : opt.known_optimal) {
      if (km == m) lambda_star = kl;
    }
    if (!std::isfinite(lambda_star)) {
      SolverConfig sc = cfg.solver;
      sc.method = m;
      try {
        auto sw = optimal_sweep(bp.problem, bp.decomp, sc, cfg.sweep);
        lambda_star = sw.lambda_star;
        if (opt.write_files) {
          const auto path = cfg.output_dir / (std::string("sweep_") + to_string(cfg.problem) + "_" +
                                              (m == Method::sb ? "sb" : "mm") + ".csv");
          write_text_atomic(path, sweep_csv(sw));
          rep.files.push_back(path.string());
        }
        if (opt.log) {
          *opt.log << to_string(m) << " optimal sweep: lambda* = " << lambda_star << ", RE = " << sw.re_star
                   << '\n';
        }
        rep.sweeps.emplace_back(m, std::move(sw));
      } catch (const std::exception& e) {
        RunRow row;
        row.method = m;
        row.selector = "optimal";
        row.error = std::string("sweep failed: ") + e.what();
        rep.rows.push_back(std::move(row));
      }
    }
    if (std::isfinite(lambda_star)) {
      rep.rows.push_back(run_one(cfg, bp, m, FixedLambda{lambda_star}, "optimal", std::nullopt, opt.write_files));
    }
    for (const auto kind : sels) {
      SelectorConfig sel = cfg.selector;
      sel.kind = kind;
      std::vector<std::optional<double>> tols{std::nullopt};
      if (opt.with_tol_variants) tols.emplace_back(tol_value);
      for (const auto& tol : tols) {
        rep.rows.push_back(run_one(cfg, bp, m, sel, to_string(kind), tol, opt.write_files));
        if (opt.log) {
          const auto& r = rep.rows.back();
          *opt.log << to_string(m) << ' ' << r.selector << " tol=" << tol_label(tol) << ": "
                   << (r.ok ? "RE " + format_double(r.re) + ", " + std::to_string(r.iterations) + " iterations"
                            : "failed: " + r.error)
                   << '\n';
        }
      }
    }
  }
  mark_best(rep.rows);
  for (const auto& r : rep.rows) {
    if (!r.trace_file.empty()) rep.files.push_back(r.trace_file);
    if (!r.recon_file.empty()) rep.files.push_back(r.recon_file);
  }
  if (opt.write_files) {
    write_text_atomic(cfg.output_dir / "summary.csv", summary_csv(rep));
    write_text_atomic(cfg.output_dir / "summary.txt", summary_text(rep));
    rep.files.push_back((cfg.output_dir / "summary.csv").string());
    rep.files.push_back((cfg.output_dir / "summary.txt").string());
  }
  return rep;
}

}  // namespace l1reg::harness
