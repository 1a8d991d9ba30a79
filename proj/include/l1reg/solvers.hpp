#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "l1reg/decompositions.hpp"
#include "l1reg/errors.hpp"
#include "l1reg/inner_solver.hpp"
#include "l1reg/metrics.hpp"
#include "l1reg/operators.hpp"
#include "l1reg/selectors.hpp"

namespace l1reg {

enum class Method { sb, mm };

inline const char* to_string(Method m) { return m == Method::sb ? "SB" : "MM"; }

struct FixedLambda {
  double value = 1.0;
};

using LambdaRule = std::variant<FixedLambda, SelectorConfig>;

enum class InitPolicy { zero, data };

struct SolverConfig {
  Method method = Method::sb;
  /// Shrinkage threshold mu / lambda^2 (SB).
  double tau = 0.005;
  /// Smoothing of |t| in the MM majorant.
  double epsilon = 0.0003;
  LambdaRule selector = SelectorConfig{};
  double tol_x = 1e-3;
  /// Freeze lambda once rc_lambda2 drops below this; empty disables freezing.
  std::optional<double> tol_lambda = 0.01;
  int max_iter = 500;
  InitPolicy x_init = InitPolicy::zero;
  /// Fill IterationTrace::wall_ms. Off gives traces that are bit-identical
  /// between runs.
  bool record_time = true;

  void validate() const {
    if (!(tau > 0.0)) throw DomainError("SolverConfig: tau must be positive");
    if (!(epsilon > 0.0)) throw DomainError("SolverConfig: epsilon must be positive");
    if (!(tol_x > 0.0)) throw DomainError("SolverConfig: tol_x must be positive");
    if (tol_lambda && !(*tol_lambda > 0.0)) throw DomainError("SolverConfig: tol_lambda must be positive");
    if (max_iter < 1) throw DomainError("SolverConfig: max_iter must be at least 1");
    if (const auto* f = std::get_if<FixedLambda>(&selector)) {
      if (!(f->value > 0.0) || !std::isfinite(f->value)) throw DomainError("SolverConfig: fixed lambda must be positive");
    } else {
      std::get<SelectorConfig>(selector).validate();
    }
  }
};

struct SolveResult {
  Eigen::VectorXd x;
  std::vector<IterationTrace> trace;
  bool converged = false;
  /// Iteration at which lambda was fixed for the rest of the run.
  std::optional<int> freeze_iter;
  int selector_calls = 0;
  std::vector<SelectorOutcome> selections;
};

/// Raised when a solve has to stop early; carries the trace up to the failure.
class SolverAbort : public NumericalFailure {
 public:
  SolverAbort(const std::string& what, std::vector<IterationTrace> trace)
      : NumericalFailure(what), trace_(std::move(trace)) {}
  const std::vector<IterationTrace>& trace() const { return trace_; }

 private:
  std::vector<IterationTrace> trace_;
};

inline double shrink(double x, double tau) {
  const double mag = std::abs(x) - tau;
  if (mag <= 0.0) return 0.0;
  return x > 0.0 ? mag : -mag;
}

inline Eigen::VectorXd shrink(const Eigen::VectorXd& x, double tau) {
  return x.unaryExpr([tau](double v) { return shrink(v, tau); });
}

/// x0 = L^dagger_A h and L L^dagger_A h.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> make_chi2_reference(const JointDecomposition& dec,
                                                                       const Eigen::VectorXd& h) {
  require_same_size(h.size(), decomp_p(dec), "make_chi2_reference");
  Eigen::VectorXd x0 = aw_pinv_apply(dec, h);
  Eigen::VectorXd hp = ll_pinv_apply(dec, h);
  return {std::move(x0), std::move(hp)};
}

/// Runs one selector on the offset problem with data b and offset h. `xbar`
/// is the current iterate, used by the non-central test.
inline SelectorOutcome select_lambda(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                     const Eigen::VectorXd& h, const Eigen::VectorXd& xbar,
                                     const SelectorConfig& cfg) {
  switch (cfg.kind) {
    case SelectorKind::gcv: return select_gcv(dec, b, h, cfg);
    case SelectorKind::dp: return select_dp(dec, b, h, cfg);
    case SelectorKind::rwp: return select_rwp(dec, b, h, cfg);
    case SelectorKind::chi2_central: {
      const auto ref = make_chi2_reference(dec, h);
      return select_chi2_central(dec, b, ref.first, cfg);
    }
    case SelectorKind::chi2_noncentral: {
      const auto ref = make_chi2_reference(dec, h);
      return select_chi2_noncentral(dec, b, ref.first, xbar, cfg);
    }
  }
  throw DomainError("select_lambda: unknown selector");
}

namespace detail {

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

/// Shared outer loop. `offset(x, state)` returns h for the coming x-update and
/// `after(x)` updates method state once the new iterate is known.
template <class Offset, class After>
SolveResult outer_loop(const Problem& prob, const JointDecomposition& dec, const SolverConfig& cfg,
                       Offset&& offset, After&& after) {
  using clock = std::chrono::steady_clock;
  SolveResult res;
  Eigen::VectorXd x = cfg.x_init == InitPolicy::data ? prob.b : Eigen::VectorXd::Zero(prob.n);
  if (cfg.x_init == InitPolicy::data) require_same_size(prob.m, prob.n, "data initialization needs m == n");

  const auto* fixed = std::get_if<FixedLambda>(&cfg.selector);
  bool frozen = false;
  double lambda = fixed ? fixed->value : std::numeric_limits<double>::quiet_NaN();
  double prev_lambda = std::numeric_limits<double>::quiet_NaN();
  double selector_value = std::numeric_limits<double>::quiet_NaN();

  for (int k = 1; k <= cfg.max_iter; ++k) {
    const auto t0 = clock::now();
    const Eigen::VectorXd h = offset(x);
    const bool reused = frozen;
    if (!fixed && !frozen) {
      try {
        const auto out = select_lambda(dec, prob.b, h, x, std::get<SelectorConfig>(cfg.selector));
        lambda = out.lambda;
        selector_value = out.objective;
        res.selections.push_back(out);
        ++res.selector_calls;
      } catch (const std::exception& e) {
        throw SolverAbort("iteration " + std::to_string(k) + ": selector failed: " + e.what(),
                          res.trace);
      }
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw SolverAbort("iteration " + std::to_string(k) + ": non-finite lambda", res.trace);
    }

    InnerSolution sol = solve_offset_tikhonov(dec, prob.b, h, lambda);
    if (!all_finite(sol.x)) {
      throw SolverAbort("iteration " + std::to_string(k) + ": non-finite iterate", res.trace);
    }
    after(sol.x);

    IterationTrace row;
    row.k = k;
    row.lambda = lambda;
    if (prob.x_true) {
      row.re = relative_error(sol.x, *prob.x_true);
      row.isnr = isnr(prob.b, sol.x, *prob.x_true);
    } else {
      row.re = std::numeric_limits<double>::quiet_NaN();
      row.isnr = std::numeric_limits<double>::quiet_NaN();
    }
    const double x_norm = x.norm();
    row.rc_x = x_norm > 0.0 ? rc_x(sol.x, x) : std::numeric_limits<double>::infinity();
    row.rc_lambda2 = k > 1 ? rc_lambda2(lambda, prev_lambda) : std::numeric_limits<double>::quiet_NaN();
    row.selector_value = selector_value;
    row.frozen = reused;

    if (!fixed && !frozen && cfg.tol_lambda && k > 1 && row.rc_lambda2 < *cfg.tol_lambda) {
      frozen = true;
      res.freeze_iter = k;
    }
    prev_lambda = lambda;
    x = std::move(sol.x);
    row.wall_ms = cfg.record_time
                      ? std::chrono::duration<double, std::milli>(clock::now() - t0).count()
                      : 0.0;
    res.trace.push_back(row);
    if (row.rc_x < cfg.tol_x) {
      res.converged = true;
      break;
    }
  }
  res.x = std::move(x);
  return res;
}

}  // namespace detail

/// Split Bregman with per-iteration lambda selection.
inline SolveResult sb_solve(const Problem& prob, const JointDecomposition& dec, const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.method != Method::sb) throw DomainError("sb_solve: config method is not SB");
  Eigen::VectorXd d = Eigen::VectorXd::Zero(prob.p);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(prob.p);
  return detail::outer_loop(
      prob, dec, cfg, [&](const Eigen::VectorXd&) -> Eigen::VectorXd { return d - g; },
      [&](const Eigen::VectorXd& x_new) {
        const Eigen::VectorXd lx = apply_L(prob, x_new);
        d = shrink(lx + g, cfg.tau);
        g += lx - d;
      });
}

/// w = u (1 - eps / sqrt(u^2 + eps^2)) componentwise.
inline Eigen::VectorXd mm_offset(const Eigen::VectorXd& u, double epsilon) {
  const double e2 = epsilon * epsilon;
  return u.unaryExpr([epsilon, e2](double v) { return v * (1.0 - epsilon / std::sqrt(v * v + e2)); });
}

/// 1/2||Ax - b||^2 + lambda^2 eps sum sqrt((Lx)^2 + eps^2), the smoothed
/// objective the MM iteration decreases for fixed lambda.
inline double mm_objective(const Problem& prob, const Eigen::VectorXd& x, double lambda, double epsilon) {
  const double fid = 0.5 * (apply_A(prob, x) - prob.b).squaredNorm();
  const Eigen::VectorXd lx = apply_L(prob, x);
  const double e2 = epsilon * epsilon;
  const double pen = lx.unaryExpr([e2](double v) { return std::sqrt(v * v + e2); }).sum();
  return fid + lambda * lambda * epsilon * pen;
}

/// Majorization-minimization with a fixed quadratic majorant.
inline SolveResult mm_solve(const Problem& prob, const JointDecomposition& dec, const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.method != Method::mm) throw DomainError("mm_solve: config method is not MM");
  return detail::outer_loop(
      prob, dec, cfg,
      [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return mm_offset(apply_L(prob, x), cfg.epsilon); },
      [](const Eigen::VectorXd&) {});
}

inline SolveResult solve(const Problem& prob, const JointDecomposition& dec, const SolverConfig& cfg) {
  return cfg.method == Method::sb ? sb_solve(prob, dec, cfg) : mm_solve(prob, dec, cfg);
}

}  // namespace l1reg
