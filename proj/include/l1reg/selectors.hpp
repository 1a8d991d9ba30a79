#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <Eigen/Dense>

#include "l1reg/decompositions.hpp"
#include "l1reg/errors.hpp"
#include "l1reg/inner_solver.hpp"

namespace l1reg {

enum class SelectorKind { gcv, chi2_central, chi2_noncentral, dp, rwp };

inline const char* to_string(SelectorKind k) {
  switch (k) {
    case SelectorKind::gcv: return "gcv";
    case SelectorKind::chi2_central: return "chi2-central";
    case SelectorKind::chi2_noncentral: return "chi2-noncentral";
    case SelectorKind::dp: return "dp";
    case SelectorKind::rwp: return "rwp";
  }
  return "?";
}

struct SelectorConfig {
  SelectorKind kind = SelectorKind::gcv;
  double alpha = 0.999;
  double nu = 1.01;
  /// Noise norm estimate for DP; nonpositive means sqrt(m).
  double delta = 0.0;
  double grid_lo = 1e-4;
  double grid_hi = 1e4;
  int grid_count = 200;
  /// Width in log(lambda) below which root brackets and golden-section
  /// intervals count as collapsed.
  double newton_tol = 1e-12;
  int newton_max_iter = 100;

  void validate() const {
    if (!(grid_lo > 0.0) || !(grid_lo < grid_hi)) throw DomainError("SelectorConfig: need 0 < grid_lo < grid_hi");
    if (grid_count < 2) throw DomainError("SelectorConfig: grid_count must be at least 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("SelectorConfig: alpha must lie in (0, 1)");
    if (!(nu > 1.0)) throw DomainError("SelectorConfig: nu must exceed 1");
    if (!(newton_tol > 0.0) || newton_max_iter < 1) throw DomainError("SelectorConfig: bad Newton settings");
  }
};

enum class SelectorStatus { converged, grid_fallback, no_root };

inline const char* to_string(SelectorStatus s) {
  switch (s) {
    case SelectorStatus::converged: return "converged";
    case SelectorStatus::grid_fallback: return "grid-fallback";
    case SelectorStatus::no_root: return "no-root";
  }
  return "?";
}

struct SelectorOutcome {
  double lambda = 0.0;
  double objective = 0.0;
  SelectorStatus status = SelectorStatus::converged;
  int evaluations = 0;
};

/// Logarithmically spaced grid including both endpoints.
inline std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(lo < hi) || count < 2) throw DomainError("log_grid: bad range");
  std::vector<double> g(count);
  const double a = std::log10(lo);
  const double step = (std::log10(hi) - a) / (count - 1);
  for (int i = 0; i < count; ++i) g[i] = std::pow(10.0, a + step * i);
  g.front() = lo;
  g.back() = hi;
  return g;
}

// ---------------------------------------------------------------- modal forms

/// G(lambda) for offset-Tikhonov modal data.
inline double gcv_value(const ModalSystem& ms, double lambda) {
  const Eigen::ArrayXd f = ms.filter_complement(lambda);
  const double num = (f.square() * ms.coef2).sum() + ms.tail;
  const double den = static_cast<double>(std::max<Eigen::Index>(ms.m - ms.n, 0)) + f.sum();
  if (!(den > 0.0)) throw NumericalFailure("gcv_value: zero trace");
  return num / (den * den);
}

/// J_L(x_lambda) = sum lambda^2/(gamma^2+lambda^2) s_i^2 + tail.
inline double jl_value(const ModalSystem& ms, double lambda) {
  return (ms.filter_complement(lambda) * ms.coef2).sum() + ms.tail;
}

/// d/dlambda of sum lambda^2/(gamma^2+lambda^2) w_i, i.e. 2 lambda ||w~||^2.
inline double filtered_sum_derivative(const Eigen::ArrayXd& gamma2, const Eigen::ArrayXd& w,
                                      double lambda) {
  const double l2 = lambda * lambda;
  const Eigen::ArrayXd den = gamma2 + l2;
  return 2.0 * lambda * (gamma2 * w / den.square()).sum();
}

inline double rwp_value(const ModalSystem& ms, double lambda) {
  const Eigen::ArrayXd r2 = ms.filter_complement(lambda).square() * ms.coef2;
  const double total = r2.sum();
  if (!(total > 0.0)) throw DomainError("rwp_value: residual vanishes");
  return r2.square().sum() / (total * total);
}

// ---------------------------------------------------------------- public ops

inline double gcv_value(const JointDecomposition& dec, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& h, double lambda) {
  detail::require_positive_lambda(lambda, "gcv_value");
  return gcv_value(modal_offset(dec, b, h), lambda);
}

/// min_x ||Ax - b||^2 + lambda^2 ||L(x - x0)||^2.
inline double jl_value(const JointDecomposition& dec, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& x0, double lambda) {
  detail::require_positive_lambda(lambda, "jl_value");
  return jl_value(modal_reference(dec, b, x0), lambda);
}

/// dF/dlambda for F = J_L - m~.
inline double jl_derivative(const JointDecomposition& dec, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& x0, double lambda) {
  detail::require_positive_lambda(lambda, "jl_derivative");
  const auto ms = modal_reference(dec, b, x0);
  return filtered_sum_derivative(ms.gamma2, ms.coef2, lambda);
}

/// Degrees of freedom m~ = n~ + max(m - n, 0).
inline double chi2_dof(const JointDecomposition& dec) {
  return static_cast<double>(decomp_n_tilde(dec) +
                             std::max<Eigen::Index>(decomp_m(dec) - decomp_n(dec), 0));
}

/// z_{alpha/2}, the standard normal quantile at 1 - alpha/2.
inline double z_half_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("z_half_alpha: alpha must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
}

/// z_{alpha/2} sqrt(2 m~ + 4 c).
inline double chi2_bound(double alpha, double dof, double c = 0.0) {
  return z_half_alpha(alpha) * std::sqrt(2.0 * dof + 4.0 * c);
}

/// c(lambda) = sum lambda^2 q_i^2/(gamma_i^2+lambda^2), q = U^T A (xbar - x0).
inline double noncentrality(const JointDecomposition& dec, const Eigen::VectorXd& xbar,
                            const Eigen::VectorXd& x0, double lambda) {
  detail::require_positive_lambda(lambda, "noncentrality");
  require_same_size(xbar.size(), x0.size(), "noncentrality");
  const auto ms = detail::modal_shell(dec);
  const Eigen::ArrayXd q2 = modal_image2(dec, xbar - x0);
  return (ms.filter_complement(lambda) * q2).sum();
}

/// dF_C/dlambda = 2 lambda (||s~||^2 - ||q~||^2).
inline double noncentral_derivative(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                    const Eigen::VectorXd& x0, const Eigen::VectorXd& xbar,
                                    double lambda) {
  detail::require_positive_lambda(lambda, "noncentral_derivative");
  const auto ms = modal_reference(dec, b, x0);
  const Eigen::ArrayXd q2 = modal_image2(dec, xbar - x0);
  return filtered_sum_derivative(ms.gamma2, ms.coef2 - q2, lambda);
}

/// W = sum |R^|^4 / (sum |R^|^2)^2 over the 2-D DFT of an N x N residual.
inline double whiteness(const Eigen::MatrixXd& residual_2d) {
  if (residual_2d.rows() != residual_2d.cols()) throw DimensionMismatch("whiteness: residual must be square");
  const int n = static_cast<int>(residual_2d.rows());
  const Fft2D fft(n);
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(residual_2d.data(), residual_2d.size());
  const Eigen::ArrayXd p2 = fft.forward(v).cwiseAbs2().array();
  const double total = p2.sum();
  if (!(total > 0.0)) throw DomainError("whiteness: residual is zero");
  return p2.square().sum() / (total * total);
}

inline double rwp_value(const JointDecomposition& dec, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& h, double lambda) {
  detail::require_positive_lambda(lambda, "rwp_value");
  if (!std::holds_alternative<Spectral2D>(dec)) {
    throw UnsupportedProblem("rwp: the whiteness principle needs a 2-D problem");
  }
  return rwp_value(modal_offset(dec, b, h), lambda);
}

// ---------------------------------------------------------------- searches

namespace detail {

/// Grid scan then golden-section refinement in log(lambda) between the
/// neighbours of the grid minimizer.
inline SelectorOutcome grid_then_golden(const std::function<double(double)>& objective,
                                        const SelectorConfig& cfg) {
  const auto grid = log_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_count);
  SelectorOutcome out;
  int best = -1;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.grid_count; ++i) {
    const double v = objective(grid[i]);
    ++out.evaluations;
    if (std::isfinite(v) && v < best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best < 0) throw NumericalFailure("grid search: objective is not finite anywhere on the grid");
  if (best == 0 || best == cfg.grid_count - 1) {
    out.lambda = grid[best];
    out.objective = best_val;
    out.status = SelectorStatus::grid_fallback;
    return out;
  }

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(grid[best - 1]);
  double c = std::log(grid[best + 1]);
  double u1 = c - inv_phi * (c - a);
  double u2 = a + inv_phi * (c - a);
  double f1 = objective(std::exp(u1));
  double f2 = objective(std::exp(u2));
  out.evaluations += 2;
  for (int it = 0; it < 200 && c - a > cfg.newton_tol; ++it) {
    if (f1 <= f2) {
      c = u2;
      u2 = u1;
      f2 = f1;
      u1 = c - inv_phi * (c - a);
      f1 = objective(std::exp(u1));
    } else {
      a = u1;
      u1 = u2;
      f1 = f2;
      u2 = a + inv_phi * (c - a);
      f2 = objective(std::exp(u2));
    }
    ++out.evaluations;
  }
  const double u = f1 <= f2 ? u1 : u2;
  const double fu = std::min(f1, f2);
  if (fu <= best_val) {
    out.lambda = std::exp(u);
    out.objective = fu;
  } else {
    out.lambda = grid[best];
    out.objective = best_val;
  }
  out.status = SelectorStatus::converged;
  return out;
}

/// Root of F = J_L - m~ - c(lambda) with acceptance |F| <= z sqrt(2 m~ + 4 c).
/// q2 empty means the central test (c = 0).
inline SelectorOutcome chi2_search(const ModalSystem& ms, const Eigen::ArrayXd& q2,
                                   const SelectorConfig& cfg) {
  const bool central = q2.size() == 0;
  const double dof = static_cast<double>(ms.n_tilde + std::max<Eigen::Index>(ms.m - ms.n, 0));
  const double z = z_half_alpha(cfg.alpha);
  const Eigen::ArrayXd s_minus_q = central ? ms.coef2 : Eigen::ArrayXd(ms.coef2 - q2);

  struct Eval {
    double f;
    double bound;
  };
  SelectorOutcome out;
  auto eval = [&](double lambda) {
    ++out.evaluations;
    const Eigen::ArrayXd fc = ms.filter_complement(lambda);
    const double c = central ? 0.0 : (fc * q2).sum();
    const double f = (fc * ms.coef2).sum() + ms.tail - dof - c;
    return Eval{f, z * std::sqrt(2.0 * dof + 4.0 * c)};
  };

  const auto grid = log_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_count);
  std::vector<Eval> vals;
  vals.reserve(grid.size());
  for (const double l : grid) vals.push_back(eval(l));

  int arg_min_abs = 0;
  for (int i = 1; i < cfg.grid_count; ++i) {
    if (std::abs(vals[i].f) < std::abs(vals[arg_min_abs].f)) arg_min_abs = i;
  }
  // Sign change closest to the smallest |F| on the grid.
  int bracket = -1;
  for (int i = 0; i + 1 < cfg.grid_count; ++i) {
    if ((vals[i].f <= 0.0) != (vals[i + 1].f <= 0.0)) {
      if (bracket < 0 || std::abs(i - arg_min_abs) < std::abs(bracket - arg_min_abs)) bracket = i;
    }
  }
  if (bracket < 0) {
    out.lambda = grid[arg_min_abs];
    out.objective = vals[arg_min_abs].f;
    out.status = SelectorStatus::no_root;
    return out;
  }

  double lo = std::log(grid[bracket]);
  double hi = std::log(grid[bracket + 1]);
  const bool lo_negative = vals[bracket].f <= 0.0;
  const bool start_lo = std::abs(vals[bracket].f) <= std::abs(vals[bracket + 1].f);
  double u = start_lo ? lo : hi;
  Eval e = start_lo ? vals[bracket] : vals[bracket + 1];
  for (int it = 0; it < cfg.newton_max_iter; ++it) {
    if (std::abs(e.f) <= e.bound) {
      out.lambda = std::exp(u);
      out.objective = e.f;
      out.status = SelectorStatus::converged;
      return out;
    }
    if ((e.f <= 0.0) == lo_negative) {
      lo = u;
    } else {
      hi = u;
    }
    if (std::abs(hi - lo) <= cfg.newton_tol) break;
    // Newton step in log(lambda): dF/du = lambda dF/dlambda.
    const double lambda = std::exp(u);
    const double dfdu = lambda * filtered_sum_derivative(ms.gamma2, s_minus_q, lambda);
    double next = u - e.f / dfdu;
    const double left = std::min(lo, hi);
    const double right = std::max(lo, hi);
    if (!std::isfinite(next) || next <= left || next >= right) next = 0.5 * (lo + hi);
    u = next;
    e = eval(std::exp(u));
  }
  out.lambda = std::exp(u);
  out.objective = e.f;
  out.status = std::abs(e.f) <= e.bound ? SelectorStatus::converged : SelectorStatus::grid_fallback;
  return out;
}

}  // namespace detail

inline SelectorOutcome select_gcv(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& h, const SelectorConfig& cfg) {
  cfg.validate();
  const auto ms = modal_offset(dec, b, h);
  return detail::grid_then_golden([&](double l) { return gcv_value(ms, l); }, cfg);
}

inline SelectorOutcome select_chi2_central(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                           const Eigen::VectorXd& x0, const SelectorConfig& cfg) {
  cfg.validate();
  return detail::chi2_search(modal_reference(dec, b, x0), Eigen::ArrayXd(), cfg);
}

inline SelectorOutcome select_chi2_noncentral(const JointDecomposition& dec,
                                              const Eigen::VectorXd& b, const Eigen::VectorXd& x0,
                                              const Eigen::VectorXd& xbar,
                                              const SelectorConfig& cfg) {
  cfg.validate();
  require_same_size(xbar.size(), x0.size(), "select_chi2_noncentral");
  const auto ms = modal_reference(dec, b, x0);
  const Eigen::VectorXd diff = xbar - x0;
  if (diff.isZero(0.0)) return detail::chi2_search(ms, Eigen::ArrayXd(), cfg);
  return detail::chi2_search(ms, modal_image2(dec, diff), cfg);
}

/// Largest lambda on [grid_lo, grid_hi] with ||A x_lambda - b|| <= nu delta.
inline SelectorOutcome select_dp(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& h, const SelectorConfig& cfg) {
  cfg.validate();
  const auto ms = modal_offset(dec, b, h);
  const double delta = cfg.delta > 0.0 ? cfg.delta : std::sqrt(static_cast<double>(ms.m));
  const double target = cfg.nu * delta;
  SelectorOutcome out;
  auto gap = [&](double u) {
    ++out.evaluations;
    return std::sqrt(modal_residual2(ms, std::exp(u))) - target;
  };
  double lo = std::log(cfg.grid_lo);
  double hi = std::log(cfg.grid_hi);
  const double g_lo = gap(lo);
  if (g_lo > 0.0) {
    out.lambda = cfg.grid_lo;
    out.objective = g_lo;
    out.status = SelectorStatus::no_root;
    return out;
  }
  const double g_hi = gap(hi);
  if (g_hi <= 0.0) {
    out.lambda = cfg.grid_hi;
    out.objective = g_hi;
    out.status = SelectorStatus::grid_fallback;
    return out;
  }
  double g_at_lo = g_lo;
  for (int it = 0; it < 200 && hi - lo > cfg.newton_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = gap(mid);
    if (g <= 0.0) {
      lo = mid;
      g_at_lo = g;
    } else {
      hi = mid;
    }
  }
  out.lambda = std::exp(lo);
  out.objective = g_at_lo;
  out.status = SelectorStatus::converged;
  return out;
}

inline SelectorOutcome select_rwp(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& h, const SelectorConfig& cfg) {
  cfg.validate();
  if (!std::holds_alternative<Spectral2D>(dec)) {
    throw UnsupportedProblem("select_rwp: the whiteness principle needs a 2-D problem");
  }
  const auto ms = modal_offset(dec, b, h);
  return detail::grid_then_golden([&](double l) { return rwp_value(ms, l); }, cfg);
}

}  // namespace l1reg
