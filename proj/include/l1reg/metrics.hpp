#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "l1reg/errors.hpp"

namespace l1reg {

/// One row of a solver trace.
struct IterationTrace {
  int k = 0;
  double lambda = 0.0;
  double re = 0.0;
  /// Empty when the iterate reproduces the ground truth exactly.
  std::optional<double> isnr;
  double rc_x = 0.0;
  double rc_lambda2 = 0.0;
  /// Selector objective at the accepted lambda (G, F, F_C, residual gap or W).
  double selector_value = 0.0;
  bool frozen = false;
  double wall_ms = 0.0;
};

/// ||x - x_true|| / ||x_true||.
inline double relative_error(const Eigen::VectorXd& x, const Eigen::VectorXd& x_true) {
  require_same_size(x.size(), x_true.size(), "relative_error");
  const double denom = x_true.norm();
  if (denom == 0.0) throw DomainError("relative_error: reference has zero norm");
  return (x - x_true).norm() / denom;
}

/// Improved signal-to-noise ratio in dB. Returns nullopt for exact recovery,
/// where the ratio is unbounded.
inline std::optional<double> isnr(const Eigen::VectorXd& b, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& x_true) {
  require_same_size(b.size(), x_true.size(), "isnr(b)");
  require_same_size(x.size(), x_true.size(), "isnr(x)");
  const double err = (x - x_true).norm();
  if (err == 0.0) return std::nullopt;
  return 20.0 * std::log10((b - x_true).norm() / err);
}

/// ||x_k - x_prev|| / ||x_prev||.
inline double rc_x(const Eigen::VectorXd& x_k, const Eigen::VectorXd& x_prev) {
  require_same_size(x_k.size(), x_prev.size(), "rc_x");
  const double denom = x_prev.norm();
  if (denom == 0.0) throw DomainError("rc_x: previous iterate has zero norm");
  return (x_k - x_prev).norm() / denom;
}

/// |l_k^2 - l_prev^2| / l_prev^2.
inline double rc_lambda2(double l_k, double l_prev) {
  if (!(l_k > 0.0) || !(l_prev > 0.0)) {
    throw DomainError("rc_lambda2: regularization parameters must be positive");
  }
  const double prev2 = l_prev * l_prev;
  return std::abs(l_k * l_k - prev2) / prev2;
}

}  // namespace l1reg
