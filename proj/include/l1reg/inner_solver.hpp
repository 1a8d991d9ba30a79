#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "l1reg/decompositions.hpp"
#include "l1reg/errors.hpp"

namespace l1reg {

struct InnerSolution {
  Eigen::VectorXd x;
  /// ||Ax - b||^2
  double fidelity = 0.0;
  /// ||Lx - h||^2
  double reg = 0.0;
  double lambda = 0.0;
};

namespace detail {
inline void require_positive_lambda(double lambda, const char* what) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError(std::string(what) + ": lambda must be positive and finite");
  }
}
}  // namespace detail

/// Minimizer of 1/2||Ax - b||^2 + lambda^2/2 ||Lx - h||^2.
inline InnerSolution solve_offset_tikhonov(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                           const Eigen::VectorXd& h, double lambda) {
  detail::require_positive_lambda(lambda, "solve_offset_tikhonov");
  require_same_size(b.size(), decomp_m(dec), "solve_offset_tikhonov(b)");
  require_same_size(h.size(), decomp_p(dec), "solve_offset_tikhonov(h)");
  const double l2 = lambda * lambda;
  InnerSolution out;
  out.lambda = lambda;

  if (const auto* g = std::get_if<Gsvd>(&dec)) {
    const auto nt = g->n_tilde;
    const Eigen::VectorXd beta = g->U.transpose() * b;
    const Eigen::VectorXd eta = g->V.transpose() * h;
    Eigen::VectorXd z = beta.head(g->n);
    for (Eigen::Index i = 0; i < nt; ++i) {
      const double ups = g->upsilon(i);
      const double mu = g->mu(i);
      const double phi = ups * ups + l2 * mu * mu;
      if (!(phi > 0.0)) throw InvertibilityError("solve_offset_tikhonov: singular filter");
      z(i) = (ups * beta(i) + l2 * mu * eta(i)) / phi;
    }
    out.x = g->X * z;
    double fid = beta.tail(g->m - g->n).squaredNorm();
    for (Eigen::Index i = 0; i < nt; ++i) {
      const double r = g->upsilon(i) * z(i) - beta(i);
      fid += r * r;
    }
    double reg = eta.tail(g->p - nt).squaredNorm();
    for (Eigen::Index i = 0; i < nt; ++i) {
      const double r = g->mu(i) * z(i) - eta(i);
      reg += r * r;
    }
    out.fidelity = fid;
    out.reg = reg;
    return out;
  }

  const auto& s = std::get<Spectral2D>(dec);
  const Eigen::VectorXcd bh = s.fft->forward(b);
  const auto hh = detail::transform_gradient_field(s, h);
  const auto n = s.size();
  Eigen::VectorXcd xh(n);
  double fid = 0.0;
  double reg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = s.lam_a(i);
    const double den = std::norm(a) + l2 * s.rho2(i);
    if (!(den > 0.0)) throw InvertibilityError("solve_offset_tikhonov: singular filter");
    const auto num = std::conj(a) * bh(i) +
                     l2 * (std::conj(s.c(i)) * hh.vertical(i) + std::conj(s.d(i)) * hh.horizontal(i));
    xh(i) = num / den;
    fid += std::norm(a * xh(i) - bh(i));
    reg += std::norm(s.c(i) * xh(i) - hh.vertical(i)) + std::norm(s.d(i) * xh(i) - hh.horizontal(i));
  }
  out.x = s.fft->inverse_real(xh);
  out.fidelity = fid;
  out.reg = reg;
  return out;
}

/// The offset Tikhonov problem reduced to independent paired modes.
///
/// For h-offset data the coefficient of mode i is e_i = beta_i - t_i, where
/// beta are the data coefficients in the U (or Fourier) basis and t_i the part
/// explained by h. Every residual-type quantity is a filtered sum over coef2,
/// plus `tail`, the data energy in the m - n directions A cannot reach.
struct ModalSystem {
  Eigen::ArrayXd gamma2;
  Eigen::ArrayXd coef2;
  double tail = 0.0;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  Eigen::Index n_tilde = 0;

  /// lambda^2 / (gamma^2 + lambda^2)
  Eigen::ArrayXd filter_complement(double lambda) const {
    const double l2 = lambda * lambda;
    return l2 / (gamma2 + l2);
  }
};

namespace detail {
inline ModalSystem modal_shell(const JointDecomposition& dec) {
  ModalSystem ms;
  ms.m = decomp_m(dec);
  ms.n = decomp_n(dec);
  ms.n_tilde = decomp_n_tilde(dec);
  if (const auto* g = std::get_if<Gsvd>(&dec)) {
    ms.gamma2 = g->gamma.array().square();
  } else {
    ms.gamma2 = std::get<Spectral2D>(dec).gamma.square();
  }
  return ms;
}
}  // namespace detail

/// Modal coefficients of b - A L^dagger_A h.
inline ModalSystem modal_offset(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& h) {
  require_same_size(b.size(), decomp_m(dec), "modal_offset(b)");
  require_same_size(h.size(), decomp_p(dec), "modal_offset(h)");
  ModalSystem ms = detail::modal_shell(dec);
  ms.coef2.resize(ms.n_tilde);
  if (const auto* g = std::get_if<Gsvd>(&dec)) {
    const Eigen::VectorXd beta = g->U.transpose() * b;
    const Eigen::VectorXd eta = g->V.leftCols(g->n_tilde).transpose() * h;
    ms.coef2 = (beta.head(g->n_tilde) - g->gamma.cwiseProduct(eta)).array().square();
    ms.tail = beta.tail(g->m - g->n).squaredNorm();
    return ms;
  }
  const auto& s = std::get<Spectral2D>(dec);
  const Eigen::VectorXcd bh = s.fft->forward(b);
  const auto hh = detail::transform_gradient_field(s, h);
  for (Eigen::Index j = 0; j < ms.n_tilde; ++j) {
    const auto i = s.paired[j];
    const auto t = s.lam_a(i) *
                   (std::conj(s.c(i)) * hh.vertical(i) + std::conj(s.d(i)) * hh.horizontal(i)) /
                   s.rho2(i);
    ms.coef2(j) = std::norm(bh(i) - t);
  }
  return ms;
}

/// Modal coefficients of b - A x0.
inline ModalSystem modal_reference(const JointDecomposition& dec, const Eigen::VectorXd& b,
                                   const Eigen::VectorXd& x0) {
  require_same_size(b.size(), decomp_m(dec), "modal_reference(b)");
  require_same_size(x0.size(), decomp_n(dec), "modal_reference(x0)");
  ModalSystem ms = detail::modal_shell(dec);
  ms.coef2.resize(ms.n_tilde);
  if (const auto* g = std::get_if<Gsvd>(&dec)) {
    const Eigen::VectorXd beta = g->U.transpose() * b;
    const Eigen::VectorXd xi = g->X_inv.topRows(g->n_tilde) * x0;
    ms.coef2 = (beta.head(g->n_tilde) - g->upsilon.cwiseProduct(xi)).array().square();
    ms.tail = beta.tail(g->m - g->n).squaredNorm();
    return ms;
  }
  const auto& s = std::get<Spectral2D>(dec);
  const Eigen::VectorXcd bh = s.fft->forward(b);
  const Eigen::VectorXcd xh = s.fft->forward(x0);
  for (Eigen::Index j = 0; j < ms.n_tilde; ++j) {
    const auto i = s.paired[j];
    ms.coef2(j) = std::norm(bh(i) - s.lam_a(i) * xh(i));
  }
  return ms;
}

/// Squared moduli of the paired coefficients of U^T A y. Components of
/// U^T A y beyond the paired block vanish or lie in the null block of L.
inline Eigen::ArrayXd modal_image2(const JointDecomposition& dec, const Eigen::VectorXd& y) {
  require_same_size(y.size(), decomp_n(dec), "modal_image2");
  if (const auto* g = std::get_if<Gsvd>(&dec)) {
    const Eigen::VectorXd xi = g->X_inv.topRows(g->n_tilde) * y;
    return g->upsilon.cwiseProduct(xi).array().square();
  }
  const auto& s = std::get<Spectral2D>(dec);
  const Eigen::VectorXcd yh = s.fft->forward(y);
  Eigen::ArrayXd out(s.n_tilde);
  for (Eigen::Index j = 0; j < s.n_tilde; ++j) {
    const auto i = s.paired[j];
    out(j) = std::norm(s.lam_a(i) * yh(i));
  }
  return out;
}

/// ||A x_lambda - b||^2 from modal data.
inline double modal_residual2(const ModalSystem& ms, double lambda) {
  const Eigen::ArrayXd f = ms.filter_complement(lambda);
  return (f.square() * ms.coef2).sum() + ms.tail;
}

/// ||A x_lambda - b||, evaluated by filter factors without forming x.
inline double residual_norm(const JointDecomposition& dec, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& h, double lambda) {
  detail::require_positive_lambda(lambda, "residual_norm");
  return std::sqrt(modal_residual2(modal_offset(dec, b, h), lambda));
}

}  // namespace l1reg
