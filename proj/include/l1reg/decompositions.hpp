#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "l1reg/errors.hpp"
#include "l1reg/fft.hpp"
#include "l1reg/operators.hpp"

namespace l1reg {

/// Generalized singular value decomposition A = U Ups~ X^{-1}, L = V M~ X^{-1}.
///
/// Column i < n_tilde of U, V and X belongs to the pair (upsilon_i, mu_i), with
/// gamma = upsilon / mu nondecreasing. Columns n_tilde..n-1 of U and X span the
/// block where L vanishes (upsilon = 1, mu = 0). Columns n..m-1 of U and
/// n_tilde..p-1 of V complete the orthogonal bases.
struct Gsvd {
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
  Eigen::MatrixXd X;
  Eigen::MatrixXd X_inv;
  Eigen::VectorXd upsilon;
  Eigen::VectorXd mu;
  Eigen::VectorXd gamma;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Eigen::Index n_tilde = 0;
};

/// mu below this is treated as an exact zero of L.
inline constexpr double kGsvdMuThreshold = 1e-14;

/// GSVD via a QR factorization of [A; L] followed by a CS decomposition of the
/// orthogonal factor. Requires m >= n and N(A) cap N(L) = {0}.
inline Gsvd gsvd(const Eigen::MatrixXd& A, const Eigen::MatrixXd& L,
                 double mu_threshold = kGsvdMuThreshold) {
  using Eigen::Index;
  using Eigen::MatrixXd;
  const Index m = A.rows();
  const Index n = A.cols();
  const Index p = L.rows();
  require_same_size(L.cols(), n, "gsvd: A and L column counts");
  if (m < n) throw DimensionMismatch("gsvd: requires m >= n");
  if (n == 0) throw DimensionMismatch("gsvd: empty operator");

  MatrixXd stacked(m + p, n);
  stacked << A, L;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(stacked);
  qr.setThreshold(1e-13);
  if (qr.rank() < n) {
    throw InvertibilityError("gsvd: [A; L] is rank deficient, N(A) and N(L) intersect");
  }
  // stacked = Q R P^T; keep the thin Q and fold P into R.
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(m + p, n);
  const MatrixXd r_perm =
      qr.matrixR().topLeftCorner(n, n).template triangularView<Eigen::Upper>().toDenseMatrix() *
      qr.colsPermutation().transpose();
  const MatrixXd q1 = q.topRows(m);
  const MatrixXd q2 = q.bottomRows(p);

  // CS split of [q1; q2]. Directions with upsilon <= 1/sqrt(2) come from the
  // SVD of q1, the rest from an SVD of q2 restricted to what is left, so that
  // every column normalization divides by a number of size at least 1/sqrt(2).
  Eigen::BDCSVD<MatrixXd> svd1(q1, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const MatrixXd uc = svd1.matrixU().rowwise().reverse();
  const MatrixXd wc = svd1.matrixV().rowwise().reverse();
  const Eigen::VectorXd c = svd1.singularValues().reverse();
  Index k = 0;
  while (k < n && k < p && c(k) <= std::sqrt(0.5)) ++k;

  // Block a: small upsilon. V columns by QR of q2 W_a.
  const MatrixXd za = q2 * wc.leftCols(k);
  Eigen::HouseholderQR<MatrixXd> zqr(za);
  const MatrixXd qa_full = zqr.householderQ() * MatrixXd::Identity(p, p);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  MatrixXd v(p, p);
  for (Index i = 0; i < k; ++i) {
    const double diag = zqr.matrixQR()(i, i);
    v.col(i) = (diag < 0.0 ? -1.0 : 1.0) * qa_full.col(i);
    s(i) = std::abs(diag);
  }

  // Block b: small mu. SVD of q2 W_b in the complement of the block-a V.
  MatrixXd w(n, n);
  w.leftCols(k) = wc.leftCols(k);
  const Index nb = n - k;
  const Index pb = p - k;
  if (nb > 0) {
    if (pb > 0) {
      const MatrixXd va_perp = qa_full.rightCols(pb);
      const MatrixXd zb = va_perp.transpose() * (q2 * wc.rightCols(nb));
      Eigen::BDCSVD<MatrixXd> svd2(zb, Eigen::ComputeFullU | Eigen::ComputeFullV);
      v.rightCols(pb) = va_perp * svd2.matrixU();
      w.rightCols(nb) = wc.rightCols(nb) * svd2.matrixV();
      s.segment(k, svd2.singularValues().size()) = svd2.singularValues();
    } else {
      w.rightCols(nb) = wc.rightCols(nb);
    }
  } else if (pb > 0) {
    v.rightCols(pb) = qa_full.rightCols(pb);
  }
  Index n_tilde = 0;
  while (n_tilde < n && s(n_tilde) >= mu_threshold) ++n_tilde;

  // U: block-a columns straight from the SVD, block-b columns by QR of q1 W_b.
  MatrixXd ub(m, n);
  ub.leftCols(k) = uc.leftCols(k);
  ub.rightCols(nb) = q1 * w.rightCols(nb);
  Eigen::HouseholderQR<MatrixXd> uqr(ub);
  const MatrixXd qu_full = uqr.householderQ() * MatrixXd::Identity(m, m);

  Gsvd g;
  g.m = m;
  g.n = n;
  g.p = p;
  g.n_tilde = n_tilde;
  g.U = qu_full;
  g.upsilon.resize(n_tilde);
  for (Index i = 0; i < n; ++i) {
    const double diag = uqr.matrixQR()(i, i);
    if (diag < 0.0) g.U.col(i) = -g.U.col(i);
    if (i < n_tilde) g.upsilon(i) = i < k ? c(i) : std::abs(diag);
  }
  g.V = v;
  g.mu = s.head(n_tilde);
  g.gamma = g.upsilon.cwiseQuotient(g.mu);

  // X = (R P^T)^{-1} W = P R^{-1} W.
  g.X_inv = w.transpose() * r_perm;
  g.X = qr.colsPermutation() *
        qr.matrixR().topLeftCorner(n, n).template triangularView<Eigen::Upper>().solve(w);
  return g;
}

/// Joint Fourier diagonalization of a periodic separable blur and the periodic
/// gradient on N x N images.
struct Spectral2D {
  int n_side = 0;
  /// Eigenvalues of A (already whitened).
  Eigen::VectorXcd lam_a;
  /// Diagonal of I (x) Lambda_L (vertical differences).
  Eigen::VectorXcd c;
  /// Diagonal of Lambda_L (x) I (horizontal differences).
  Eigen::VectorXcd d;
  /// |c|^2 + |d|^2.
  Eigen::ArrayXd rho2;
  /// Indices with rho2 > 0, in increasing order.
  std::vector<Eigen::Index> paired;
  /// gamma_i for i in `paired`.
  Eigen::ArrayXd gamma;
  Eigen::Index n_tilde = 0;
  std::shared_ptr<const Fft2D> fft;

  Eigen::Index size() const { return lam_a.size(); }
};

/// Builds the factorization for A = scale * (C_z (x) C_z), C_z circulant with
/// first row `blur_row`, and L the periodic 2-D gradient.
inline Spectral2D spectral_2d(const Eigen::VectorXd& blur_row, int n_side, double scale = 1.0) {
  if (blur_row.size() != n_side) {
    throw DimensionMismatch("spectral_2d: blur row length must equal N");
  }
  const Eigen::Index n = n_side;
  Spectral2D s;
  s.n_side = n_side;
  s.lam_a = separable_blur_eigenvalues(blur_row, scale);
  const Eigen::VectorXcd lam_l = circulant_derivative_eigenvalues(n_side);
  s.c.resize(n * n);
  s.d.resize(n * n);
  for (Eigen::Index k2 = 0; k2 < n; ++k2) {
    for (Eigen::Index k1 = 0; k1 < n; ++k1) {
      s.c(k1 + n * k2) = lam_l(k1);
      s.d(k1 + n * k2) = lam_l(k2);
    }
  }
  s.rho2 = s.c.cwiseAbs2().array() + s.d.cwiseAbs2().array();
  for (Eigen::Index i = 0; i < n * n; ++i) {
    if (s.rho2(i) > 0.0) {
      s.paired.push_back(i);
    } else if (s.lam_a(i) == std::complex<double>(0.0)) {
      throw InvertibilityError("spectral_2d: blur and gradient share a null mode");
    }
  }
  s.n_tilde = static_cast<Eigen::Index>(s.paired.size());
  s.gamma.resize(s.n_tilde);
  for (Eigen::Index j = 0; j < s.n_tilde; ++j) {
    const auto i = s.paired[j];
    s.gamma(j) = std::abs(s.lam_a(i)) / std::sqrt(s.rho2(i));
  }
  s.fft = std::make_shared<const Fft2D>(n_side);
  return s;
}

using JointDecomposition = std::variant<Gsvd, Spectral2D>;

inline Eigen::Index decomp_m(const JointDecomposition& dec) {
  if (const auto* g = std::get_if<Gsvd>(&dec)) return g->m;
  return std::get<Spectral2D>(dec).size();
}
inline Eigen::Index decomp_n(const JointDecomposition& dec) {
  if (const auto* g = std::get_if<Gsvd>(&dec)) return g->n;
  return std::get<Spectral2D>(dec).size();
}
inline Eigen::Index decomp_p(const JointDecomposition& dec) {
  if (const auto* g = std::get_if<Gsvd>(&dec)) return g->p;
  return 2 * std::get<Spectral2D>(dec).size();
}
inline Eigen::Index decomp_n_tilde(const JointDecomposition& dec) {
  return std::visit([](const auto& d) { return d.n_tilde; }, dec);
}

namespace detail {
struct SplitSpectrum {
  Eigen::VectorXcd vertical;
  Eigen::VectorXcd horizontal;
};

inline SplitSpectrum transform_gradient_field(const Spectral2D& s, const Eigen::VectorXd& h) {
  const auto n = s.size();
  require_same_size(h.size(), 2 * n, "gradient field length");
  return {s.fft->forward(Eigen::VectorXd(h.head(n))), s.fft->forward(Eigen::VectorXd(h.tail(n)))};
}

/// Fourier coefficients of L^dagger h.
inline Eigen::VectorXcd pinv_spectrum(const Spectral2D& s, const SplitSpectrum& hh) {
  Eigen::VectorXcd xh = Eigen::VectorXcd::Zero(s.size());
  for (const auto i : s.paired) {
    xh(i) = (std::conj(s.c(i)) * hh.vertical(i) + std::conj(s.d(i)) * hh.horizontal(i)) / s.rho2(i);
  }
  return xh;
}
}  // namespace detail

/// L^dagger_A h, the A-weighted generalized inverse of L applied to h.
inline Eigen::VectorXd aw_pinv_apply(const JointDecomposition& dec, const Eigen::VectorXd& h) {
  require_same_size(h.size(), decomp_p(dec), "aw_pinv_apply");
  if (const auto* g = std::get_if<Gsvd>(&dec)) {
    const auto nt = g->n_tilde;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(g->n);
    z.head(nt) = (g->V.leftCols(nt).transpose() * h).cwiseQuotient(g->mu);
    return g->X * z;
  }
  const auto& s = std::get<Spectral2D>(dec);
  return s.fft->inverse_real(detail::pinv_spectrum(s, detail::transform_gradient_field(s, h)));
}

/// L L^dagger_A h.
inline Eigen::VectorXd ll_pinv_apply(const JointDecomposition& dec, const Eigen::VectorXd& h) {
  require_same_size(h.size(), decomp_p(dec), "ll_pinv_apply");
  if (const auto* g = std::get_if<Gsvd>(&dec)) {
    const auto vt = g->V.leftCols(g->n_tilde);
    return vt * (vt.transpose() * h);
  }
  const auto& s = std::get<Spectral2D>(dec);
  return periodic_gradient(s.n_side, aw_pinv_apply(dec, h));
}

}  // namespace l1reg
