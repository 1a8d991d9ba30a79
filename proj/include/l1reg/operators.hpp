#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <variant>

#include <Eigen/Dense>

#include "l1reg/errors.hpp"
#include "l1reg/fft.hpp"
#include "l1reg/random.hpp"

namespace l1reg {

struct BlurSpec1D {
  int n = 512;
  double sigma2 = 24.0;
  int band = 60;

  void validate() const {
    if (n < 1) throw DomainError("BlurSpec1D: n must be positive");
    if (band < 1 || band > n) throw DomainError("BlurSpec1D: band must lie in [1, n]");
    if (!(sigma2 > 0.0)) throw DomainError("BlurSpec1D: sigma2 must be positive");
  }
};

struct BlurSpec2D {
  int n_side = 512;
  double sigma2 = 16.0;
  int band = 40;

  void validate() const { BlurSpec1D{n_side, sigma2, band}.validate(); }
};

/// Truncated Gaussian kernel z_j = exp(-j^2 / (2 sigma2)) / sqrt(2 pi sigma2)
/// for j < band, zero afterwards.
inline Eigen::VectorXd gaussian_row(int n, double sigma2, int band) {
  BlurSpec1D{n, sigma2, band}.validate();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  const double scale = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma2);
  for (int j = 0; j < band; ++j) {
    z(j) = scale * std::exp(-static_cast<double>(j) * j / (2.0 * sigma2));
  }
  return z;
}

/// Symmetric Toeplitz matrix with first row gaussian_row(spec).
inline Eigen::MatrixXd build_toeplitz_1d(const BlurSpec1D& spec) {
  const Eigen::VectorXd z = gaussian_row(spec.n, spec.sigma2, spec.band);
  Eigen::MatrixXd a(spec.n, spec.n);
  for (int j = 0; j < spec.n; ++j)
    for (int i = 0; i < spec.n; ++i) a(i, j) = z(std::abs(i - j));
  return a;
}

/// First row of the symmetric circulant built from a one-sided kernel:
/// r_j = z_j and r_{n-j} = z_j for 0 < j < n/2. The 2-D blur uses this row.
inline Eigen::VectorXd symmetric_circulant_row(const Eigen::VectorXd& z) {
  const auto n = z.size();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  if (n == 0) return r;
  r(0) = z(0);
  for (Eigen::Index j = 1; 2 * j < n; ++j) {
    r(j) += z(j);
    r(n - j) += z(j);
  }
  if (n % 2 == 0 && n >= 2) r(n / 2) += z(n / 2);
  return r;
}

/// Circulant matrix whose row i is the first row shifted right by i.
inline Eigen::MatrixXd build_circulant(const Eigen::VectorXd& first_row) {
  const auto n = first_row.size();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) c(i, j) = first_row((j - i + n) % n);
  return c;
}

/// (n-1) x n forward difference with zero boundary conditions.
inline Eigen::MatrixXd build_derivative_1d_zero_bc(int n) {
  if (n < 2) throw DomainError("build_derivative_1d_zero_bc: n must be at least 2");
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n - 1, n);
  for (int i = 0; i < n - 1; ++i) {
    l(i, i) = -1.0;
    l(i, i + 1) = 1.0;
  }
  return l;
}

/// n x n forward difference with periodic wrap in the last row.
inline Eigen::MatrixXd build_derivative_1d_periodic(int n) {
  if (n < 2) throw DomainError("build_derivative_1d_periodic: n must be at least 2");
  Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
  row(0) = -1.0;
  row(1) = 1.0;
  return build_circulant(row);
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Dense periodic gradient [I (x) D; D (x) I] acting on column-major N x N images.
inline Eigen::MatrixXd build_gradient_2d_periodic(int n_side) {
  const Eigen::MatrixXd d = build_derivative_1d_periodic(n_side);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n_side, n_side);
  Eigen::MatrixXd l(2 * n_side * n_side, n_side * n_side);
  l << kron(eye, d), kron(d, eye);
  return l;
}

/// Eigenvalues of the periodic forward difference, indexed by frequency k = 0..N-1:
/// entry k is exp(2 pi i k / N) - 1, so entry 0 holds the j = N value, which is zero.
inline Eigen::VectorXcd circulant_derivative_eigenvalues(int n) {
  if (n < 2) throw DomainError("circulant_derivative_eigenvalues: N must be at least 2");
  Eigen::VectorXcd lam(n);
  for (int k = 0; k < n; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n;
    const double s = std::sin(0.5 * theta);
    // exp(i t) - 1 written without cancellation.
    lam(k) = {-2.0 * s * s, std::sin(theta)};
  }
  return lam;
}

/// Eigenvalues of build_circulant(first_row) in the unitary DFT basis:
/// entry k is sum_j z_j exp(2 pi i j k / N).
inline Eigen::VectorXcd circulant_eigenvalues(const Eigen::VectorXd& first_row) {
  const auto n = first_row.size();
  Eigen::VectorXcd lam = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (first_row(j) == 0.0) continue;
      const double theta = 2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / n;
      acc += first_row(j) * std::complex<double>(std::cos(theta), std::sin(theta));
    }
    lam(k) = acc;
  }
  return lam;
}

/// vec(C X C^T) for an N x N image stored column-major in x.
inline Eigen::VectorXd apply_separable(const Eigen::MatrixXd& c, const Eigen::VectorXd& x) {
  const auto n = c.rows();
  require_same_size(x.size(), n * n, "apply_separable");
  const Eigen::Map<const Eigen::MatrixXd> img(x.data(), n, n);
  const Eigen::MatrixXd out = c * img * c.transpose();
  return Eigen::Map<const Eigen::VectorXd>(out.data(), n * n);
}

struct Whitened {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

/// Multiplies operator and data by the symmetric square root of Cb^{-1}.
inline Whitened whiten(const Eigen::MatrixXd& a_tilde, const Eigen::VectorXd& b_tilde,
                       const Eigen::MatrixXd& cb) {
  require_same_size(cb.rows(), cb.cols(), "whiten: covariance must be square");
  require_same_size(cb.rows(), a_tilde.rows(), "whiten: covariance vs operator rows");
  require_same_size(b_tilde.size(), a_tilde.rows(), "whiten: data vs operator rows");
  if ((cb - cb.transpose()).norm() > 1e-12 * cb.norm()) {
    throw DomainError("whiten: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cb);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw DomainError("whiten: covariance is not positive definite");
  }
  const Eigen::MatrixXd w_half = eig.eigenvectors() *
                                 eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                 eig.eigenvectors().transpose();
  return {w_half * a_tilde, w_half * b_tilde};
}

/// Scalar covariance sigma^2 I.
inline Whitened whiten(const Eigen::MatrixXd& a_tilde, const Eigen::VectorXd& b_tilde,
                       double sigma) {
  if (!(sigma > 0.0)) throw DomainError("whiten: sigma must be positive");
  require_same_size(b_tilde.size(), a_tilde.rows(), "whiten: data vs operator rows");
  return {a_tilde / sigma, b_tilde / sigma};
}

struct NoisyData {
  Eigen::VectorXd b;
  /// Per-entry noise standard deviation ||eps|| / sqrt(m); 1 when no noise was added.
  double sigma = 1.0;
};

/// Adds Gaussian noise rescaled so that 20 log10(||b_true|| / ||eps||) equals
/// snr_db exactly. An infinite snr_db returns b_true untouched.
inline NoisyData add_noise_snr(const Eigen::VectorXd& b_true, double snr_db, std::uint64_t seed) {
  if (b_true.size() == 0) throw DomainError("add_noise_snr: empty signal");
  const double signal = b_true.norm();
  if (!(signal > 0.0)) throw DomainError("add_noise_snr: signal has zero norm");
  if (std::isinf(snr_db) && snr_db > 0.0) return {b_true, 1.0};
  GaussianRng rng(seed);
  Eigen::VectorXd eps = rng.normal_vector(b_true.size());
  eps *= signal * std::pow(10.0, -snr_db / 20.0) / eps.norm();
  const double sigma = eps.norm() / std::sqrt(static_cast<double>(b_true.size()));
  return {b_true + eps, sigma};
}

/// Periodic 2-D operators held by their spectra: A = F* diag(lam_a) F and
/// L = [I (x) D; D (x) I], with F the unitary 2-D DFT.
struct PeriodicOperators2D {
  int n_side = 0;
  /// Eigenvalues of the (whitened) blur, column-major frequency order.
  Eigen::VectorXcd lam_a;
  std::shared_ptr<const Fft2D> fft;
};

struct DenseOperators {
  Eigen::MatrixXd A;
  Eigen::MatrixXd L;
};

enum class Representation { dense, spectral2d };

/// Whitened linear inverse problem min 1/2||Ax - b||^2 + mu ||Lx||_1.
struct Problem {
  std::variant<DenseOperators, PeriodicOperators2D> ops;
  Eigen::VectorXd b;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Eigen::Index n_tilde = 0;
  std::optional<Eigen::VectorXd> x_true;
  /// Noise level removed by whitening.
  double sigma = 1.0;

  Representation repr() const {
    return std::holds_alternative<DenseOperators>(ops) ? Representation::dense
                                                       : Representation::spectral2d;
  }
};

/// Spectrum of C_z (x) C_z scaled by `scale`, column-major frequency order.
inline Eigen::VectorXcd separable_blur_eigenvalues(const Eigen::VectorXd& blur_row, double scale) {
  const auto n = blur_row.size();
  const Eigen::VectorXcd lam = circulant_eigenvalues(blur_row);
  Eigen::VectorXcd out(n * n);
  for (Eigen::Index k2 = 0; k2 < n; ++k2)
    for (Eigen::Index k1 = 0; k1 < n; ++k1) out(k1 + n * k2) = scale * lam(k1) * lam(k2);
  return out;
}

inline Eigen::VectorXd periodic_gradient(int n_side, const Eigen::VectorXd& x) {
  const Eigen::Index n = n_side;
  require_same_size(x.size(), n * n, "periodic_gradient");
  Eigen::VectorXd out(2 * n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index jn = (j + 1) % n;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index in = (i + 1) % n;
      out(i + n * j) = x(in + n * j) - x(i + n * j);
      out(n * n + i + n * j) = x(i + n * jn) - x(i + n * j);
    }
  }
  return out;
}

inline Eigen::VectorXd apply_A(const Problem& prob, const Eigen::VectorXd& x) {
  require_same_size(x.size(), prob.n, "apply_A");
  if (const auto* dense = std::get_if<DenseOperators>(&prob.ops)) return dense->A * x;
  const auto& ops = std::get<PeriodicOperators2D>(prob.ops);
  const Eigen::VectorXcd xh = ops.fft->forward(x);
  return ops.fft->inverse_real(ops.lam_a.cwiseProduct(xh));
}

inline Eigen::VectorXd apply_L(const Problem& prob, const Eigen::VectorXd& x) {
  require_same_size(x.size(), prob.n, "apply_L");
  if (const auto* dense = std::get_if<DenseOperators>(&prob.ops)) return dense->L * x;
  return periodic_gradient(std::get<PeriodicOperators2D>(prob.ops).n_side, x);
}

}  // namespace l1reg
