#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "l1reg/fft.hpp"
#include "l1reg/operators.hpp"
#include "l1reg/random.hpp"
#include "l1reg/testing/oracles.hpp"

using namespace l1reg;
using cd = std::complex<double>;

namespace {

/// Unitary 1-D DFT matrix with exp(-2 pi i jk / N) / sqrt(N).
Eigen::MatrixXcd dft_matrix(int n) {
  Eigen::MatrixXcd f(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const double t = -2.0 * std::numbers::pi * ((j * k) % n) / n;
      f(j, k) = cd(std::cos(t), std::sin(t)) / std::sqrt(static_cast<double>(n));
    }
  return f;
}

Eigen::MatrixXcd kron_c(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

TEST(GaussianRow, SingleTap) {
  const auto z = gaussian_row(4, 24.0, 1);
  EXPECT_NEAR(z(0), 1.0 / std::sqrt(48.0 * std::numbers::pi), 1e-15);
  EXPECT_EQ(z.tail(3).norm(), 0.0);
}

TEST(GaussianRow, TwoTaps) {
  const auto z = gaussian_row(4, 0.5, 2);
  const double s = 1.0 / std::sqrt(std::numbers::pi);
  EXPECT_NEAR(z(0), s, 1e-15);
  EXPECT_NEAR(z(1), std::exp(-1.0) * s, 1e-15);
  EXPECT_EQ(z(2), 0.0);
  EXPECT_EQ(z(3), 0.0);
}

TEST(GaussianRow, ReferenceSize) {
  // 1 / sqrt(48 pi) = 0.0814338.
  EXPECT_NEAR(gaussian_row(512, 24.0, 60)(0), 1.0 / std::sqrt(48.0 * std::numbers::pi), 1e-16);
  EXPECT_THROW(gaussian_row(4, 1.0, 5), DomainError);
  EXPECT_THROW(gaussian_row(4, 0.0, 2), DomainError);
}

TEST(Toeplitz, BandOneIsScaledIdentity) {
  const auto a = build_toeplitz_1d({6, 2.0, 1});
  EXPECT_NEAR((a - a(0, 0) * Eigen::MatrixXd::Identity(6, 6)).norm(), 0.0, 0.0);
  EXPECT_NEAR(a(0, 0), 1.0 / std::sqrt(4.0 * std::numbers::pi), 1e-15);
}

TEST(Toeplitz, SymmetricAndUnitMassInside) {
  const auto a = build_toeplitz_1d({512, 24.0, 60});
  for (int i = 0; i < 512; i += 37)
    for (int j = 0; j < 512; j += 29) EXPECT_EQ(a(i, j), a(std::abs(i - j), 0));
  EXPECT_EQ((a - a.transpose()).norm(), 0.0);
  for (int i = 60; i < 452; ++i) EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-6) << i;
}

TEST(Derivative1D, SmallCase) {
  Eigen::MatrixXd expect(2, 3);
  expect << -1, 1, 0, 0, -1, 1;
  EXPECT_EQ(build_derivative_1d_zero_bc(3), expect);
}

TEST(Derivative1D, NullSpaceAndRank) {
  const auto l = build_derivative_1d_zero_bc(9);
  EXPECT_EQ((l * Eigen::VectorXd::Constant(9, 2.5)).norm(), 0.0);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(l);
  EXPECT_EQ(lu.rank(), 8);
}

TEST(CirculantDerivative, Eigenvalues) {
  const auto lam = circulant_derivative_eigenvalues(4);
  EXPECT_EQ(lam(0), cd(0.0, 0.0));
  EXPECT_NEAR(std::abs(lam(2) - cd(-2.0, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(lam(1) - cd(-1.0, 1.0)), 0.0, 1e-15);
}

TEST(CirculantDerivative, DiagonalizedByFourier) {
  const int n = 8;
  const Eigen::MatrixXcd f = dft_matrix(n);
  const Eigen::MatrixXcd d = build_derivative_1d_periodic(n).cast<cd>();
  const Eigen::MatrixXcd expect = f.adjoint() * circulant_derivative_eigenvalues(n).asDiagonal() * f;
  EXPECT_LT((d - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Circulant, BlurDiagonalizedAtN8) {
  const int n = 8;
  const auto row = symmetric_circulant_row(gaussian_row(n, 1.5, 3));
  const Eigen::MatrixXcd f = kron_c(dft_matrix(n), dft_matrix(n));
  const Eigen::MatrixXd c = build_circulant(row);
  const Eigen::MatrixXcd dense = kron(c, c).cast<cd>();
  const Eigen::MatrixXcd fact = f.adjoint() * separable_blur_eigenvalues(row, 1.0).asDiagonal() * f;
  EXPECT_LT((dense - fact).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Circulant, SymmetricRowGivesSymmetricMatrix) {
  const auto row = symmetric_circulant_row(gaussian_row(10, 2.0, 4));
  const auto c = build_circulant(row);
  EXPECT_EQ((c - c.transpose()).norm(), 0.0);
  EXPECT_NEAR(row.sum(), 2.0 * gaussian_row(10, 2.0, 4).sum() - row(0), 1e-15);
  EXPECT_LT(circulant_eigenvalues(row).imag().cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fft2D, UnitaryAndInverse) {
  GaussianRng rng(3);
  const Fft2D fft(6);
  const Eigen::VectorXd x = rng.normal_vector(36);
  const Eigen::VectorXcd xh = fft.forward(x);
  EXPECT_NEAR(xh.norm(), x.norm(), 1e-12);
  EXPECT_LT((fft.inverse_real(xh) - x).norm(), 1e-12);
}

TEST(Gradient2D, MatchesDenseKronecker) {
  GaussianRng rng(5);
  const int n = 7;
  const Eigen::VectorXd x = rng.normal_vector(n * n);
  EXPECT_LT((periodic_gradient(n, x) - build_gradient_2d_periodic(n) * x).norm(), 1e-13);
}

TEST(Separable, MatchesKronecker) {
  GaussianRng rng(9);
  const Eigen::MatrixXd c = rng.normal_matrix(5, 5);
  const Eigen::VectorXd x = rng.normal_vector(25);
  EXPECT_LT((apply_separable(c, x) - kron(c, c) * x).norm(), 1e-12);
}

TEST(Whiten, IdentityCovariance) {
  GaussianRng rng(1);
  const Eigen::MatrixXd a = rng.normal_matrix(4, 3);
  const Eigen::VectorXd b = rng.normal_vector(4);
  const auto w = whiten(a, b, Eigen::MatrixXd::Identity(4, 4));
  EXPECT_LT((w.A - a).norm(), 1e-14);
  EXPECT_LT((w.b - b).norm(), 1e-14);
}

TEST(Whiten, ScaledCovarianceHalves) {
  GaussianRng rng(2);
  const Eigen::MatrixXd a = rng.normal_matrix(4, 3);
  const Eigen::VectorXd b = rng.normal_vector(4);
  const auto w = whiten(a, b, 4.0 * Eigen::MatrixXd::Identity(4, 4));
  EXPECT_LT((w.A - 0.5 * a).norm(), 1e-14);
  EXPECT_LT((w.b - 0.5 * b).norm(), 1e-14);
  EXPECT_THROW(whiten(a, b, -Eigen::MatrixXd::Identity(4, 4)), DomainError);
  EXPECT_THROW(whiten(a, b, Eigen::MatrixXd::Identity(3, 3)), DimensionMismatch);
}

TEST(Whiten, WhitenedNoiseHasUnitVariance) {
  GaussianRng rng(11);
  Eigen::MatrixXd r = rng.normal_matrix(3, 3);
  const Eigen::MatrixXd cb = r * r.transpose() + 0.5 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::LLT<Eigen::MatrixXd> llt(cb);
  const int draws = 100000;
  Eigen::MatrixXd eps(3, draws);
  for (int k = 0; k < draws; ++k) eps.col(k) = llt.matrixL() * rng.normal_vector(3);
  const auto w = whiten(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), cb);
  const Eigen::MatrixXd white = w.A * eps;
  const Eigen::MatrixXd cov = white * white.transpose() / draws;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(cov(i, i), 1.0, 0.02);
}

TEST(Noise, SnrScaling) {
  GaussianRng rng(4);
  const Eigen::VectorXd bt = rng.normal_vector(50);
  const auto n20 = add_noise_snr(bt, 20.0, 7);
  EXPECT_NEAR((n20.b - bt).norm(), bt.norm() / 10.0, 1e-12);
  EXPECT_NEAR(n20.sigma, (n20.b - bt).norm() / std::sqrt(50.0), 1e-14);
  const auto n0 = add_noise_snr(bt, 0.0, 7);
  EXPECT_NEAR((n0.b - bt).norm(), bt.norm(), 1e-12);
}

TEST(Noise, DeterministicAndNoiseless) {
  GaussianRng rng(4);
  const Eigen::VectorXd bt = rng.normal_vector(30);
  EXPECT_EQ(add_noise_snr(bt, 20.0, 3).b, add_noise_snr(bt, 20.0, 3).b);
  EXPECT_NE(add_noise_snr(bt, 20.0, 3).b, add_noise_snr(bt, 20.0, 4).b);
  const auto clean = add_noise_snr(bt, std::numeric_limits<double>::infinity(), 3);
  EXPECT_EQ(clean.b, bt);
  EXPECT_THROW(add_noise_snr(Eigen::VectorXd::Zero(3), 20.0, 1), DomainError);
}

TEST(Rng, FixedSequence) {
  GaussianRng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Problem, SpectralApplyMatchesDense) {
  const int n = 6;
  const auto row = symmetric_circulant_row(gaussian_row(n, 1.0, 3));
  auto fft = std::make_shared<const Fft2D>(n);
  Problem p;
  p.ops = PeriodicOperators2D{n, separable_blur_eigenvalues(row, 2.0), fft};
  p.m = p.n = n * n;
  p.p = 2 * n * n;
  const auto dense = l1reg::testing::dense_2d(row, 2.0);
  GaussianRng rng(8);
  const Eigen::VectorXd x = rng.normal_vector(n * n);
  EXPECT_LT((apply_A(p, x) - dense.A * x).norm(), 1e-12);
  EXPECT_LT((apply_L(p, x) - dense.L * x).norm(), 1e-12);
  EXPECT_EQ(p.repr(), Representation::spectral2d);
}
