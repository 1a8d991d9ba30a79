#include <cmath>

#include <gtest/gtest.h>

#include "l1reg/random.hpp"
#include "l1reg/selectors.hpp"
#include "l1reg/testing/oracles.hpp"

using namespace l1reg;
using namespace l1reg::testing;

namespace {

const std::array<std::array<int, 3>, 2> kShapes{{{12, 10, 9}, {12, 10, 14}}};

double central_diff(const std::function<double(double)>& f, double x) {
  const double h = 1e-5 * x;
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Instance whose chi^2 function crosses zero inside the default grid: the data
/// carry signal outside x0 plus unit-variance noise.
struct Chi2Instance {
  Eigen::MatrixXd A, L;
  Eigen::VectorXd b, x0;
};

Chi2Instance chi2_instance(GaussianRng& rng, int m, int n) {
  Chi2Instance c;
  c.A = rng.normal_matrix(m, n);
  c.L = build_derivative_1d_zero_bc(n);
  c.x0 = rng.normal_vector(n);
  c.b = c.A * (c.x0 + 3.0 * rng.normal_vector(n)) + rng.normal_vector(m);
  return c;
}

}  // namespace

TEST(Gcv, MatchesDenseTraceDefinition) {
  GaussianRng rng(1);
  for (const auto& s : kShapes) {
    for (int t = 0; t < 5; ++t) {
      const auto r = random_instance(rng, s[0], s[1], s[2]);
      const JointDecomposition dec = gsvd(r.A, r.L);
      for (double l : {1e-2, 0.3, 1.0, 7.0, 1e2, 1e3}) {
        EXPECT_LT(rel_diff(gcv_value(dec, r.b, r.h, l), dense_gcv(r.A, r.L, r.b, r.h, l)), 1e-10) << l;
      }
    }
  }
}

TEST(Gcv, ZeroOffsetIsClassicalGcv) {
  GaussianRng rng(2);
  const auto r = random_instance(rng, 12, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(9);
  for (double l : {0.1, 1.0, 10.0}) {
    const Eigen::VectorXd x = dense_tikhonov(r.A, r.L, r.b, zero, l);
    const double tr = 12.0 - dense_influence(r.A, r.L, l).trace();
    EXPECT_LT(rel_diff(gcv_value(dec, r.b, zero, l), (r.A * x - r.b).squaredNorm() / (tr * tr)), 1e-10);
  }
}

TEST(Gcv, SpectralMatchesDense) {
  GaussianRng rng(3);
  const int n = 8;
  const auto row = symmetric_circulant_row(gaussian_row(n, 1.5, 3));
  const JointDecomposition dec = spectral_2d(row, n, 4.0);
  const auto dense = dense_2d(row, 4.0);
  const Eigen::VectorXd b = rng.normal_vector(n * n);
  const Eigen::VectorXd h = rng.normal_vector(2 * n * n);
  for (double l : {0.05, 1.0, 20.0}) {
    EXPECT_LT(rel_diff(gcv_value(dec, b, h, l), dense_gcv(dense.A, dense.L, b, h, l)), 1e-10);
  }
}

TEST(Gcv, SelectedLambdaLiesInGridBracket) {
  GaussianRng rng(4);
  const auto r = random_instance(rng, 30, 20, 19);
  const JointDecomposition dec = gsvd(r.A, r.L);
  SelectorConfig cfg;
  const auto grid = log_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_count);
  int best = 0;
  for (int i = 1; i < cfg.grid_count; ++i)
    if (gcv_value(dec, r.b, r.h, grid[i]) < gcv_value(dec, r.b, r.h, grid[best])) best = i;
  const auto out = select_gcv(dec, r.b, r.h, cfg);
  if (best > 0 && best + 1 < cfg.grid_count) {
    EXPECT_EQ(out.status, SelectorStatus::converged);
    EXPECT_GE(out.lambda, grid[best - 1]);
    EXPECT_LE(out.lambda, grid[best + 1]);
  }
  EXPECT_LE(out.objective, gcv_value(dec, r.b, r.h, grid[best]));
}

TEST(Search, PlantedMinimumIsRecovered) {
  SelectorConfig cfg;
  for (double planted : {3e-3, 0.7, 42.0, 2500.0}) {
    const auto out = detail::grid_then_golden(
        [&](double l) { return std::pow(std::log(l / planted), 2) + 1.0; }, cfg);
    EXPECT_EQ(out.status, SelectorStatus::converged);
    EXPECT_LT(std::abs(out.lambda / planted - 1.0), 1e-3);
  }
}

TEST(Search, MonotoneObjectiveFallsBackToEndpoint) {
  SelectorConfig cfg;
  const auto out = detail::grid_then_golden([](double l) { return 1.0 / l; }, cfg);
  EXPECT_EQ(out.status, SelectorStatus::grid_fallback);
  EXPECT_DOUBLE_EQ(out.lambda, cfg.grid_hi);
}

TEST(JL, ConsistentDataGivesZero) {
  GaussianRng rng(5);
  const auto r = random_instance(rng, 12, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  EXPECT_LT(jl_value(dec, r.A * r.x0, r.x0, 2.0), 1e-20 * r.x0.squaredNorm() + 1e-24);
}

TEST(JL, SumFormMatchesDirectFunctional) {
  GaussianRng rng(6);
  for (const auto& s : kShapes) {
    for (int t = 0; t < 5; ++t) {
      const auto r = random_instance(rng, s[0], s[1], s[2]);
      const JointDecomposition dec = gsvd(r.A, r.L);
      for (double l : {1e-2, 1.0, 1e2}) {
        EXPECT_LT(rel_diff(jl_value(dec, r.b, r.x0, l), dense_jl(r.A, r.L, r.b, r.x0, l)), 1e-8);
      }
    }
  }
}

TEST(JL, DerivativeMatchesFiniteDifference) {
  GaussianRng rng(7);
  const auto r = random_instance(rng, 12, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  for (double l : {0.2, 1.0, 5.0}) {
    const double fd = central_diff([&](double x) { return jl_value(dec, r.b, r.x0, x); }, l);
    EXPECT_LT(rel_diff(jl_derivative(dec, r.b, r.x0, l), fd), 1e-4);
  }
}

TEST(JL, MonteCarloMeanIsDof) {
  // b = A x + e with L(x - x0) ~ N(0, I / lambda^2): J_L(lambda) is chi^2 with
  // m~ degrees of freedom.
  GaussianRng rng(8);
  const int m = 24, n = 16;
  const double lambda = 0.8;
  const Eigen::MatrixXd a = rng.normal_matrix(m, n);
  const Eigen::MatrixXd l = build_derivative_1d_zero_bc(n);
  const Eigen::MatrixXd l_pinv = l.completeOrthogonalDecomposition().pseudoInverse();
  const JointDecomposition dec = gsvd(a, l);
  const Eigen::VectorXd x0 = rng.normal_vector(n);
  const double dof = chi2_dof(dec);
  EXPECT_EQ(dof, 15.0 + 8.0);
  const int draws = 2000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd x = x0 + l_pinv * rng.normal_vector(n - 1) / lambda;
    sum += jl_value(dec, a * x + rng.normal_vector(m), x0, lambda);
  }
  EXPECT_LT(std::abs(sum / draws - dof), 3.0 * std::sqrt(2.0 * dof / draws));
}

TEST(Chi2, BoundsForReferenceProblems) {
  // The formula gives 0.0401 and 0.9075 against the published 0.042 and 0.941.
  EXPECT_NEAR(chi2_bound(0.999, 511.0), 0.042, 0.05 * 0.042);
  EXPECT_NEAR(chi2_bound(0.999, 262143.0), 0.941, 0.05 * 0.941);
  EXPECT_NEAR(z_half_alpha(0.999), 0.00125331, 1e-8);
  EXPECT_THROW(z_half_alpha(1.0), DomainError);
}

TEST(Chi2, FIncreasingInLambda) {
  GaussianRng rng(9);
  const auto c = chi2_instance(rng, 30, 20);
  const JointDecomposition dec = gsvd(c.A, c.L);
  double prev = -std::numeric_limits<double>::infinity();
  for (double l : log_grid(1e-3, 1e3, 80)) {
    const double f = jl_value(dec, c.b, c.x0, l) - chi2_dof(dec);
    EXPECT_GT(f, prev);
    prev = f;
  }
}

TEST(Chi2, NewtonFindsPlantedRoot) {
  GaussianRng rng(10);
  const auto c = chi2_instance(rng, 30, 20);
  const JointDecomposition dec = gsvd(c.A, c.L);
  const double dof = chi2_dof(dec);
  auto f = [&](double l) { return jl_value(dec, c.b, c.x0, l) - dof; };
  // Reference root by bisection in log(lambda).
  double lo = std::log(1e-4), hi = std::log(1e4);
  ASSERT_LT(f(std::exp(lo)), 0.0);
  ASSERT_GT(f(std::exp(hi)), 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(std::exp(mid)) < 0.0 ? lo : hi) = mid;
  }
  SelectorConfig cfg;
  cfg.alpha = 1.0 - 1e-12;  // vanishing acceptance band
  const auto out = select_chi2_central(dec, c.b, c.x0, cfg);
  EXPECT_EQ(out.status, SelectorStatus::converged);
  EXPECT_LT(std::abs(std::log(out.lambda) - lo), 1e-8);

  cfg.alpha = 0.999;
  const auto loose = select_chi2_central(dec, c.b, c.x0, cfg);
  EXPECT_LE(std::abs(f(loose.lambda)), chi2_bound(cfg.alpha, dof) * (1.0 + 1e-12));
}

TEST(Chi2, NoRootReturnsBestGridPoint) {
  GaussianRng rng(11);
  const auto r = random_instance(rng, 12, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  // Tiny data: J_L stays below m~ everywhere.
  const auto out = select_chi2_central(dec, 1e-6 * r.b, Eigen::VectorXd::Zero(10), SelectorConfig{});
  EXPECT_EQ(out.status, SelectorStatus::no_root);
  EXPECT_LT(out.objective, 0.0);
}

TEST(Noncentral, VanishesWhenXbarIsX0) {
  GaussianRng rng(12);
  const auto r = random_instance(rng, 12, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  EXPECT_EQ(noncentrality(dec, r.x0, r.x0, 3.0), 0.0);
}

TEST(Noncentral, SmallLambdaSquareCase) {
  GaussianRng rng(13);
  const auto r = random_instance(rng, 10, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  EXPECT_LT(noncentrality(dec, r.xbar, r.x0, 1e-9), 1e-12 * (r.A * (r.xbar - r.x0)).squaredNorm());
}

TEST(Noncentral, MatchesDense) {
  GaussianRng rng(14);
  for (const auto& s : kShapes) {
    for (int t = 0; t < 5; ++t) {
      const auto r = random_instance(rng, s[0], s[1], s[2]);
      const JointDecomposition dec = gsvd(r.A, r.L);
      for (double l : {0.1, 1.0, 10.0}) {
        EXPECT_LT(rel_diff(noncentrality(dec, r.xbar, r.x0, l), dense_noncentrality(r.A, r.L, r.xbar, r.x0, l)),
                  1e-10);
      }
    }
  }
}

TEST(Noncentral, DerivativeMatchesFiniteDifference) {
  GaussianRng rng(15);
  const auto r = random_instance(rng, 12, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  auto fc = [&](double l) { return jl_value(dec, r.b, r.x0, l) - noncentrality(dec, r.xbar, r.x0, l); };
  for (double l : {0.3, 1.0, 4.0}) {
    EXPECT_LT(rel_diff(noncentral_derivative(dec, r.b, r.x0, r.xbar, l), central_diff(fc, l)), 1e-4);
  }
}

TEST(Noncentral, XbarEqualX0MatchesCentral) {
  GaussianRng rng(16);
  const auto c = chi2_instance(rng, 30, 20);
  const JointDecomposition dec = gsvd(c.A, c.L);
  const auto a = select_chi2_central(dec, c.b, c.x0, SelectorConfig{});
  const auto b = select_chi2_noncentral(dec, c.b, c.x0, c.x0, SelectorConfig{});
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.status, b.status);
}

TEST(Dp, BisectionPostcondition) {
  GaussianRng rng(17);
  const auto c = chi2_instance(rng, 30, 20);
  const JointDecomposition dec = gsvd(c.A, c.L);
  const Eigen::VectorXd h = Eigen::VectorXd::Zero(19);
  SelectorConfig cfg;
  const auto out = select_dp(dec, c.b, h, cfg);
  ASSERT_EQ(out.status, SelectorStatus::converged);
  const double target = cfg.nu * std::sqrt(30.0);
  EXPECT_LE(residual_norm(dec, c.b, h, out.lambda), target);
  EXPECT_GT(residual_norm(dec, c.b, h, 2.0 * out.lambda), target);
}

TEST(Dp, NoiselessDataSelectsSmallLambda) {
  GaussianRng rng(18);
  const auto r = random_instance(rng, 12, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  SelectorConfig cfg;
  cfg.delta = 1e-8;
  const auto out = select_dp(dec, r.A * r.x0, Eigen::VectorXd::Zero(9), cfg);
  if (out.status == SelectorStatus::converged) {
    EXPECT_LE(residual_norm(dec, r.A * r.x0, Eigen::VectorXd::Zero(9), out.lambda), cfg.nu * cfg.delta);
  }
  EXPECT_LT(out.lambda, 1e-2);
}

TEST(Whiteness, SingleCoefficientIsOne) {
  const int n = 8;
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(n, n, 3.0);
  EXPECT_NEAR(whiteness(r), 1.0, 1e-14);
}

TEST(Whiteness, FlatSpectrum) {
  const int n = 8;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  r(0, 0) = 1.0;  // delta image has a flat spectrum
  EXPECT_NEAR(whiteness(r), 1.0 / (n * n), 1e-15);
}

TEST(Whiteness, GaussianNoise) {
  GaussianRng rng(19);
  const int n = 64;
  double sum = 0.0;
  for (int k = 0; k < 100; ++k) sum += whiteness(rng.normal_matrix(n, n));
  const double mean = sum / 100.0;
  const double expect = 2.0 / (n * n);
  EXPECT_GT(mean, expect / 1.5);
  EXPECT_LT(mean, expect * 1.5);
}

TEST(Rwp, DenseProblemIsRejected) {
  GaussianRng rng(20);
  const auto r = random_instance(rng, 12, 10, 9);
  const JointDecomposition dec = gsvd(r.A, r.L);
  EXPECT_THROW(rwp_value(dec, r.b, r.h, 1.0), UnsupportedProblem);
  EXPECT_THROW(select_rwp(dec, r.b, r.h, SelectorConfig{}), UnsupportedProblem);
}

TEST(Rwp, PlantedWhiteResidual) {
  // Data whose residual at lambda0 has a perfectly flat paired spectrum, the
  // global minimum of W.
  const int n = 16;
  const double lambda0 = 0.37;
  const auto row = symmetric_circulant_row(gaussian_row(n, 2.0, 4));
  const Spectral2D s = spectral_2d(row, n, 5.0);
  Eigen::VectorXcd bh = Eigen::VectorXcd::Zero(n * n);
  bh(0) = 1.0;
  for (Eigen::Index j = 0; j < s.n_tilde; ++j) {
    const double g2 = s.gamma(j) * s.gamma(j);
    bh(s.paired[j]) = (g2 + lambda0 * lambda0) / (lambda0 * lambda0);
  }
  const JointDecomposition dec = s;
  const Eigen::VectorXd b = s.fft->inverse_real(bh);
  SelectorConfig cfg;
  const auto out = select_rwp(dec, b, Eigen::VectorXd::Zero(2 * n * n), cfg);
  const double cell = std::log(cfg.grid_hi / cfg.grid_lo) / (cfg.grid_count - 1);
  EXPECT_LT(std::abs(std::log(out.lambda / lambda0)), cell);
  EXPECT_NEAR(out.objective, 1.0 / s.n_tilde, 1e-10);
}

TEST(Config, Validation) {
  SelectorConfig cfg;
  cfg.grid_lo = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = SelectorConfig{};
  cfg.nu = 1.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = SelectorConfig{};
  cfg.alpha = 1.5;
  EXPECT_THROW(cfg.validate(), DomainError);
  EXPECT_STREQ(to_string(SelectorKind::chi2_noncentral), "chi2-noncentral");
}
