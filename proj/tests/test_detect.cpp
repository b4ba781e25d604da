#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "finsler/detect.hpp"
#include "finsler/error.hpp"
#include "finsler/families.hpp"
#include "support.hpp"

using namespace finsler;
using finsler::testing::fixture;

TEST(WeaklyIsotropicFit, SpaceFormHasZeroThetaAndSigmaMu) {
  const MetricField m = construct(fixture("space_form"));
  const WeaklyIsotropicFit fit = weakly_isotropic_fit(m, std::vector<double>{0.2, -0.1, 0.1});
  EXPECT_NEAR(fit.sigma, 1.0, 1e-9);
  for (double t : fit.theta) EXPECT_NEAR(t, 0.0, 1e-9);
  EXPECT_LT(fit.residual, 1e-9);
  EXPECT_EQ(fit.directions, default_fit_directions(3));
}

TEST(WeaklyIsotropicFit, RecoversTheClosedFormOnTheFamily) {
  const MetricFamilySpec s = fixture("cms");
  const MetricField m = construct(s);
  for (const auto& x : {std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{0.1, -0.2, 0.15}}) {
    const WeaklyIsotropicFit fit = weakly_isotropic_fit(m, x);
    const PredictedInvariants inv = predicted_invariants(s, x);
    EXPECT_NEAR(fit.sigma, inv.sigma, 1e-9);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(fit.theta[i], inv.theta[i], 1e-9);
  }
}

TEST(WeaklyIsotropicFit, JetsCarryTheXDerivatives) {
  const MetricFamilySpec s = fixture("cms");
  const MetricField m = construct(s);
  const std::vector<double> x{0.1, -0.2, 0.15};
  const auto dirs = spiral_directions(3, default_fit_directions(3), 42);
  const WeaklyIsotropicJets wj = weakly_isotropic_jets(m, x, 6, dirs);
  EXPECT_EQ(wj.sigma.order(), 2);
  for (int i = 0; i < 3; ++i) {
    std::vector<double> xp = x, xm = x;
    xp[i] += 1e-5;
    xm[i] -= 1e-5;
    const double fd = (predicted_invariants(s, xp).sigma - predicted_invariants(s, xm).sigma) / 2e-5;
    EXPECT_NEAR(wj.sigma.derivative(i).value(), fd, 1e-7);
  }
}

TEST(WeaklyIsotropicFit, RejectsNonScalarFlag) {
  const MetricField m = construct(fixture("randers"));
  EXPECT_THROW(weakly_isotropic_fit(m, std::vector<double>{0.1, 0.0, 0.0}), PreconditionError);
}

// Random Randers metrics α + β with a known quadratic form and 1-form at x.
TEST(RandersSplit, RecoversRandomRandersMetrics) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int draw = 0; draw < 10; ++draw) {
    const int n = 2 + draw % 3;
    MetricFamilySpec s;
    s.family = Family::randers;
    s.dimension = n;
    std::vector<double> L(n * n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) L[i * n + j] = (i == j ? 1.0 + 0.3 * std::abs(U(rng)) : 0.3 * U(rng));
    }
    s.A.assign(n * n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) s.A[i * n + j] += L[i * n + k] * L[j * n + k];
      }
    }
    s.kappa.resize(n);
    s.b.resize(n);
    s.omega.resize(n * n);
    for (int i = 0; i < n; ++i) {
      s.kappa[i] = 0.3 * U(rng);
      s.b[i] = 0.2 * U(rng);
    }
    for (double& w : s.omega) w = 0.1 * U(rng);
    s = normalized(s);
    const MetricField m = construct(s);
    std::vector<double> x(n);
    for (double& xi : x) xi = 0.2 * U(rng);

    const RandersSplit r = randers_split(m, x);
    ASSERT_TRUE(r.is_randers) << r.reason;
    EXPECT_TRUE(r.positive_definite);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double want = s.A[i * n + j] + s.kappa[i] * x[i] * s.kappa[j] * x[j];
        EXPECT_NEAR(r.alpha_matrix(i, j), want, 1e-10);
      }
      double beta = s.b[i];
      for (int j = 0; j < n; ++j) beta += s.omega[i * n + j] * x[j];
      EXPECT_NEAR(r.beta[i], beta, 1e-10);
    }
    EXPECT_LT(r.reconstruction_error, 1e-9);
    EXPECT_LT(r.beta_norm, 1.0);
  }
}

TEST(RandersSplit, FamilyMetricsAreRanders) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-0.35, 0.35);
  for (const char* name : {"cms", "cms_radial", "funk", "funk_a", "space_form"}) {
    const MetricField m = construct(fixture(name));
    for (int k = 0; k < 4; ++k) {
      const std::vector<double> x{U(rng), U(rng), U(rng)};
      const RandersSplit r = randers_split(m, x);
      EXPECT_TRUE(r.is_randers) << name << ": " << r.reason;
      EXPECT_LT(r.quadratic_residual, 1e-6);
      EXPECT_LT(r.reconstruction_error, 1e-9);
      EXPECT_LT(r.beta_norm, 1.0);
    }
  }
}

TEST(RandersSplit, QuarticIsRejected) {
  const MetricField m = construct(fixture("quartic"));
  const RandersSplit r = randers_split(m, std::vector<double>{0.0, 0.0, 0.0});
  EXPECT_FALSE(r.is_randers);
  EXPECT_GT(r.quadratic_residual, 1e-3);
  EXPECT_FALSE(r.reason.empty());
}

TEST(QuadraticRoot, Examples) {
  EXPECT_DOUBLE_EQ(quadratic_root(1.0, -3.0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(quadratic_root(2.0, 0.0, -8.0), 2.0);
  EXPECT_DOUBLE_EQ(quadratic_root(1.0, 2.0, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(quadratic_root(-1.0, 0.0, 4.0), -2.0);
  // Root of y² + 1e8 y + 1 near −1e−8, where the textbook form cancels.
  EXPECT_NEAR(quadratic_root(1.0, 1e8, 1.0), -1e-8, 1e-22);
}

TEST(QuadraticRoot, Errors) {
  EXPECT_THROW(quadratic_root(0.0, 1.0, 1.0), PreconditionError);
  EXPECT_THROW(quadratic_root(1.0, 0.0, 1.0), DomainError);
}
