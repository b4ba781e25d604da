#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "finsler/error.hpp"
#include "finsler/families.hpp"
#include "finsler/geometry.hpp"
#include "finsler/sampling.hpp"
#include "support.hpp"

using namespace finsler;
using finsler::testing::fixture;
using finsler::testing::rel_err;
using finsler::testing::richardson_partial;

namespace {

using LFun = std::function<long double(const std::vector<long double>&)>;

// F(x, y) as a function of z = (x, y) in long double.
LFun F_of(const MetricField& m) {
  return [&m](const std::vector<long double>& z) {
    const std::size_t n = z.size() / 2;
    std::vector<long double> x(z.begin(), z.begin() + n), y(z.begin() + n, z.end());
    return m(std::span<const long double>(x), std::span<const long double>(y));
  };
}

std::vector<long double> joined(const TangentPoint& p) {
  std::vector<long double> z(p.x.begin(), p.x.end());
  z.insert(z.end(), p.y.begin(), p.y.end());
  return z;
}

std::vector<int> unit(int vars, std::initializer_list<int> which) {
  std::vector<int> a(vars, 0);
  for (int w : which) ++a[w];
  return a;
}

const std::vector<std::string> kFixtures{"euclidean", "space_form", "cms", "cms_radial",
                                         "funk", "funk_a", "randers", "riemannian", "quartic"};

TangentPoint sample_point(const std::string& name) {
  if (name == "quartic") return {{0.0, 0.0, 0.0}, {0.6, -0.5, 0.7}};
  return {{0.12, -0.2, 0.15}, {0.3, 0.5, -0.8}};
}

}  // namespace

class GeometryFixture : public ::testing::TestWithParam<std::string> {};

TEST_P(GeometryFixture, JetPartialsOfFMatchFiniteDifferences) {
  const MetricFamilySpec spec = fixture(GetParam());
  const MetricField m = construct(spec);
  const TangentPoint p = sample_point(GetParam());
  const LocalJets jets(m, p, 5);
  const int vars = 2 * spec.dimension;
  const LFun f = F_of(m);
  const auto z = joined(p);
  // Every multi-index of total order ≤ 5 in (x, y) with at most three distinct variables.
  std::vector<int> a(vars, 0);
  int checked = 0;
  while (true) {
    int total = 0, distinct = 0;
    for (int v : a) {
      total += v;
      distinct += v > 0;
    }
    if (total >= 1 && total <= 5 && distinct <= 3) {
      const double want = static_cast<double>(richardson_partial(f, z, a, 0.02L));
      const double got = extract_partial(jets.F(), a);
      EXPECT_LT(rel_err(got, want), 1e-5) << GetParam() << " order " << total;
      ++checked;
    }
    int k = 0;
    while (k < vars && ++a[k] > 5) a[k++] = 0;
    if (k == vars) break;
  }
  EXPECT_GT(checked, 100);
}

TEST_P(GeometryFixture, FundamentalTensorAndSprayMatchFiniteDifferences) {
  const MetricFamilySpec spec = fixture(GetParam());
  const MetricField m = construct(spec);
  const int n = spec.dimension, vars = 2 * n;
  const TangentPoint p = sample_point(GetParam());
  const LFun f = F_of(m);
  const LFun f2 = [&](const std::vector<long double>& z) {
    const long double v = f(z);
    return v * v;
  };
  const auto z = joined(p);
  const FundamentalTensor ft = fundamental_tensor(m, p);
  std::vector<double> g(n * n), gx(n * n), d1(n);
  for (int i = 0; i < n; ++i) {
    d1[i] = static_cast<double>(richardson_partial(f2, z, unit(vars, {i}), 0.02L));
    for (int j = 0; j < n; ++j) {
      g[i * n + j] = 0.5 * static_cast<double>(richardson_partial(f2, z, unit(vars, {n + i, n + j}), 0.02L));
      gx[i * n + j] = static_cast<double>(richardson_partial(f2, z, unit(vars, {i, n + j}), 0.02L));
      EXPECT_LT(rel_err(ft.g(i, j), g[i * n + j]), 1e-7);
    }
  }
  // G^i = ¼ g^{il} ([F²]_{x^m y^l} y^m − [F²]_{x^l}).
  std::vector<double> rhs(n);
  for (int l = 0; l < n; ++l) {
    double s = -d1[l];
    for (int mm = 0; mm < n; ++mm) s += gx[mm * n + l] * p.y[mm];
    rhs[l] = 0.25 * s;
  }
  const Spray sp = spray(m, p);
  for (int i = 0; i < n; ++i) {
    double gi = 0.0;
    for (int l = 0; l < n; ++l) gi += ft.g_inv(i, l) * rhs[l];
    EXPECT_LT(rel_err(sp.G[i], gi), 1e-7) << "G^" << i;
  }
}

TEST_P(GeometryFixture, SprayAndRiemannDerivativesMatchFiniteDifferences) {
  const MetricFamilySpec spec = fixture(GetParam());
  const MetricField m = construct(spec);
  const int n = spec.dimension, vars = 2 * n;
  const TangentPoint p = sample_point(GetParam());
  const LocalJets jets(m, p, 5);
  const auto z = joined(p);
  auto at = [&](const std::vector<long double>& w, int order) {
    TangentPoint q;
    for (int i = 0; i < n; ++i) {
      q.x.push_back(static_cast<double>(w[i]));
      q.y.push_back(static_cast<double>(w[n + i]));
    }
    return LocalJets(m, q, order);
  };
  // G up to third derivatives, R^i_k up to first.
  for (int i = 0; i < n; ++i) {
    const LFun Gi = [&](const std::vector<long double>& w) {
      return static_cast<long double>(at(w, 2).G(i).value());
    };
    for (const auto& a : {unit(vars, {0}), unit(vars, {n + 1}), unit(vars, {0, n}),
                          unit(vars, {1, n + 2, n + 2}), unit(vars, {n, n + 1, n + 2})}) {
      const double want = static_cast<double>(richardson_partial(Gi, z, a, 0.05L));
      EXPECT_LT(rel_err(extract_partial(jets.G(i), a), want), 1e-5) << GetParam() << " G^" << i;
    }
    for (int k = 0; k < n; ++k) {
      const LFun Rik = [&](const std::vector<long double>& w) {
        return static_cast<long double>(at(w, 4).R(i, k).value());
      };
      for (const auto& a : {unit(vars, {2}), unit(vars, {n})}) {
        const double want = static_cast<double>(richardson_partial(Rik, z, a, 0.05L));
        EXPECT_LT(rel_err(extract_partial(jets.R(i, k), a), want), 1e-5) << GetParam() << " R";
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Fixtures, GeometryFixture, ::testing::ValuesIn(kFixtures),
                         [](const auto& info) { return info.param; });

TEST(Geometry, EuclideanIsFlat) {
  const MetricField m = construct(fixture("euclidean"));
  const TangentPoint p{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  const CurvatureBundle cb = curvature_bundle(m, p);
  EXPECT_DOUBLE_EQ(cb.F, 1.0);
  EXPECT_EQ(max_abs(cb.riemann), 0.0);
  EXPECT_EQ(max_abs(cb.cartan), 0.0);
  EXPECT_EQ(max_abs(cb.berwald), 0.0);
  EXPECT_EQ(max_abs(cb.landsberg), 0.0);
  EXPECT_EQ(max_abs(cb.spray), 0.0);
  EXPECT_NEAR(s_curvature(m, p), 0.0, 1e-14);
}

TEST(Geometry, SpaceFormHasConstantFlagCurvature) {
  const MetricField m = construct(fixture("space_form"));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  for (int trial = 0; trial < 20; ++trial) {
    const TangentPoint p{{0.3 * N(rng), 0.3 * N(rng), 0.3 * N(rng)}, {N(rng), N(rng), N(rng)}};
    const std::vector<double> u{N(rng), N(rng), N(rng)};
    EXPECT_NEAR(flag_curvature(m, p, u), 1.0, 1e-7);
    EXPECT_LT(scalar_flag_fit(m, p).residual, 1e-10);
  }
}

TEST(Geometry, DeltaOnlyFamilyHasCurvatureMinusDeltaSquared) {
  const MetricField m = construct(fixture("cms_delta"));
  const TangentPoint p{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  EXPECT_NEAR(scalar_flag_fit(m, p).K, -0.01, 1e-6);
  EXPECT_NEAR(flag_curvature(m, p, std::vector<double>{0.0, 1.0, 0.0}), -0.01, 1e-6);
}

TEST(Geometry, DegenerateFlagIsRejected) {
  const MetricField m = construct(fixture("cms"));
  const TangentPoint p{{0.1, 0.0, 0.0}, {1.0, 2.0, 0.0}};
  EXPECT_THROW(flag_curvature(m, p, std::vector<double>{2.0, 4.0, 0.0}), PreconditionError);
}

TEST(Geometry, InsufficientJetOrderIsReported) {
  const MetricField m = construct(fixture("cms"));
  const LocalJets jets(m, {{0.1, 0.0, 0.0}, {1.0, 0.0, 0.0}}, 3);
  EXPECT_THROW(jets.R(0, 0), InsufficientOrder);
}

TEST(Geometry, RandersIsNotOfScalarFlagCurvature) {
  const MetricField m = construct(fixture("randers"));
  EXPECT_GT(scalar_flag_fit(m, {{0.1, -0.1, 0.2}, {0.3, 0.5, -0.8}}).residual, 1e-3);
}

TEST(Geometry, FunkIsProjectivelyFlatWithKMinusQuarter) {
  const MetricField m = construct(fixture("funk"));
  const TangentPoint p{{0.2, -0.1, 0.3}, {0.4, 0.1, -0.6}};
  const Projective pr = projective(m, p);
  EXPECT_LT(pr.hamel_residual, 1e-12);
  EXPECT_NEAR(pr.K, -0.25, 1e-10);
  EXPECT_NEAR(scalar_flag_fit(m, p).K, -0.25, 1e-10);
}

class VolumeFixture : public ::testing::TestWithParam<std::string> {};

TEST_P(VolumeFixture, DensityMatchesMonteCarlo) {
  const MetricFamilySpec spec = fixture(GetParam());
  const MetricField m = construct(spec);
  const std::vector<double> x{0.1, -0.2, 0.15};
  const double R = 2.5;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-R, R);
  const int samples = 400000;
  int inside = 0;
  for (int s = 0; s < samples; ++s) {
    const std::vector<double> y{U(rng), U(rng), U(rng)};
    inside += m(x, y) < 1.0;
  }
  const double p = static_cast<double>(inside) / samples;
  const double vol = p * std::pow(2.0 * R, 3);
  const double stderr_rel = std::sqrt((1.0 - p) / (p * samples));
  const double want = 4.0 / 3.0 * std::numbers::pi / vol;
  EXPECT_LT(rel_err(bh_volume_density(m, x), want, 0.0), 4.0 * stderr_rel) << GetParam();
}

INSTANTIATE_TEST_SUITE_P(Fixtures, VolumeFixture,
                         ::testing::Values("euclidean", "cms", "randers", "funk", "quartic"),
                         [](const auto& info) { return info.param; });

TEST(Volume, SCurvatureOfTheFamilyIsProportionalToF) {
  const MetricFamilySpec spec = fixture("cms");
  const MetricField m = construct(spec);
  // S = (n + 1) c F for the family; c from the closed form.
  for (const auto& y : {std::vector<double>{0.3, 0.5, -0.8}, std::vector<double>{-1.0, 0.2, 0.1}}) {
    const TangentPoint p{{0.1, -0.2, 0.15}, y};
    const double F = m(p.x, p.y);
    const PredictedInvariants inv = predicted_invariants(spec, p.x);
    EXPECT_NEAR(s_curvature(m, p), inv.s_coefficient * F, 1e-9);
  }
}

TEST(Volume, UnsupportedDimensionThrows) {
  MetricFamilySpec s;
  s.family = Family::euclidean;
  s.dimension = 5;
  EXPECT_ANY_THROW(construct(normalized(s)));
}
