#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "finsler/error.hpp"
#include "finsler/families.hpp"
#include "finsler/geometry.hpp"
#include "finsler/sampling.hpp"
#include "support.hpp"

using namespace finsler;
using finsler::testing::fixture;
using nlohmann::json;

namespace {

std::string parse_message(const json& doc) {
  try {
    spec_from_json(doc);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Families, NamesRoundTrip) {
  for (Family f : {Family::euclidean, Family::riemannian, Family::space_form, Family::randers,
                   Family::cms_family, Family::funk, Family::quartic}) {
    EXPECT_EQ(family_from_name(family_name(f)), f);
  }
  EXPECT_THROW(family_from_name("hyperbolic"), ParseError);
}

TEST(Families, SpecJsonRoundTrip) {
  const MetricFamilySpec s = fixture("cms");
  const json doc = spec_to_json(s);
  const MetricFamilySpec back = normalized(spec_from_json(doc));
  EXPECT_EQ(spec_to_json(back), doc);
  EXPECT_EQ(back.Q, s.Q);
  EXPECT_EQ(back.b, s.b);
}

TEST(Families, ParseErrorsNameTheKey) {
  EXPECT_NE(parse_message({{"family", "cms_family"}}).find("dimension"), std::string::npos);
  EXPECT_NE(parse_message({{"family", "cms_family"}, {"dimension", 3}, {"colour", 1}}).find("colour"),
            std::string::npos);
  EXPECT_NE(parse_message({{"family", "cms_family"},
                           {"dimension", 3},
                           {"params", {{"a", {0.1, 0.2}}}}})
                .find("params.a"),
            std::string::npos);
  EXPECT_NE(parse_message({{"family", "funk"}, {"dimension", 3}, {"params", {{"mu", 1.0}}}})
                .find("params.mu"),
            std::string::npos);
  EXPECT_NE(parse_message({{"family", 7}, {"dimension", 3}}).find("family"), std::string::npos);
}

TEST(Families, LoadSpecReportsMissingFile) {
  EXPECT_THROW(load_spec("/nonexistent/spec.json"), ParseError);
}

TEST(Families, StrongWindIsRejected) {
  MetricFamilySpec s;
  s.family = Family::cms_family;
  s.dimension = 3;
  s.b = {1.5, 0.0, 0.0};
  EXPECT_THROW(construct(normalized(s)), DomainError);
}

TEST(Families, IndefiniteRiemannianIsRejected) {
  MetricFamilySpec s;
  s.family = Family::riemannian;
  s.dimension = 2;
  s.A = {1.0, 0.0, 0.0, -1.0};
  EXPECT_THROW(construct(normalized(s)), DomainError);
}

TEST(Families, NonAntisymmetricQIsRejected) {
  MetricFamilySpec s;
  s.family = Family::cms_family;
  s.dimension = 2;
  s.Q = {0.0, 0.1, 0.1, 0.0};
  EXPECT_ANY_THROW(construct(normalized(s)));
}

TEST(Families, EuclideanPointOutsideFunkDomain) {
  const MetricField m = construct(fixture("funk"));
  EXPECT_FALSE(m.in_domain(std::vector<double>{1.2, 0.0, 0.0}));
  EXPECT_THROW(m(std::vector<double>{1.2, 0.0, 0.0}, std::vector<double>{1.0, 0.0, 0.0}), DomainError);
}

TEST(Families, MetricIsPositivelyHomogeneous) {
  for (const char* name : {"cms", "randers", "funk_a", "quartic", "space_form"}) {
    const MetricField m = construct(fixture(name));
    const std::vector<double> x{0.1, 0.05, -0.1}, y{0.3, -0.7, 0.2};
    std::vector<double> y3{0.9, -2.1, 0.6};
    EXPECT_NEAR(m(x, y3), 3.0 * m(x, y), 1e-14) << name;
  }
}

TEST(Families, ZeroParametersReduceToSpaceForm) {
  MetricFamilySpec c;
  c.family = Family::cms_family;
  c.dimension = 3;
  c.mu = 0.5;
  MetricFamilySpec h;
  h.family = Family::space_form;
  h.dimension = 3;
  h.mu = 0.5;
  const MetricField mc = construct(normalized(c)), mh = construct(normalized(h));
  const std::vector<double> x{0.2, -0.1, 0.3}, y{1.0, 0.4, -0.2};
  EXPECT_NEAR(mc(x, y), mh(x, y), 1e-15);
}

// The flag curvature from the full Riemann pipeline against the closed form
// K = 3 c_{x^m} y^m / F + σ, over random parameter draws.
TEST(Families, FlagCurvatureMatchesClosedForm) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int draw = 0; draw < 5; ++draw) {
    MetricFamilySpec s;
    s.family = Family::cms_family;
    s.dimension = 3;
    s.mu = draw % 2 ? 0.3 : 0.0;
    s.a = {0.1, 0.0, 0.0};
    const double q01 = 0.05 * U(rng), q02 = 0.05 * U(rng), q12 = 0.05 * U(rng);
    s.Q = {0.0, q01, q02, -q01, 0.0, q12, -q02, -q12, 0.0};
    s.b = {0.03 * U(rng), 0.03 * U(rng), 0.03 * U(rng)};
    s = normalized(s);
    const MetricField m = construct(s);
    SampleConfig cfg;
    cfg.seed = 100 + draw;
    for (const SampleGroup& g : draw_samples(m, cfg)) {
      const PredictedInvariants inv = predicted_invariants(s, g.x);
      for (const auto& y : g.ys) {
        const TangentPoint p{g.x, y};
        const ScalarFlagFit fit = scalar_flag_fit(m, p);
        const double F = m(g.x, y);
        double cy = 0.0;
        for (int i = 0; i < 3; ++i) cy += inv.c_x[i] * y[i];
        const double K = 3.0 * cy / F + inv.sigma;
        EXPECT_LT(std::abs(fit.K - K) / std::abs(K), 1e-5);
        EXPECT_LT(fit.residual, 1e-8);
      }
    }
  }
}

TEST(Families, ThetaIsTheGradientOfC) {
  const MetricFamilySpec s = fixture("cms");
  const std::vector<double> x{0.1, -0.2, 0.15};
  const PredictedInvariants inv = predicted_invariants(s, x);
  for (int i = 0; i < 3; ++i) {
    std::vector<double> xp = x, xm = x;
    xp[i] += 1e-5;
    xm[i] -= 1e-5;
    const double fd = (predicted_invariants(s, xp).c - predicted_invariants(s, xm).c) / 2e-5;
    EXPECT_NEAR(inv.theta[i], fd, 1e-9);
  }
}

TEST(Families, PredictedInvariantsNeedAClosedForm) {
  EXPECT_FALSE(has_predicted_invariants(fixture("randers")));
  EXPECT_THROW(predicted_invariants(fixture("randers"), std::vector<double>{0.0, 0.0, 0.0}),
               PreconditionError);
}

TEST(Sampling, IsReproducibleAndNormalized) {
  const MetricField m = construct(fixture("cms"));
  SampleConfig cfg;
  const auto a = draw_samples(m, cfg), b = draw_samples(m, cfg);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t g = 0; g < a.size(); ++g) {
    EXPECT_EQ(a[g].x, b[g].x);
    EXPECT_EQ(a[g].ys, b[g].ys);
    for (const auto& y : a[g].ys) EXPECT_NEAR(m(a[g].x, y), 1.0, 1e-14);
    for (double xi : a[g].x) EXPECT_LE(std::abs(xi), 0.4);
  }
  cfg.seed = 43;
  EXPECT_NE(draw_samples(m, cfg)[0].x, a[0].x);
}

TEST(Sampling, BoxOutsideTheDomainThrows) {
  const MetricField m = construct(fixture("funk"));
  SampleConfig cfg;
  cfg.box = {{2.0, 3.0}, {2.0, 3.0}, {2.0, 3.0}};
  EXPECT_THROW(draw_samples(m, cfg), DomainError);
}

TEST(Sampling, SpiralDirectionsAreUnitAndSpread) {
  for (int n : {2, 3, 4}) {
    const auto d = spiral_directions(n, 24, 5);
    ASSERT_EQ(d.size(), 24u);
    double min_gap = 4.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double norm = 0.0;
      for (double v : d[i]) norm += v * v;
      EXPECT_NEAR(norm, 1.0, 1e-14);
      for (std::size_t j = 0; j < i; ++j) {
        double dist = 0.0;
        for (int k = 0; k < n; ++k) dist += (d[i][k] - d[j][k]) * (d[i][k] - d[j][k]);
        min_gap = std::min(min_gap, dist);
      }
    }
    EXPECT_GT(min_gap, 1e-4) << "n = " << n;
  }
}
