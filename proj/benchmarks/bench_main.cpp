#include <benchmark/benchmark.h>

#include <vector>

#include "finsler/detect.hpp"
#include "finsler/families.hpp"
#include "finsler/geometry.hpp"
#include "finsler/identities.hpp"
#include "finsler/jet.hpp"

using namespace finsler;

namespace {

MetricFamilySpec cms_spec() {
  MetricFamilySpec s;
  s.family = Family::cms_family;
  s.dimension = 3;
  s.mu = 0.3;
  s.a = {0.1, 0.0, 0.0};
  s.b = {0.02, -0.01, 0.03};
  s.Q = {0.0, 0.05, -0.02, -0.05, 0.0, 0.03, 0.02, -0.03, 0.0};
  return normalized(s);
}

const TangentPoint kPoint{{0.1, -0.2, 0.15}, {0.3, 0.5, -0.8}};

}  // namespace

static void BM_JetMultiply(benchmark::State& state) {
  const int order = static_cast<int>(state.range(0));
  JetContext ctx(6, order);
  std::vector<Jet> v;
  for (int i = 0; i < 6; ++i) v.push_back(seed_variable(ctx, i, 0.1 * (i + 1)));
  const Jet a = exp(v[0] + v[3]) * v[1], b = sqrt(1.0 + v[2] * v[4] + v[5] * v[5]);
  for (auto _ : state) benchmark::DoNotOptimize(a * b);
  state.SetLabel(std::to_string(a.coefficients().size()) + " coefficients");
}
BENCHMARK(BM_JetMultiply)->DenseRange(3, 7);

static void BM_MetricJet(benchmark::State& state) {
  const MetricField m = construct(cms_spec());
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) {
    LocalJets jets(m, kPoint, order);
    benchmark::DoNotOptimize(jets.F().value());
  }
}
BENCHMARK(BM_MetricJet)->DenseRange(4, 7)->Unit(benchmark::kMicrosecond);

static void BM_RiemannCurvature(benchmark::State& state) {
  const MetricField m = construct(cms_spec());
  for (auto _ : state) benchmark::DoNotOptimize(riemann_curvature(m, kPoint));
}
BENCHMARK(BM_RiemannCurvature)->Unit(benchmark::kMicrosecond);

static void BM_CurvatureBundle(benchmark::State& state) {
  const MetricField m = construct(cms_spec());
  for (auto _ : state) benchmark::DoNotOptimize(curvature_bundle(m, kPoint));
}
BENCHMARK(BM_CurvatureBundle)->Unit(benchmark::kMillisecond);

static void BM_VolumeDensity(benchmark::State& state) {
  const MetricField m = construct(cms_spec());
  for (auto _ : state) benchmark::DoNotOptimize(bh_volume_density(m, kPoint.x));
}
BENCHMARK(BM_VolumeDensity)->Unit(benchmark::kMicrosecond);

static void BM_WeaklyIsotropicFit(benchmark::State& state) {
  const MetricField m = construct(cms_spec());
  for (auto _ : state) benchmark::DoNotOptimize(weakly_isotropic_fit(m, kPoint.x));
}
BENCHMARK(BM_WeaklyIsotropicFit)->Unit(benchmark::kMillisecond);

static void BM_RandersSplit(benchmark::State& state) {
  const MetricField m = construct(cms_spec());
  for (auto _ : state) benchmark::DoNotOptimize(randers_split(m, kPoint.x));
}
BENCHMARK(BM_RandersSplit)->Unit(benchmark::kMicrosecond);

static void BM_IdentitySuite(benchmark::State& state) {
  const MetricFamilySpec spec = cms_spec();
  const MetricField m = construct(spec);
  std::vector<const IdentityCheck*> checks;
  for (const IdentityCheck& c : registry()) checks.push_back(&c);
  SampleConfig cfg;
  cfg.num_points = 10;
  RunOptions opts;
  opts.spec = &spec;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_identities(checks, m, cfg, opts));
}
BENCHMARK(BM_IdentitySuite)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_MAIN();
