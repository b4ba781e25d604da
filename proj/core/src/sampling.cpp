#include "finsler/sampling.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "finsler/error.hpp"

namespace finsler {

namespace {

// splitmix64; portable across standard libraries, unlike std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double normal() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * uniform());
  }

 private:
  std::uint64_t state_;
};

std::vector<double> unit_normal_vector(Rng& rng, int n) {
  for (;;) {
    std::vector<double> v(n);
    double r2 = 0.0;
    for (double& e : v) {
      e = rng.normal();
      r2 += e * e;
    }
    if (r2 < 1e-12) continue;
    for (double& e : v) e /= std::sqrt(r2);
    return v;
  }
}

double radical_inverse(int base, int k) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (k > 0) {
    r += f * (k % base);
    k /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

std::vector<double> normalize_direction(const MetricField& m, std::span<const double> x,
                                        std::vector<double> y) {
  const double f = m(x, y);
  if (!(f > 0.0)) throw DomainError("F vanishes on a sampled direction");
  for (double& e : y) e /= f;
  return y;
}

std::vector<SampleGroup> draw_samples(const MetricField& m, const SampleConfig& cfg) {
  const int n = m.dimension();
  if (cfg.num_points < 1 || cfg.directions_per_point < 1) {
    throw PreconditionError("sample counts must be positive");
  }
  std::vector<Interval> box = cfg.box;
  if (box.empty()) box.assign(n, Interval{-0.4, 0.4});
  if (static_cast<int>(box.size()) != n) throw PreconditionError("sampling box has the wrong dimension");

  Rng rng(cfg.seed);
  const int positions = (cfg.num_points + cfg.directions_per_point - 1) / cfg.directions_per_point;
  std::vector<SampleGroup> out;
  for (int p = 0; p < positions; ++p) {
    SampleGroup g;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 10000) throw DomainError("sampling box does not meet the metric's domain");
      g.x.assign(n, 0.0);
      for (int i = 0; i < n; ++i) g.x[i] = box[i].lo + (box[i].hi - box[i].lo) * rng.uniform();
      if (m.in_domain(g.x)) break;
    }
    for (int d = 0; d < cfg.directions_per_point; ++d) {
      std::vector<double> y = unit_normal_vector(rng, n);
      if (cfg.normalize_F) y = normalize_direction(m, g.x, std::move(y));
      g.ys.push_back(std::move(y));
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::vector<double>> spiral_directions(int n, int count, std::uint64_t seed) {
  if (n < 2 || n > 4) throw PreconditionError("spiral directions support dimensions 2..4");
  if (count < 1) throw PreconditionError("direction count must be positive");
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<std::vector<double>> pts;
  for (int k = 0; k < count; ++k) {
    if (n == 2) {
      const double t = two_pi * (k + 0.5) / count;
      pts.push_back({std::cos(t), std::sin(t)});
    } else if (n == 3) {
      const double z = 1.0 - (2.0 * k + 1.0) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double t = k * std::numbers::pi * (3.0 - std::sqrt(5.0));
      pts.push_back({r * std::cos(t), r * std::sin(t), z});
    } else {
      const double ce = std::sqrt((k + 0.5) / count);
      const double se = std::sqrt(1.0 - ce * ce);
      const double t1 = two_pi * radical_inverse(2, k + 1);
      const double t2 = two_pi * radical_inverse(3, k + 1);
      pts.push_back({ce * std::cos(t1), ce * std::sin(t1), se * std::cos(t2), se * std::sin(t2)});
    }
  }
  // Gram–Schmidt on a Gaussian matrix.
  Rng rng(seed ^ 0x5bd1e995ULL);
  std::vector<std::vector<double>> q;
  while (static_cast<int>(q.size()) < n) {
    std::vector<double> v = unit_normal_vector(rng, n);
    for (const auto& e : q) {
      double d = 0.0;
      for (int i = 0; i < n; ++i) d += v[i] * e[i];
      for (int i = 0; i < n; ++i) v[i] -= d * e[i];
    }
    double r = 0.0;
    for (double e : v) r += e * e;
    if (r < 1e-6) continue;
    for (double& e : v) e /= std::sqrt(r);
    q.push_back(std::move(v));
  }
  for (auto& p : pts) {
    std::vector<double> r(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r[i] += q[j][i] * p[j];
    p = std::move(r);
  }
  return pts;
}

}  // namespace finsler
