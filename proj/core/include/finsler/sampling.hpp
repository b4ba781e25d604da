#pragma once

// Reproducible tangent-point sampling.

#include <cstdint>
#include <span>
#include <vector>

#include "finsler/metric.hpp"

namespace finsler {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SampleConfig {
  int num_points = 50;           // total tangent points
  int directions_per_point = 5;  // tangent directions drawn at each position
  std::uint64_t seed = 42;
  std::vector<Interval> box;     // empty: [−0.4, 0.4]^n
  bool normalize_F = true;       // rescale every y to F(x, y) = 1
};

// One position with several tangent directions.
struct SampleGroup {
  std::vector<double> x;
  std::vector<std::vector<double>> ys;
};

// ceil(num_points / directions_per_point) positions drawn uniformly from the
// box (rejecting points outside the metric's domain), each with uniformly
// distributed directions. Throws DomainError when the box misses the domain.
std::vector<SampleGroup> draw_samples(const MetricField& m, const SampleConfig& cfg);

// `count` quasi-uniform unit vectors in R^n (golden-angle spiral for n = 3,
// equal angles for n = 2, a Halton lattice in Hopf coordinates for n = 4),
// rotated by a random orthogonal matrix derived from the seed.
std::vector<std::vector<double>> spiral_directions(int n, int count, std::uint64_t seed);

// Rescales y to F(x, y) = 1.
std::vector<double> normalize_direction(const MetricField& m, std::span<const double> x,
                                        std::vector<double> y);

}  // namespace finsler
