#pragma once

// Classification: weakly isotropic flag curvature K = 3θ/F + σ and the
// Randers form F = α + β.

#include <span>
#include <string>
#include <vector>

#include "finsler/geometry.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

struct WeaklyIsotropicFit {
  std::vector<double> theta;  // θ_i(x)
  double sigma = 0.0;
  double residual = 0.0;      // max |K F − 3θ_i y^i − σF| / max |K F|
  int directions = 0;
};

// σ(x) and θ_i(x) as jets over the tangent variables (constant in y), fitted
// in the truncated algebra so that their x-derivatives come along.
struct WeaklyIsotropicJets {
  Jet sigma;
  std::vector<Jet> theta;
  double residual = 0.0;
};

// The number of fitting directions used by default: 6(n + 1).
int default_fit_directions(int n);

// Least squares of K·F = 3θ_i y^i + σF over max(6(n+1), cfg.directions_per_point)
// spiral directions at x, rotated by cfg.seed. Throws PreconditionError when
// F is not of scalar flag curvature at some direction (residual ≥ 1e−6) or the
// regression is rank deficient.
WeaklyIsotropicFit weakly_isotropic_fit(const MetricField& m, std::span<const double> x,
                                        const SampleConfig& cfg = {});

// The same regression with jets of the given order; σ and θ come back with
// order − 4.
WeaklyIsotropicJets weakly_isotropic_jets(const MetricField& m, std::span<const double> x,
                                          int order,
                                          std::span<const std::vector<double>> directions);

struct RandersSplit {
  RealTensor alpha_matrix;           // a_ij, α = √(a_ij y^i y^j)
  std::vector<double> beta;          // b_i
  double quadratic_residual = 0.0;   // max |α² − a_ij y^i y^j| / max α² on fresh samples
  double linear_residual = 0.0;      // max |β − b_i y^i| / max |α| on fresh samples
  double reconstruction_error = 0.0; // max |F − α − β| / F on fresh samples
  double beta_norm = 0.0;            // ‖β‖_α
  bool positive_definite = false;
  bool is_randers = false;
  std::string reason;                // why is_randers is false
};

// α(y) = (F(y) + F(−y))/2, β(y) = (F(y) − F(−y))/2; a_ij and b_i fitted over
// spiral directions and tested on a second, independent set.
RandersSplit randers_split(const MetricField& m, std::span<const double> x,
                           const SampleConfig& cfg = {}, double threshold = 1e-6);

// (−η + √(η² − 4aξ)) / (2a). Throws PreconditionError for a = 0 and
// DomainError for a negative discriminant.
double quadratic_root(double a, double eta, double xi);

}  // namespace finsler
