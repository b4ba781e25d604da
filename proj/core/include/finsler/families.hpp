#pragma once

// Built-in metric families.
//
//   euclidean   F = |y|
//   riemannian  F = √(yᵀ A y + (Σ κ_i x^i y^i)²), the graph metric of u = ½ Σ κ_i (x^i)²
//   space_form  F = √(|y|² + μ(|x|²|y|² − ⟨x,y⟩²)) / (1 + μ|x|²)
//   randers     F = α + β with α the riemannian form above and β_i = b_i + ω_ij x^j
//   cms_family  F = (√((1 − ‖W‖²_h) h² + (W_i y^i)²) − W_i y^i) / (1 − ‖W‖²_h), with h the
//               space form and
//               W = −2[(δ√(1+μ|x|²) + ⟨a,x⟩)x − a|x|²/(√(1+μ|x|²) + 1)] + xQ + b + μ⟨b,x⟩x
//   funk        F = (√(|y|² − |x|²|y|² + ⟨x,y⟩²) + ⟨x,y⟩)/(1 − |x|²) + ⟨a,y⟩/(1 + ⟨a,x⟩)
//   quartic     F = (Σ (y^i)⁴ + ε|y|⁴)^{1/4}, a Minkowski norm that is not Randers
//
// In cms_family, ⟨·,·⟩ and |·| are Euclidean, (xQ)^i = x^j Q_ji, W_i = h_ij W^j and
// ‖W‖_h is the norm of W in the metric h at x.

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "finsler/jet.hpp"
#include "finsler/metric.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

enum class Family { euclidean, riemannian, space_form, randers, cms_family, funk, quartic };

std::string family_name(Family f);
// Throws ParseError for an unknown name.
Family family_from_name(const std::string& name);

struct MetricFamilySpec {
  Family family = Family::euclidean;
  int dimension = 3;

  double delta = 0.0;
  double mu = 0.0;
  std::vector<double> Q;      // n×n row-major, antisymmetric
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> A;      // n×n row-major, symmetric positive definite
  std::vector<double> kappa;
  std::vector<double> omega;  // n×n row-major
  double epsilon = 0.1;

  // Sampling box for positions; empty means the family default.
  std::vector<Interval> box;
  // Validation lattice: probe_points^n points on [−probe_half_width, probe_half_width]^n.
  int probe_points = 5;
  double probe_half_width = 0.5;
};

// Fills unset parameters with their defaults (zeros, identity A, ...).
MetricFamilySpec normalized(MetricFamilySpec spec);

// Builds the metric. Throws DomainError when the parameters do not define a
// Finsler metric on the validation lattice (the offending point is named) and
// PreconditionError on shape errors.
MetricField construct(const MetricFamilySpec& spec);

// The position box used for sampling.
std::vector<Interval> sampling_box(const MetricFamilySpec& spec);

// K = 3 c_{x^m} y^m / F + σ and S = (n + 1) c F for the families with known
// closed forms (cms_family, space_form, euclidean and the plain funk metric).
template <class T>
struct Invariants {
  T c;
  std::vector<T> c_x;
  T sigma;
  std::vector<T> theta;  // θ_i = c_{x^i}
  std::vector<T> W;
  T s_coefficient;       // (n + 1) c
};
using PredictedInvariants = Invariants<double>;

bool has_predicted_invariants(const MetricFamilySpec& spec);
// Throws PreconditionError for families without closed forms.
PredictedInvariants predicted_invariants(const MetricFamilySpec& spec, std::span<const double> x);
Invariants<Jet> predicted_invariants(const MetricFamilySpec& spec, std::span<const Jet> x);

// The wind field W^i(x) of cms_family.
std::vector<double> cms_wind(const MetricFamilySpec& spec, std::span<const double> x);

// JSON documents of the form {"family": ..., "dimension": n, "params": {...}, "box": [[lo, hi], ...]}.
// Throws ParseError naming the offending key.
MetricFamilySpec spec_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const MetricFamilySpec& spec);
MetricFamilySpec load_spec(const std::string& path);

}  // namespace finsler
