#pragma once

// Named residual checks for the curvature identities, evaluated over sampled
// tangent points.
//
// Every check returns, per tangent point, the largest |Σ terms| over the
// tensor components together with the largest |term| entering it. The
// normalized residual is value / max(scale, kResidualFloor).

#include <algorithm>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "finsler/families.hpp"
#include "finsler/geometry.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

enum class Applicability { any_metric, scalar_flag_only, weakly_isotropic_only, projectively_flat_only };

std::string applicability_name(Applicability a);

inline constexpr double kResidualFloor = 1e-6;

struct Residual {
  double value = 0.0;
  double scale = 0.0;
  double normalized() const { return value / std::max(scale, kResidualFloor); }
};

// Sums that should vanish, accumulated component by component.
class ResidualAccumulator {
 public:
  void add(std::initializer_list<double> terms);
  void add_sum(double sum, double scale);
  Residual result() const { return {value_, scale_}; }

 private:
  double value_ = 0.0;
  double scale_ = 0.0;
};

// Where σ(x) and θ_i(x) come from.
enum class IsotropySource { automatic, predicted, fitted };

std::string isotropy_source_name(IsotropySource s);

// The tangent points at one position, with their jets and (on demand) the
// weak-isotropy data σ(x), θ_i(x) carried as jets.
class CheckContext {
 public:
  CheckContext(const MetricField& m, const SampleGroup& group, int order,
               const MetricFamilySpec* spec, IsotropySource source, std::uint64_t seed);

  int dim() const { return n_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(group_->ys.size()); }
  const MetricField& metric() const { return *metric_; }
  const std::vector<double>& x() const { return group_->x; }
  const std::vector<double>& y(int k) const { return group_->ys[k]; }
  const LocalJets& jets(int k) const;

  // Throws PreconditionError when no source applies.
  const Jet& sigma() const;
  const std::vector<Jet>& theta() const;
  // Max over samples of |K − 3θ/F − σ| / max |K|.
  double isotropy_residual() const;
  IsotropySource isotropy_source() const;

 private:
  void ensure_isotropy() const;

  const MetricField* metric_;
  const SampleGroup* group_;
  int n_;
  int order_;
  const MetricFamilySpec* spec_;
  IsotropySource source_;
  std::uint64_t seed_;
  mutable std::vector<std::unique_ptr<LocalJets>> jets_;
  mutable std::optional<Jet> sigma_;
  mutable std::vector<Jet> theta_;
  mutable double iso_residual_ = 0.0;
  mutable IsotropySource used_ = IsotropySource::automatic;
};

struct IdentityCheck {
  std::string name;
  std::string description;
  int required_order = 0;
  Applicability applicability = Applicability::any_metric;
  int min_dimension = 2;
  bool needs_isotropy = false;      // uses σ and θ
  bool skip_when_theta_zero = false;
  // Extra gate; returns the reason for skipping, if any.
  std::function<std::optional<std::string>(const CheckContext&)> precondition;
  // One residual per tangent point of the context.
  std::function<std::vector<Residual>(const CheckContext&)> evaluate;
};

// All checks, in a fixed order.
const std::vector<IdentityCheck>& registry();
// Throws ParseError for an unknown name.
const IdentityCheck& find_check(const std::string& name);

enum class Verdict { pass, fail, skipped };

std::string verdict_name(Verdict v);

struct IdentityReport {
  std::string name;
  Verdict verdict = Verdict::skipped;
  std::string reason;                // set when skipped
  int samples = 0;
  double max_residual = 0.0;
  double mean_residual = 0.0;
  TangentPoint worst;                // tangent point of the max residual
  double tolerance = 0.0;
  int jet_order = 0;
  std::string isotropy_source;       // empty when unused
  std::vector<TangentPoint> points;
  std::vector<double> residuals;     // normalized, one per point
};

struct RunOptions {
  double tolerance = 1e-5;
  int jet_order = 0;                 // 0: each check's required order
  int threads = 1;
  IsotropySource isotropy = IsotropySource::automatic;
  const MetricFamilySpec* spec = nullptr;  // enables predicted invariants
  double scalar_flag_gate = 1e-6;
  double isotropy_gate = 1e-5;
  double hamel_gate = 1e-6;
  double theta_zero = 1e-10;
  // The caller asserts projective flatness: projectively_flat_only checks run
  // without the Hamel gate.
  bool assume_applicable = false;
};

// Throws InsufficientOrder when opts.jet_order is below the check's requirement.
IdentityReport run_identity(const IdentityCheck& check, const MetricField& m,
                            const SampleConfig& sampler, const RunOptions& opts = {});

// Runs several checks, distributing (check, position) pairs over
// opts.threads workers. The result does not depend on the thread count.
std::vector<IdentityReport> run_identities(const std::vector<const IdentityCheck*>& checks,
                                           const MetricField& m, const SampleConfig& sampler,
                                           const RunOptions& opts = {});

}  // namespace finsler
