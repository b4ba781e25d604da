#pragma once

// Finsler-geometric quantities at a tangent point, computed from Taylor jets
// of the metric.
//
// Conventions:
//   g_ij    = ½ [F²]_{y^i y^j}
//   G^i     = ¼ g^{il} { [F²]_{x^m y^l} y^m − [F²]_{x^l} }
//   N^i_k   = G^i_{·k},  Γ^i_jk = G^i_{·j·k},  B^i_jkl = G^i_{·j·k·l}
//   R^i_k   = 2 G^i_{x^k} − G^i_{x^l y^k} y^l + 2 G^l G^i_{·l·k} − G^i_{·l} G^l_{·k}
//   C_ijk   = ¼ [F²]_{y^i y^j y^k} = ½ ∂g_ij/∂y^k,  I_k = g^{ij} C_ijk
//   L_ijk   = −½ y^m g_ml B^l_ijk,  J_k = g^{ij} L_ijk
//   R_m^l_ij (stored as R4(m, l, i, j)) = ⅓ (R^l_{i·m·j} − R^l_{j·m·i})
//   R^l_ij   (stored as R3(l, i, j))    = ⅓ (R^l_{i·j} − R^l_{j·i})
// A "|" derivative is the horizontal covariant derivative of the Berwald
// connection; "|0" contracts it with y.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "finsler/jet.hpp"
#include "finsler/metric.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

struct TangentPoint {
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal jet order (in F-derivatives) each quantity needs.
namespace required_order {
inline constexpr int fundamental = 2;
inline constexpr int spray = 2;
inline constexpr int connection = 3;
inline constexpr int christoffel = 4;
inline constexpr int riemann = 4;
inline constexpr int berwald = 5;
inline constexpr int hh_curvature = 6;
inline constexpr int bianchi = 7;
}  // namespace required_order

// Jets of the basic geometric fields around one tangent point. Quantities are
// computed on first use, so an instance must not be shared between threads.
class LocalJets {
 public:
  LocalJets(const MetricField& metric, TangentPoint point, int order);

  int dim() const { return n_; }
  int order() const { return ctx_.order(); }
  const TangentPoint& point() const { return point_; }
  const MetricField& metric() const { return *metric_; }
  const JetContext& context() const { return ctx_; }

  const Jet& x(int i) const { return x_[i]; }
  const Jet& y(int i) const { return y_[i]; }
  std::span<const Jet> xs() const { return x_; }
  std::span<const Jet> ys() const { return y_; }

  Jet dx(const Jet& j, int k) const { return j.derivative(k); }
  Jet dy(const Jet& j, int k) const { return j.derivative(n_ + k); }

  const Jet& F() const { return F_; }
  const Jet& F2() const { return F2_; }
  const Jet& Fy(int i) const;
  const Jet& g(int i, int j) const;
  const Jet& ginv(int i, int j) const;
  const Jet& G(int i) const;
  const Jet& N(int i, int k) const;
  const Jet& Gamma(int i, int j, int k) const;
  const Jet& R(int i, int k) const;
  // R^m_m / ((n − 1) F²): the flag curvature when F is of scalar flag curvature.
  const Jet& K() const;

  // Σ_k v_k y^k.
  Jet contract_y(std::span<const Jet> v) const;

 private:
  void need(int order, const char* what) const;
  void ensure_fy() const;
  void ensure_fundamental() const;
  void ensure_spray() const;
  void ensure_connection() const;
  void ensure_christoffel() const;
  void ensure_riemann() const;

  const MetricField* metric_;
  TangentPoint point_;
  int n_;
  JetContext ctx_;
  std::vector<Jet> x_, y_;
  Jet F_, F2_;

  mutable std::vector<Jet> fy_, f2y_;
  mutable std::vector<Jet> g_, ginv_;
  mutable std::vector<Jet> G_;
  mutable std::vector<Jet> N_;
  mutable std::vector<Jet> gamma_;
  mutable std::vector<Jet> R_;
  mutable std::optional<Jet> K_;
};

enum class Slot { lower, upper };

// A tensor field on TM given by its jets at the base point, with the variance
// of every index.
struct FieldTensor {
  std::vector<Slot> slots;
  Tensor<Jet> data;

  int rank() const { return static_cast<int>(slots.size()); }
  RealTensor values() const;
};

FieldTensor scalar_field(const Jet& value, int dim);

// T_{…|k} appended as a trailing lower index.
FieldTensor horizontal_derivative(const FieldTensor& t, const LocalJets& jets);
// Contracts the last index with y (turns "|k" into "|0").
FieldTensor contract_last_with_y(const FieldTensor& t, const LocalJets& jets);
// y-derivative appended as a trailing lower index.
FieldTensor vertical_derivative(const FieldTensor& t, const LocalJets& jets);

using FieldFunction = std::function<FieldTensor(const LocalJets&)>;

// The k-th horizontal derivative of a field built from the jets at p.
// `extra_order` is the number of F-derivative orders the field itself uses.
RealTensor horizontal_derivative(const FieldFunction& field, const MetricField& m,
                                 const TangentPoint& p, int k, int extra_order);

struct FundamentalTensor {
  RealTensor g;
  RealTensor g_inv;
};

struct Spray {
  std::vector<double> G;
  RealTensor N;
  RealTensor christoffel;
};

struct ScalarFlagFit {
  double K = 0.0;
  double residual = 0.0;  // relative to max |R^i_k|
};

struct Cartan {
  RealTensor C;
  std::vector<double> I;
};

struct BerwaldLandsberg {
  RealTensor B;
  RealTensor L;
  std::vector<double> J;
};

struct HHCurvature {
  RealTensor R4;  // R4(m, l, i, j) = R_m^l_ij
  RealTensor R3;  // R3(l, i, j) = R^l_ij
};

struct Projective {
  double P = 0.0;
  double K = 0.0;
  double hamel_residual = 0.0;  // max-norm; the formulas presume it vanishes
};

struct CurvatureBundle {
  double F = 0.0;
  RealTensor g, g_inv;
  std::vector<double> spray;
  RealTensor connection_N, christoffel;
  RealTensor riemann;
  RealTensor cartan;
  std::vector<double> mean_cartan;
  RealTensor berwald;
  RealTensor landsberg;
  std::vector<double> mean_landsberg;
  RealTensor angular;        // h_jk
  RealTensor angular_mixed;  // h^i_k
};

// Throws NotPositiveDefinite when g fails to be positive definite.
FundamentalTensor fundamental_tensor(const MetricField& m, const TangentPoint& p);
Spray spray(const MetricField& m, const TangentPoint& p);
RealTensor riemann_curvature(const MetricField& m, const TangentPoint& p);
// Throws PreconditionError for a degenerate flag (u parallel to y).
double flag_curvature(const MetricField& m, const TangentPoint& p, std::span<const double> u);
ScalarFlagFit scalar_flag_fit(const MetricField& m, const TangentPoint& p);
ScalarFlagFit scalar_flag_fit(const LocalJets& jets);
Cartan cartan(const MetricField& m, const TangentPoint& p);
BerwaldLandsberg berwald_landsberg(const MetricField& m, const TangentPoint& p);
HHCurvature hh_curvature(const MetricField& m, const TangentPoint& p);
RealTensor hamel_residual(const MetricField& m, const TangentPoint& p);
Projective projective(const MetricField& m, const TangentPoint& p);
CurvatureBundle curvature_bundle(const MetricField& m, const TangentPoint& p);

// Jet forms used by the identity checks.
FieldTensor riemann_field(const LocalJets& jets);   // R^i_k
FieldTensor hh_field(const LocalJets& jets);        // R_m^l_ij
FieldTensor hh3_field(const LocalJets& jets);       // R^l_ij
FieldTensor berwald_field(const LocalJets& jets);   // B^i_jkl
FieldTensor cartan_field(const LocalJets& jets);    // C_ijk
FieldTensor mean_cartan_field(const LocalJets& jets);
FieldTensor landsberg_field(const LocalJets& jets);
FieldTensor mean_landsberg_field(const LocalJets& jets);
// P = F_{x^k} y^k / (2F).
Jet projective_factor(const LocalJets& jets);

// σ_F and S ------------------------------------------------------------------

struct QuadratureOptions {
  int initial_level = 8;      // nodes per polar direction at the first pass
  int max_level = 128;
  double tolerance = 1e-12;   // relative change between successive levels
};

// Vol(unit ball) / Vol{y : F(x, y) < 1}. Throws QuadratureError when the
// refinement does not settle within max_level.
double bh_volume_density(const MetricField& m, std::span<const double> x,
                         const QuadratureOptions& opts = {});
// Same, with x-dependence carried as jets (x given as jets of any order).
Jet bh_volume_density(const MetricField& m, std::span<const Jet> x,
                      const QuadratureOptions& opts = {});

// S = G^m_{·m} − y^m ∂(ln σ_F)/∂x^m.
double s_curvature(const MetricField& m, const TangentPoint& p,
                   const QuadratureOptions& opts = {});
// S as a jet of order min(jets.order() − 3, volume_order − 1).
Jet s_curvature(const LocalJets& jets, int volume_order, const QuadratureOptions& opts = {});

}  // namespace finsler
