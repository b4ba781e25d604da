#include "finsler/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>

#include "finsler/error.hpp"

namespace finsler {

namespace {

constexpr int kMaxDimension = 4;

std::size_t idx2(int n, int i, int j) { return static_cast<std::size_t>(i * n + j); }
std::size_t idx3(int n, int i, int j, int k) {
  return static_cast<std::size_t>((i * n + j) * n + k);
}

void check_positive_definite(const std::vector<Jet>& g, int n) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g[idx2(n, i, j)].value();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0)) {
    std::string msg = "fundamental tensor is not positive definite; eigenvalues:";
    std::vector<double> out(ev.data(), ev.data() + ev.size());
    for (double e : out) msg += " " + std::to_string(e);
    throw NotPositiveDefinite(msg, std::move(out));
  }
}

}  // namespace

LocalJets::LocalJets(const MetricField& metric, TangentPoint point, int order)
    : metric_(&metric),
      point_(std::move(point)),
      n_(metric.dimension()),
      ctx_(2 * metric.dimension(), order) {
  if (n_ < 2 || n_ > kMaxDimension) {
    throw PreconditionError("dimension " + std::to_string(n_) + " outside the supported range 2..4");
  }
  if (static_cast<int>(point_.x.size()) != n_ || static_cast<int>(point_.y.size()) != n_) {
    throw PreconditionError("tangent point does not match the metric dimension");
  }
  double ynorm = 0.0;
  for (double v : point_.y) ynorm += v * v;
  if (!(ynorm > 0.0)) throw PreconditionError("direction y must be nonzero");
  for (int i = 0; i < n_; ++i) {
    x_.push_back(seed_variable(ctx_, i, point_.x[i]));
    y_.push_back(seed_variable(ctx_, n_ + i, point_.y[i]));
  }
  F_ = metric(std::span<const Jet>(x_), std::span<const Jet>(y_));
  if (!(F_.value() > 0.0)) throw DomainError(metric.name() + ": F is not positive at y");
  F2_ = F_ * F_;
}

void LocalJets::need(int order, const char* what) const {
  if (ctx_.order() < order) {
    throw InsufficientOrder(std::string(what) + " needs jet order " + std::to_string(order) +
                            ", have " + std::to_string(ctx_.order()));
  }
}

void LocalJets::ensure_fy() const {
  if (!fy_.empty()) return;
  for (int i = 0; i < n_; ++i) {
    fy_.push_back(dy(F_, i));
    f2y_.push_back(dy(F2_, i));
  }
}

void LocalJets::ensure_fundamental() const {
  if (!g_.empty()) return;
  need(required_order::fundamental, "g_ij");
  ensure_fy();
  std::vector<Jet> g(static_cast<std::size_t>(n_ * n_));
  for (int i = 0; i < n_; ++i) {
    for (int j = i; j < n_; ++j) {
      g[idx2(n_, i, j)] = 0.5 * dy(f2y_[i], j);
      g[idx2(n_, j, i)] = g[idx2(n_, i, j)];
    }
  }
  check_positive_definite(g, n_);
  ginv_ = jet_inverse(g);
  g_ = std::move(g);
}

void LocalJets::ensure_spray() const {
  if (!G_.empty()) return;
  need(required_order::spray, "G^i");
  ensure_fundamental();
  std::vector<Jet> rhs;
  for (int l = 0; l < n_; ++l) {
    Jet acc = -dx(F2_, l);
    for (int m = 0; m < n_; ++m) acc += dx(f2y_[l], m) * y_[m];
    rhs.push_back(0.25 * acc);
  }
  G_ = jet_linear_solve(g_, rhs);
}

void LocalJets::ensure_connection() const {
  if (!N_.empty()) return;
  need(required_order::connection, "N^i_k");
  ensure_spray();
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < n_; ++k) N_.push_back(dy(G_[i], k));
}

void LocalJets::ensure_christoffel() const {
  if (!gamma_.empty()) return;
  need(required_order::christoffel, "Γ^i_jk");
  ensure_connection();
  gamma_.resize(static_cast<std::size_t>(n_ * n_ * n_));
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      for (int k = j; k < n_; ++k) {
        gamma_[idx3(n_, i, j, k)] = dy(N_[idx2(n_, i, j)], k);
        gamma_[idx3(n_, i, k, j)] = gamma_[idx3(n_, i, j, k)];
      }
    }
  }
}

void LocalJets::ensure_riemann() const {
  if (!R_.empty()) return;
  need(required_order::riemann, "R^i_k");
  ensure_christoffel();
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < n_; ++k) {
      Jet acc = 2.0 * dx(G_[i], k);
      for (int l = 0; l < n_; ++l) {
        acc -= dx(N_[idx2(n_, i, k)], l) * y_[l];
        acc += 2.0 * G_[l] * gamma_[idx3(n_, i, l, k)];
        acc -= N_[idx2(n_, i, l)] * N_[idx2(n_, l, k)];
      }
      R_.push_back(std::move(acc));
    }
  }
}

const Jet& LocalJets::Fy(int i) const {
  ensure_fy();
  return fy_[i];
}
const Jet& LocalJets::g(int i, int j) const {
  ensure_fundamental();
  return g_[idx2(n_, i, j)];
}
const Jet& LocalJets::ginv(int i, int j) const {
  ensure_fundamental();
  return ginv_[idx2(n_, i, j)];
}
const Jet& LocalJets::G(int i) const {
  ensure_spray();
  return G_[i];
}
const Jet& LocalJets::N(int i, int k) const {
  ensure_connection();
  return N_[idx2(n_, i, k)];
}
const Jet& LocalJets::Gamma(int i, int j, int k) const {
  ensure_christoffel();
  return gamma_[idx3(n_, i, j, k)];
}
const Jet& LocalJets::R(int i, int k) const {
  ensure_riemann();
  return R_[idx2(n_, i, k)];
}

const Jet& LocalJets::K() const {
  if (!K_) {
    ensure_riemann();
    Jet tr = R_[0];
    for (int m = 1; m < n_; ++m) tr += R_[idx2(n_, m, m)];
    K_ = tr / (static_cast<double>(n_ - 1) * F2_);
  }
  return *K_;
}

Jet LocalJets::contract_y(std::span<const Jet> v) const {
  Jet acc = v[0] * y_[0];
  for (int k = 1; k < n_; ++k) acc += v[k] * y_[k];
  return acc;
}

// FieldTensor ------------------------------------------------------------------

RealTensor FieldTensor::values() const {
  RealTensor t(data.dim(), data.rank());
  for (std::size_t f = 0; f < t.size(); ++f) t[f] = data[f].value();
  return t;
}

FieldTensor scalar_field(const Jet& value, int dim) {
  FieldTensor t{{}, Tensor<Jet>(dim, 0)};
  t.data[0] = value;
  return t;
}

FieldTensor horizontal_derivative(const FieldTensor& t, const LocalJets& jets) {
  const int n = jets.dim();
  const int r = t.rank();
  FieldTensor out{t.slots, Tensor<Jet>(n, r + 1)};
  out.slots.push_back(Slot::lower);
  std::vector<int> src(r);
  for (std::size_t f = 0; f < out.data.size(); ++f) {
    std::vector<int> idx = out.data.unflatten(f);
    const int k = idx[r];
    std::copy(idx.begin(), idx.begin() + r, src.begin());
    const Jet& base = t.data.at(src);
    Jet acc = jets.dx(base, k);
    for (int m = 0; m < n; ++m) acc -= jets.N(m, k) * jets.dy(base, m);
    for (int p = 0; p < r; ++p) {
      const int a = idx[p];
      for (int m = 0; m < n; ++m) {
        src[p] = m;
        const Jet& tm = t.data.at(src);
        if (t.slots[p] == Slot::upper) {
          acc += jets.Gamma(a, m, k) * tm;
        } else {
          acc -= jets.Gamma(m, a, k) * tm;
        }
      }
      src[p] = a;
    }
    out.data[f] = std::move(acc);
  }
  return out;
}

FieldTensor contract_last_with_y(const FieldTensor& t, const LocalJets& jets) {
  const int n = jets.dim();
  const int r = t.rank();
  if (r == 0) throw PreconditionError("cannot contract a scalar with y");
  FieldTensor out{std::vector<Slot>(t.slots.begin(), t.slots.end() - 1), Tensor<Jet>(n, r - 1)};
  for (std::size_t f = 0; f < out.data.size(); ++f) {
    const std::size_t base = f * static_cast<std::size_t>(n);
    Jet acc = t.data[base] * jets.y(0);
    for (int k = 1; k < n; ++k) acc += t.data[base + k] * jets.y(k);
    out.data[f] = std::move(acc);
  }
  return out;
}

FieldTensor vertical_derivative(const FieldTensor& t, const LocalJets& jets) {
  const int n = jets.dim();
  FieldTensor out{t.slots, Tensor<Jet>(n, t.rank() + 1)};
  out.slots.push_back(Slot::lower);
  for (std::size_t f = 0; f < out.data.size(); ++f) {
    out.data[f] = jets.dy(t.data[f / n], static_cast<int>(f % n));
  }
  return out;
}

RealTensor horizontal_derivative(const FieldFunction& field, const MetricField& m,
                                 const TangentPoint& p, int k, int extra_order) {
  const int n = m.dimension();
  if (k < 0 || k >= n) throw PreconditionError("direction index out of range");
  // One x- or y-derivative on top of the field, and Γ needs four orders.
  const int order = std::max(extra_order + 1, required_order::christoffel);
  LocalJets jets(m, p, order);
  const FieldTensor d = horizontal_derivative(field(jets), jets);
  const int r = d.rank() - 1;
  RealTensor out(n, r);
  for (std::size_t f = 0; f < out.size(); ++f) {
    out[f] = d.data[f * n + static_cast<std::size_t>(k)].value();
  }
  return out;
}

// Field builders -----------------------------------------------------------------

FieldTensor riemann_field(const LocalJets& jets) {
  const int n = jets.dim();
  FieldTensor t{{Slot::upper, Slot::lower}, Tensor<Jet>(n, 2)};
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) t.data(i, k) = jets.R(i, k);
  return t;
}

FieldTensor hh_field(const LocalJets& jets) {
  const int n = jets.dim();
  if (jets.order() < required_order::hh_curvature) {
    throw InsufficientOrder("hh-curvature needs jet order " +
                            std::to_string(required_order::hh_curvature));
  }
  Tensor<Jet> ry(n, 3);  // R^l_{i·m}
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int m = 0; m < n; ++m) ry(l, i, m) = jets.dy(jets.R(l, i), m);
  FieldTensor t{{Slot::lower, Slot::upper, Slot::lower, Slot::lower}, Tensor<Jet>(n, 4)};
  for (int m = 0; m < n; ++m) {
    for (int l = 0; l < n; ++l) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          t.data(m, l, i, j) =
              (jets.dy(ry(l, i, m), j) - jets.dy(ry(l, j, m), i)) * (1.0 / 3.0);
        }
      }
    }
  }
  return t;
}

FieldTensor hh3_field(const LocalJets& jets) {
  const int n = jets.dim();
  FieldTensor t{{Slot::upper, Slot::lower, Slot::lower}, Tensor<Jet>(n, 3)};
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        t.data(l, i, j) = (jets.dy(jets.R(l, i), j) - jets.dy(jets.R(l, j), i)) * (1.0 / 3.0);
  return t;
}

FieldTensor berwald_field(const LocalJets& jets) {
  const int n = jets.dim();
  if (jets.order() < required_order::berwald) {
    throw InsufficientOrder("Berwald curvature needs jet order " +
                            std::to_string(required_order::berwald));
  }
  FieldTensor t{{Slot::upper, Slot::lower, Slot::lower, Slot::lower}, Tensor<Jet>(n, 4)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k)
        for (int l = k; l < n; ++l) {
          const Jet b = jets.dy(jets.Gamma(i, j, k), l);
          t.data(i, j, k, l) = b;
          t.data(i, j, l, k) = b;
          t.data(i, k, j, l) = b;
          t.data(i, k, l, j) = b;
          t.data(i, l, j, k) = b;
          t.data(i, l, k, j) = b;
        }
  return t;
}

FieldTensor cartan_field(const LocalJets& jets) {
  const int n = jets.dim();
  FieldTensor t{{Slot::lower, Slot::lower, Slot::lower}, Tensor<Jet>(n, 3)};
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int k = j; k < n; ++k) {
        const Jet c = 0.5 * jets.dy(jets.g(i, j), k);
        t.data(i, j, k) = c;
        t.data(i, k, j) = c;
        t.data(j, i, k) = c;
        t.data(j, k, i) = c;
        t.data(k, i, j) = c;
        t.data(k, j, i) = c;
      }
  return t;
}

namespace {

// g^{ij} T_ijk.
FieldTensor trace_with_ginv(const FieldTensor& t, const LocalJets& jets) {
  const int n = jets.dim();
  FieldTensor out{{Slot::lower}, Tensor<Jet>(n, 1)};
  for (int k = 0; k < n; ++k) {
    Jet acc = jets.ginv(0, 0) * t.data(0, 0, k);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == 0 && j == 0) continue;
        acc += jets.ginv(i, j) * t.data(i, j, k);
      }
    out.data(k) = std::move(acc);
  }
  return out;
}

}  // namespace

FieldTensor mean_cartan_field(const LocalJets& jets) {
  return trace_with_ginv(cartan_field(jets), jets);
}

FieldTensor landsberg_field(const LocalJets& jets) {
  const int n = jets.dim();
  const FieldTensor b = berwald_field(jets);
  // y_l = g_ml y^m
  std::vector<Jet> ylow;
  for (int l = 0; l < n; ++l) {
    std::vector<Jet> col;
    for (int m = 0; m < n; ++m) col.push_back(jets.g(m, l));
    ylow.push_back(jets.contract_y(col));
  }
  FieldTensor t{{Slot::lower, Slot::lower, Slot::lower}, Tensor<Jet>(n, 3)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Jet acc = ylow[0] * b.data(0, i, j, k);
        for (int l = 1; l < n; ++l) acc += ylow[l] * b.data(l, i, j, k);
        t.data(i, j, k) = -0.5 * acc;
      }
  return t;
}

FieldTensor mean_landsberg_field(const LocalJets& jets) {
  return trace_with_ginv(landsberg_field(jets), jets);
}

Jet projective_factor(const LocalJets& jets) {
  const int n = jets.dim();
  std::vector<Jet> fx;
  for (int k = 0; k < n; ++k) fx.push_back(jets.dx(jets.F(), k));
  return jets.contract_y(fx) / (2.0 * jets.F());
}

// Real-valued operations ---------------------------------------------------------

FundamentalTensor fundamental_tensor(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, required_order::fundamental);
  const int n = jets.dim();
  FundamentalTensor out{RealTensor(n, 2), RealTensor(n, 2)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      out.g(i, j) = jets.g(i, j).value();
      out.g_inv(i, j) = jets.ginv(i, j).value();
    }
  return out;
}

Spray spray(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, required_order::christoffel);
  const int n = jets.dim();
  Spray s{std::vector<double>(n), RealTensor(n, 2), RealTensor(n, 3)};
  for (int i = 0; i < n; ++i) {
    s.G[i] = jets.G(i).value();
    for (int j = 0; j < n; ++j) {
      s.N(i, j) = jets.N(i, j).value();
      for (int k = 0; k < n; ++k) s.christoffel(i, j, k) = jets.Gamma(i, j, k).value();
    }
  }
  return s;
}

RealTensor riemann_curvature(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, required_order::riemann);
  return riemann_field(jets).values();
}

double flag_curvature(const MetricField& m, const TangentPoint& p, std::span<const double> u) {
  LocalJets jets(m, p, required_order::riemann);
  const int n = jets.dim();
  if (static_cast<int>(u.size()) != n) throw PreconditionError("u does not match the dimension");
  double num = 0.0, uu = 0.0, yu = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double gij = jets.g(i, j).value();
      uu += gij * u[i] * u[j];
      yu += gij * p.y[i] * u[j];
    }
  }
  for (int i = 0; i < n; ++i)
    for (int mm = 0; mm < n; ++mm) {
      double ru = 0.0;
      for (int k = 0; k < n; ++k) ru += jets.R(i, k).value() * u[k];
      num += jets.g(i, mm).value() * ru * u[mm];
    }
  const double f2 = jets.F2().value();
  const double gram = f2 * uu - yu * yu;
  if (!(gram >= 1e-12 * f2 * uu)) {
    throw PreconditionError("degenerate flag: u is (nearly) parallel to y");
  }
  return num / gram;
}

ScalarFlagFit scalar_flag_fit(const LocalJets& jets) {
  const int n = jets.dim();
  const double K = jets.K().value();
  const double F = jets.F().value();
  double res = 0.0, scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double r = jets.R(i, k).value();
      const double model =
          K * ((i == k ? F * F : 0.0) - F * jets.Fy(k).value() * jets.point().y[i]);
      res = std::max(res, std::abs(r - model));
      scale = std::max(scale, std::abs(r));
    }
  return {K, res / std::max(scale, 1e-10)};
}

ScalarFlagFit scalar_flag_fit(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, required_order::riemann);
  return scalar_flag_fit(jets);
}

Cartan cartan(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, 3);
  const FieldTensor c = cartan_field(jets);
  const FieldTensor I = trace_with_ginv(c, jets);
  const RealTensor iv = I.values();
  return {c.values(), std::vector<double>(iv.flat().begin(), iv.flat().end())};
}

BerwaldLandsberg berwald_landsberg(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, required_order::berwald);
  const FieldTensor L = landsberg_field(jets);
  const RealTensor jv = trace_with_ginv(L, jets).values();
  return {berwald_field(jets).values(), L.values(),
          std::vector<double>(jv.flat().begin(), jv.flat().end())};
}

HHCurvature hh_curvature(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, required_order::hh_curvature);
  return {hh_field(jets).values(), hh3_field(jets).values()};
}

RealTensor hamel_residual(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, 2);
  const int n = jets.dim();
  RealTensor out(n, 2);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      out(l, k) = jets.dx(jets.Fy(k), l).value() - jets.dx(jets.Fy(l), k).value();
  return out;
}

Projective projective(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, 2);
  const int n = jets.dim();
  const Jet P = projective_factor(jets);
  std::vector<Jet> px;
  for (int k = 0; k < n; ++k) px.push_back(jets.dx(P, k));
  const Jet K = (P * P - jets.contract_y(px)) / jets.F2();
  return {P.value(), K.value(), max_abs(hamel_residual(m, p))};
}

CurvatureBundle curvature_bundle(const MetricField& m, const TangentPoint& p) {
  LocalJets jets(m, p, required_order::berwald);
  const int n = jets.dim();
  CurvatureBundle b;
  b.F = jets.F().value();
  b.g = RealTensor(n, 2);
  b.g_inv = RealTensor(n, 2);
  b.connection_N = RealTensor(n, 2);
  b.christoffel = RealTensor(n, 3);
  b.angular = RealTensor(n, 2);
  b.angular_mixed = RealTensor(n, 2);
  for (int i = 0; i < n; ++i) {
    b.spray.push_back(jets.G(i).value());
    for (int j = 0; j < n; ++j) {
      b.g(i, j) = jets.g(i, j).value();
      b.g_inv(i, j) = jets.ginv(i, j).value();
      b.connection_N(i, j) = jets.N(i, j).value();
      b.angular(i, j) = b.g(i, j) - jets.Fy(i).value() * jets.Fy(j).value();
      b.angular_mixed(i, j) = (i == j ? 1.0 : 0.0) - jets.Fy(j).value() * p.y[i] / b.F;
      for (int k = 0; k < n; ++k) b.christoffel(i, j, k) = jets.Gamma(i, j, k).value();
    }
  }
  b.riemann = riemann_field(jets).values();
  const FieldTensor c = cartan_field(jets);
  b.cartan = c.values();
  const RealTensor iv = trace_with_ginv(c, jets).values();
  b.mean_cartan.assign(iv.flat().begin(), iv.flat().end());
  b.berwald = berwald_field(jets).values();
  const FieldTensor L = landsberg_field(jets);
  b.landsberg = L.values();
  const RealTensor jv = trace_with_ginv(L, jets).values();
  b.mean_landsberg.assign(jv.flat().begin(), jv.flat().end());
  return b;
}

}  // namespace finsler
