#include "finsler/identities.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "finsler/detect.hpp"
#include "finsler/error.hpp"

namespace finsler {

std::string applicability_name(Applicability a) {
  switch (a) {
    case Applicability::any_metric: return "any_metric";
    case Applicability::scalar_flag_only: return "scalar_flag_only";
    case Applicability::weakly_isotropic_only: return "weakly_isotropic_only";
    case Applicability::projectively_flat_only: return "projectively_flat_only";
  }
  return "unknown";
}

std::string isotropy_source_name(IsotropySource s) {
  switch (s) {
    case IsotropySource::automatic: return "automatic";
    case IsotropySource::predicted: return "predicted";
    case IsotropySource::fitted: return "fitted";
  }
  return "unknown";
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::skipped: return "skipped";
  }
  return "unknown";
}

void ResidualAccumulator::add(std::initializer_list<double> terms) {
  double sum = 0.0;
  for (double t : terms) {
    sum += t;
    scale_ = std::max(scale_, std::abs(t));
  }
  value_ = std::max(value_, std::abs(sum));
}

void ResidualAccumulator::add_sum(double sum, double scale) {
  value_ = std::max(value_, std::abs(sum));
  scale_ = std::max(scale_, std::abs(scale));
}

// CheckContext -----------------------------------------------------------------

CheckContext::CheckContext(const MetricField& m, const SampleGroup& group, int order,
                           const MetricFamilySpec* spec, IsotropySource source,
                           std::uint64_t seed)
    : metric_(&m),
      group_(&group),
      n_(m.dimension()),
      order_(order),
      spec_(spec),
      source_(source),
      seed_(seed),
      jets_(group.ys.size()) {}

const LocalJets& CheckContext::jets(int k) const {
  if (!jets_[k]) jets_[k] = std::make_unique<LocalJets>(*metric_, TangentPoint{group_->x, group_->ys[k]}, order_);
  return *jets_[k];
}

void CheckContext::ensure_isotropy() const {
  if (sigma_) return;
  IsotropySource src = source_;
  const bool predictable = spec_ != nullptr && spec_->dimension == n_ && has_predicted_invariants(*spec_);
  if (src == IsotropySource::automatic) src = predictable ? IsotropySource::predicted : IsotropySource::fitted;
  if (src == IsotropySource::predicted) {
    if (!predictable) throw PreconditionError("no closed-form σ, θ for this metric");
    Invariants<Jet> inv = predicted_invariants(*spec_, jets(0).xs());
    sigma_ = inv.sigma;
    theta_ = std::move(inv.theta);
  } else {
    if (order_ < required_order::riemann) throw InsufficientOrder("fitted σ, θ need jet order ≥ 4");
    std::vector<std::vector<double>> dirs;
    for (auto& d : spiral_directions(n_, default_fit_directions(n_), seed_)) {
      dirs.push_back(normalize_direction(*metric_, group_->x, std::move(d)));
    }
    WeaklyIsotropicJets fit = weakly_isotropic_jets(*metric_, group_->x, order_, dirs);
    sigma_ = fit.sigma;
    theta_ = std::move(fit.theta);
  }
  used_ = src;

  double err = 0.0, scale = 0.0;
  for (int k = 0; k < size(); ++k) {
    const LocalJets& j = jets(k);
    double th = 0.0;
    for (int i = 0; i < n_; ++i) th += theta_[i].value() * group_->ys[k][i];
    const double kv = j.K().value();
    err = std::max(err, std::abs(kv - 3.0 * th / j.F().value() - sigma_->value()));
    scale = std::max(scale, std::abs(kv));
  }
  iso_residual_ = err / std::max(scale, kResidualFloor);
}

const Jet& CheckContext::sigma() const {
  ensure_isotropy();
  return *sigma_;
}

const std::vector<Jet>& CheckContext::theta() const {
  ensure_isotropy();
  return theta_;
}

double CheckContext::isotropy_residual() const {
  ensure_isotropy();
  return iso_residual_;
}

IsotropySource CheckContext::isotropy_source() const {
  ensure_isotropy();
  return used_;
}

// Checks -------------------------------------------------------------------------

namespace {

using Residuals = std::vector<Residual>;

double delta(int a, int b) { return a == b ? 1.0 : 0.0; }

Jet scalar_h0(const Jet& t, const LocalJets& j) {
  return contract_last_with_y(horizontal_derivative(scalar_field(t, j.dim()), j), j).data[0];
}

FieldTensor scalar_h(const Jet& t, const LocalJets& j) {
  return horizontal_derivative(scalar_field(t, j.dim()), j);
}

// Per-point evaluation for checks that need nothing beyond the local jets.
template <class Fn>
std::function<Residuals(const CheckContext&)> pointwise(Fn fn) {
  return [fn](const CheckContext& ctx) {
    Residuals out;
    for (int k = 0; k < ctx.size(); ++k) {
      ResidualAccumulator acc;
      fn(ctx, k, ctx.jets(k), acc);
      out.push_back(acc.result());
    }
    return out;
  };
}

// Weak-isotropy helpers on one tangent point.
struct Iso {
  Jet sigma, theta, sigma0, theta0;
  std::vector<Jet> sigma_x;
};

Iso iso_at(const CheckContext& ctx, const LocalJets& j) {
  const int n = j.dim();
  Iso s;
  s.sigma = ctx.sigma();
  s.theta = j.contract_y(ctx.theta());
  for (int m = 0; m < n; ++m) s.sigma_x.push_back(j.dx(s.sigma, m));
  s.sigma0 = j.contract_y(s.sigma_x);
  s.theta0 = scalar_h0(s.theta, j);
  return s;
}

// f(x) with f F² = σ_{|0}F + θ_{|0}, fitted over the context's tangent points.
Jet fit_f(const CheckContext& ctx) {
  const int n = ctx.dim();
  std::vector<Jet> a, b;
  for (int k = 0; k < ctx.size(); ++k) {
    const LocalJets& j = ctx.jets(k);
    const Iso s = iso_at(ctx, j);
    a.push_back(freeze_variables(j.F2(), n, n));
    b.push_back(freeze_variables(s.sigma0 * j.F() + s.theta0, n, n));
  }
  return jet_least_squares(a, b)[0];
}

double fit_scalar(const std::vector<double>& rows, const std::vector<double>& rhs) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    num += rows[k] * rhs[k];
    den += rows[k] * rows[k];
  }
  if (den == 0.0) throw PreconditionError("rank-deficient scalar fit");
  return num / den;
}

// h(x) with ½σ_{|0|0} = hF² + 2(f_{|0} + σθ)F + 3θ², and the pieces.
struct HFit {
  double h = 0.0;
  std::vector<double> half_s00, eta, xi_theta2, F;
};

HFit fit_h(const CheckContext& ctx) {
  const Jet f = fit_f(ctx);
  const int n = ctx.dim();
  HFit out;
  std::vector<double> rows, rhs;
  for (int k = 0; k < ctx.size(); ++k) {
    const LocalJets& j = ctx.jets(k);
    const Iso s = iso_at(ctx, j);
    std::vector<Jet> fx;
    for (int m = 0; m < n; ++m) fx.push_back(j.dx(f, m));
    const double f0 = j.contract_y(fx).value();
    const double s00 = scalar_h0(s.sigma0, j).value();
    const double fv = j.F().value();
    const double eta = 2.0 * (f0 + s.sigma.value() * s.theta.value());
    const double th2 = 3.0 * s.theta.value() * s.theta.value();
    out.half_s00.push_back(0.5 * s00);
    out.eta.push_back(eta);
    out.xi_theta2.push_back(th2);
    out.F.push_back(fv);
    rows.push_back(fv * fv);
    rhs.push_back(0.5 * s00 - eta * fv - th2);
  }
  out.h = fit_scalar(rows, rhs);
  return out;
}

// a(x) with aF² − σ_{x^l}y^l F + 2θP − θ_{x^l}y^l = 0, as an x-jet.
Jet fit_a(const CheckContext& ctx) {
  const int n = ctx.dim();
  std::vector<Jet> a, b;
  for (int k = 0; k < ctx.size(); ++k) {
    const LocalJets& j = ctx.jets(k);
    const Iso s = iso_at(ctx, j);
    std::vector<Jet> tx;
    for (int l = 0; l < n; ++l) tx.push_back(j.dx(s.theta, l));
    const Jet thx0 = j.contract_y(tx);
    a.push_back(freeze_variables(j.F2(), n, n));
    b.push_back(freeze_variables(s.sigma0 * j.F() - 2.0 * s.theta * projective_factor(j) + thx0, n, n));
  }
  return jet_least_squares(a, b)[0];
}

std::vector<IdentityCheck> build_registry() {
  std::vector<IdentityCheck> r;
  auto add = [&](IdentityCheck c) { r.push_back(std::move(c)); };

  add({"bianchi_from_berwald", "R_i^l_{mk·j} = B^l_{ijk|m} − B^l_{ijm|k}", 7,
       Applicability::any_metric, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const FieldTensor R4 = hh_field(J);
         const FieldTensor HB = horizontal_derivative(berwald_field(J), J);
         for (int i = 0; i < n; ++i)
           for (int l = 0; l < n; ++l)
             for (int m = 0; m < n; ++m)
               for (int k = 0; k < n; ++k)
                 for (int jj = 0; jj < n; ++jj)
                   acc.add({J.dy(R4.data(i, l, m, k), jj).value(), -HB.data(l, i, jj, k, m).value(),
                            HB.data(l, i, jj, m, k).value()});
       })});

  auto cyclic = [](bool full, bool trace) {
    return pointwise([full, trace](const CheckContext& ctx, int, const LocalJets& J,
                                   ResidualAccumulator& acc) {
      const int n = ctx.dim();
      const FieldTensor R4 = hh_field(J);
      const FieldTensor HR4 = horizontal_derivative(R4, J);
      FieldTensor B, R3;
      if (full) {
        B = berwald_field(J);
        R3 = hh3_field(J);
      }
      auto term = [&](int m, int l, int i, int j, int k) {
        double v = HR4.data(m, l, i, j, k).value();
        if (full)
          for (int u = 0; u < n; ++u) v += B.data(l, m, k, u).value() * R3.data(u, i, j).value();
        return v;
      };
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            if (trace) {
              double a = 0, b = 0, c = 0;
              for (int m = 0; m < n; ++m) {
                a += term(m, m, i, j, k);
                b += term(m, m, j, k, i);
                c += term(m, m, k, i, j);
              }
              acc.add({a, b, c});
            } else {
              for (int m = 0; m < n; ++m)
                for (int l = 0; l < n; ++l)
                  acc.add({term(m, l, i, j, k), term(m, l, j, k, i), term(m, l, k, i, j)});
            }
          }
    });
  };

  add({"bianchi_cyclic", "R_m^l_{ij|k} + R_m^l_{jk|i} + R_m^l_{ki|j} = 0", 7,
       Applicability::scalar_flag_only, 2, false, false, nullptr, cyclic(false, false)});
  add({"bianchi_cyclic_full",
       "R_m^l_{ij|k} + B^l_{mku} R^u_{ij} + cyclic(i, j, k) = 0", 7, Applicability::any_metric,
       2, false, false, nullptr, cyclic(true, false)});

  add({"bianchi_contracted", "R^l_{i|k} − R^l_{k|i} + R^l_{ki|0} = 0", 6,
       Applicability::any_metric, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const FieldTensor HR = horizontal_derivative(riemann_field(J), J);
         const FieldTensor HR3 = contract_last_with_y(horizontal_derivative(hh3_field(J), J), J);
         for (int l = 0; l < n; ++l)
           for (int i = 0; i < n; ++i)
             for (int k = 0; k < n; ++k)
               acc.add({HR.data(l, i, k).value(), -HR.data(l, k, i).value(),
                        HR3.data(l, k, i).value()});
       })});

  add({"bianchi_trace_lm", "R_m^m_{ij|k} + R_m^m_{jk|i} + R_m^m_{ki|j} = 0", 7,
       Applicability::scalar_flag_only, 2, false, false, nullptr, cyclic(false, true)});

  add({"bianchi_trace_li", "R^m_{m|k} − R^m_{k|m} + R^m_{km|0} = 0", 6,
       Applicability::any_metric, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const FieldTensor HR = horizontal_derivative(riemann_field(J), J);
         const FieldTensor HR3 = contract_last_with_y(horizontal_derivative(hh3_field(J), J), J);
         for (int k = 0; k < n; ++k) {
           double a = 0, b = 0, c = 0;
           for (int m = 0; m < n; ++m) {
             a += HR.data(m, m, k).value();
             b -= HR.data(m, k, m).value();
             c += HR3.data(m, k, m).value();
           }
           acc.add({a, b, c});
         }
       })});

  add({"scalar_flag_R", "R^i_k = K F² h^i_k", 4, Applicability::any_metric, 2, false, false,
       nullptr,
       pointwise([](const CheckContext& ctx, int k, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const double F = J.F().value(), K = J.K().value();
         const auto& y = ctx.y(k);
         for (int i = 0; i < n; ++i)
           for (int c = 0; c < n; ++c) {
             const double h = delta(i, c) - J.Fy(c).value() * y[i] / F;
             acc.add({J.R(i, c).value(), -K * F * F * h});
           }
       })});

  add({"scalar_flag_R3",
       "R^m_ij = ⅓F²(K_{·j}h^m_i − K_{·i}h^m_j) − KF(F_{·i}δ^m_j − F_{·j}δ^m_i)", 5,
       Applicability::scalar_flag_only, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int k, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const double F = J.F().value(), K = J.K().value();
         const auto& y = ctx.y(k);
         const FieldTensor R3 = hh3_field(J);
         std::vector<double> Kv(n), Fv(n);
         for (int i = 0; i < n; ++i) {
           Kv[i] = J.dy(J.K(), i).value();
           Fv[i] = J.Fy(i).value();
         }
         auto h = [&](int m, int i) { return delta(m, i) - Fv[i] * y[m] / F; };
         for (int m = 0; m < n; ++m)
           for (int i = 0; i < n; ++i)
             for (int j = 0; j < n; ++j)
               acc.add({R3.data(m, i, j).value(), -F * F / 3.0 * Kv[j] * h(m, i),
                        F * F / 3.0 * Kv[i] * h(m, j), K * F * Fv[i] * delta(m, j),
                        -K * F * Fv[j] * delta(m, i)});
       })});

  add({"scalar_flag_R4", "R_j^i_kl in terms of K, its y-derivatives, g, F and h", 6,
       Applicability::scalar_flag_only, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int k, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const double F = J.F().value(), K = J.K().value();
         const auto& y = ctx.y(k);
         const FieldTensor R4 = hh_field(J);
         std::vector<double> Kv(n), Fv(n);
         RealTensor Kvv(n, 2), g(n, 2);
         for (int a = 0; a < n; ++a) {
           Kv[a] = J.dy(J.K(), a).value();
           Fv[a] = J.Fy(a).value();
           for (int b = 0; b < n; ++b) {
             Kvv(a, b) = J.dy(J.dy(J.K(), a), b).value();
             g(a, b) = J.g(a, b).value();
           }
         }
         auto h = [&](int i, int c) { return delta(i, c) - Fv[c] * y[i] / F; };
         for (int j = 0; j < n; ++j)
           for (int i = 0; i < n; ++i)
             for (int c = 0; c < n; ++c)
               for (int l = 0; l < n; ++l)
                 acc.add({R4.data(j, i, c, l).value(),
                          -K * (g(j, l) * delta(i, c) - g(j, c) * delta(i, l)),
                          -F * F / 3.0 * (Kvv(j, l) * h(i, c) - Kvv(j, c) * h(i, l)),
                          -Kv[j] * F * (Fv[l] * delta(i, c) - Fv[c] * delta(i, l)),
                          -Kv[l] / 3.0 * (2 * F * Fv[j] * delta(i, c) - F * Fv[c] * delta(i, j) - g(j, c) * y[i]),
                          Kv[c] / 3.0 * (2 * F * Fv[j] * delta(i, l) - F * Fv[l] * delta(i, j) - g(j, l) * y[i])});
       })});

  add({"scalar_flag_trace", "R_m^m_ij = (n + 1)/3 · F (K_{·i}F_{·j} − K_{·j}F_{·i})", 6,
       Applicability::scalar_flag_only, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const double F = J.F().value();
         const FieldTensor R4 = hh_field(J);
         for (int i = 0; i < n; ++i)
           for (int j = 0; j < n; ++j) {
             double tr = 0.0;
             for (int m = 0; m < n; ++m) tr += R4.data(m, m, i, j).value();
             const double rhs = (n + 1) / 3.0 * F *
                                (J.dy(J.K(), i).value() * J.Fy(j).value() -
                                 J.dy(J.K(), j).value() * J.Fy(i).value());
             acc.add({tr, -rhs});
           }
       })});

  add({"lemma31_Kijk",
       "(K_{·j|i} − K_{·i|j})F_{·k} + (K_{·i|k} − K_{·k|i})F_{·j} + (K_{·k|j} − K_{·j|k})F_{·i} = 0",
       6, Applicability::scalar_flag_only, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const FieldTensor Kvh =
             horizontal_derivative(vertical_derivative(scalar_field(J.K(), n), J), J);
         auto d = [&](int a, int b) { return Kvh.data(a, b).value(); };
         for (int i = 0; i < n; ++i)
           for (int j = 0; j < n; ++j)
             for (int k = 0; k < n; ++k)
               acc.add({(d(j, i) - d(i, j)) * J.Fy(k).value(), (d(i, k) - d(k, i)) * J.Fy(j).value(),
                        (d(k, j) - d(j, k)) * J.Fy(i).value()});
       })});

  add({"lemma32_Kk", "F K_{|k} − F_{·k} K_{|0} − ⅓F K_{·k|0} = 0", 6,
       Applicability::scalar_flag_only, 3, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const FieldTensor K = scalar_field(J.K(), n);
         const FieldTensor Kh = horizontal_derivative(K, J);
         const double K0 = contract_last_with_y(Kh, J).data[0].value();
         const FieldTensor Kv0 =
             contract_last_with_y(horizontal_derivative(vertical_derivative(K, J), J), J);
         const double F = J.F().value();
         for (int k = 0; k < n; ++k)
           acc.add({F * Kh.data(k).value(), -J.Fy(k).value() * K0, -F * Kv0.data(k).value() / 3.0});
       })});

  add({"lemma32_Kk_quotient", "[K_{|0}/F]_{·k} = (4/3) K_{·k|0}/F", 6,
       Applicability::scalar_flag_only, 3, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const FieldTensor K = scalar_field(J.K(), n);
         const Jet q = scalar_h0(J.K(), J) / J.F();
         const FieldTensor Kv0 =
             contract_last_with_y(horizontal_derivative(vertical_derivative(K, J), J), J);
         const double F = J.F().value();
         for (int k = 0; k < n; ++k)
           acc.add({J.dy(q, k).value(), -4.0 / 3.0 * Kv0.data(k).value() / F});
       })});

  add({"theta_closed", "θ_{j x^i} = θ_{i x^j}", 5, Applicability::weakly_isotropic_only, 3, true,
       false, nullptr,
       [](const CheckContext& ctx) {
         const int n = ctx.dim();
         const LocalJets& J = ctx.jets(0);
         ResidualAccumulator acc;
         for (int i = 0; i < n; ++i)
           for (int j = 0; j < n; ++j)
             acc.add({J.dx(ctx.theta()[j], i).value(), -J.dx(ctx.theta()[i], j).value()});
         return Residuals(ctx.size(), acc.result());
       }});

  add({"f_existence", "f F² − σ_{|0}F − θ_{|0} = 0 with f = f(x)", 5,
       Applicability::weakly_isotropic_only, 3, true, true, nullptr,
       [](const CheckContext& ctx) {
         const double f = fit_f(ctx).value();
         Residuals out;
         for (int k = 0; k < ctx.size(); ++k) {
           const LocalJets& J = ctx.jets(k);
           const Iso s = iso_at(ctx, J);
           ResidualAccumulator acc;
           acc.add({f * J.F2().value(), -s.sigma0.value() * J.F().value(), -s.theta0.value()});
           out.push_back(acc.result());
         }
         return out;
       }});

  add({"f_gradient", "θ_{|i} = f F F_{·i} − ½σ_{|i}F − ½σ_{|0}F_{·i}", 5,
       Applicability::weakly_isotropic_only, 3, true, false, nullptr,
       [](const CheckContext& ctx) {
         const int n = ctx.dim();
         const double f = fit_f(ctx).value();
         Residuals out;
         for (int k = 0; k < ctx.size(); ++k) {
           const LocalJets& J = ctx.jets(k);
           const Iso s = iso_at(ctx, J);
           const FieldTensor th = scalar_h(s.theta, J);
           const double F = J.F().value();
           ResidualAccumulator acc;
           for (int i = 0; i < n; ++i)
             acc.add({th.data(i).value(), -f * F * J.Fy(i).value(), 0.5 * s.sigma_x[i].value() * F,
                      0.5 * s.sigma0.value() * J.Fy(i).value()});
           out.push_back(acc.result());
         }
         return out;
       }});

  add({"f_hessian", "θ_{|i|j} = f_{|j} F F_{·i} − ½σ_{|i|j}F − ½σ_{|0|j}F_{·i}", 6,
       Applicability::weakly_isotropic_only, 3, true, false, nullptr,
       [](const CheckContext& ctx) {
         const int n = ctx.dim();
         const Jet f = fit_f(ctx);
         Residuals out;
         for (int k = 0; k < ctx.size(); ++k) {
           const LocalJets& J = ctx.jets(k);
           const Iso s = iso_at(ctx, J);
           const FieldTensor thh = horizontal_derivative(scalar_h(s.theta, J), J);
           const FieldTensor shh = horizontal_derivative(scalar_h(s.sigma, J), J);
           const FieldTensor s0h = scalar_h(s.sigma0, J);
           const double F = J.F().value();
           ResidualAccumulator acc;
           for (int i = 0; i < n; ++i)
             for (int j = 0; j < n; ++j)
               acc.add({thh.data(i, j).value(), -J.dx(f, j).value() * F * J.Fy(i).value(),
                        0.5 * shh.data(i, j).value() * F, 0.5 * s0h.data(j).value() * J.Fy(i).value()});
           out.push_back(acc.result());
         }
         return out;
       }});

  add({"h_existence", "½σ_{|0|0} = hF² + 2(f_{|0} + σθ)F + 3θ² with h = h(x)", 6,
       Applicability::weakly_isotropic_only, 3, true, false, nullptr,
       [](const CheckContext& ctx) {
         const HFit h = fit_h(ctx);
         Residuals out;
         for (int k = 0; k < ctx.size(); ++k) {
           ResidualAccumulator acc;
           acc.add({h.half_s00[k], -h.h * h.F[k] * h.F[k], -h.eta[k] * h.F[k], -h.xi_theta2[k]});
           out.push_back(acc.result());
         }
         return out;
       }});

  add({"lambda_proportionality", "θ_i = λ σ_{|i} with λ = λ(x)", 5,
       Applicability::weakly_isotropic_only, 3, true, true,
       [](const CheckContext& ctx) -> std::optional<std::string> {
         double s = 0.0;
         for (int i = 0; i < ctx.dim(); ++i) s = std::max(s, std::abs(ctx.jets(0).dx(ctx.sigma(), i).value()));
         if (s < 1e-10) return "σ_{|0} = 0: the proportionality is not asserted";
         return std::nullopt;
       },
       [](const CheckContext& ctx) {
         const int n = ctx.dim();
         const LocalJets& J = ctx.jets(0);
         std::vector<double> sx(n), th(n);
         for (int i = 0; i < n; ++i) {
           sx[i] = J.dx(ctx.sigma(), i).value();
           th[i] = ctx.theta()[i].value();
         }
         const double lambda = fit_scalar(sx, th);
         ResidualAccumulator acc;
         for (int i = 0; i < n; ++i) acc.add({th[i], -lambda * sx[i]});
         return Residuals(ctx.size(), acc.result());
       }});

  add({"ricci_oneform", "θ_{|i|j} − θ_{|j|i} = θ_m R^m_ij = F K (θ_i F_{·j} − θ_j F_{·i})", 6,
       Applicability::weakly_isotropic_only, 2, true, false, nullptr,
       [](const CheckContext& ctx) {
         const int n = ctx.dim();
         Residuals out;
         for (int k = 0; k < ctx.size(); ++k) {
           const LocalJets& J = ctx.jets(k);
           const Iso s = iso_at(ctx, J);
           const FieldTensor thh = horizontal_derivative(scalar_h(s.theta, J), J);
           const FieldTensor R3 = hh3_field(J);
           const double F = J.F().value(), K = J.K().value();
           ResidualAccumulator acc;
           for (int i = 0; i < n; ++i)
             for (int j = 0; j < n; ++j) {
               double tr = 0.0;
               for (int m = 0; m < n; ++m) tr += ctx.theta()[m].value() * R3.data(m, i, j).value();
               const double fk = F * K *
                                 (ctx.theta()[i].value() * J.Fy(j).value() -
                                  ctx.theta()[j].value() * J.Fy(i).value());
               acc.add({thh.data(i, j).value(), -thh.data(j, i).value(), -tr});
               acc.add({tr, -fk});
             }
           out.push_back(acc.result());
         }
         return out;
       }});

  add({"randers_root",
       "F = (−η + √(η² − 4hξ))/(2h) with η = 2(f_{|0} + σθ), ξ = 3θ² − ½σ_{|0|0}", 6,
       Applicability::weakly_isotropic_only, 3, true, false,
       [](const CheckContext& ctx) -> std::optional<std::string> {
         if (std::abs(fit_h(ctx).h) < 1e-10) return "h = 0: the quadratic in F degenerates";
         return std::nullopt;
       },
       [](const CheckContext& ctx) {
         const HFit h = fit_h(ctx);
         Residuals out;
         for (int k = 0; k < ctx.size(); ++k) {
           double root;
           try {
             // The + branch is the positive root once the equation is scaled to h > 0.
             const double sg = h.h > 0.0 ? 1.0 : -1.0;
             root = quadratic_root(sg * h.h, sg * h.eta[k], sg * (h.xi_theta2[k] - h.half_s00[k]));
           } catch (const DomainError&) {
             root = std::numeric_limits<double>::infinity();
           }
           ResidualAccumulator acc;
           acc.add({root, -h.F[k]});
           out.push_back(acc.result());
         }
         return out;
       }});

  add({"CL_relation", "C_{ijk|0} = L_ijk and J_k = I_{k|0}", 5, Applicability::any_metric, 2,
       false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const FieldTensor C0 = contract_last_with_y(horizontal_derivative(cartan_field(J), J), J);
         const FieldTensor L = landsberg_field(J);
         const FieldTensor I0 = contract_last_with_y(horizontal_derivative(mean_cartan_field(J), J), J);
         const FieldTensor Jm = mean_landsberg_field(J);
         for (int i = 0; i < n; ++i) {
           acc.add({Jm.data(i).value(), -I0.data(i).value()});
           for (int j = 0; j < n; ++j)
             for (int k = 0; k < n; ++k) acc.add({C0.data(i, j, k).value(), -L.data(i, j, k).value()});
         }
       })});

  add({"Jk0_formula", "J_{k|0} = −⅓F²{(n + 1)K_{·k} + 3K I_k}", 6,
       Applicability::scalar_flag_only, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const FieldTensor J0 = contract_last_with_y(horizontal_derivative(mean_landsberg_field(J), J), J);
         const FieldTensor I = mean_cartan_field(J);
         const double F = J.F().value(), K = J.K().value();
         for (int k = 0; k < n; ++k)
           acc.add({J0.data(k).value(), F * F / 3.0 * (n + 1) * J.dy(J.K(), k).value(),
                    F * F * K * I.data(k).value()});
       })});

  add({"hamel", "F_{x^l y^k} = F_{x^k y^l}", 2, Applicability::projectively_flat_only, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         for (int l = 0; l < n; ++l)
           for (int k = 0; k < n; ++k)
             acc.add({J.dy(J.dx(J.F(), l), k).value(), -J.dy(J.dx(J.F(), k), l).value()});
       })});

  add({"berwald_PF", "F_{x^k} = (P F)_{·k}", 2, Applicability::projectively_flat_only, 2, false,
       false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const Jet PF = projective_factor(J) * J.F();
         for (int k = 0; k < ctx.dim(); ++k) acc.add({J.dx(J.F(), k).value(), -J.dy(PF, k).value()});
       })});

  auto projective_K = [](const LocalJets& J) {
    const Jet P = projective_factor(J);
    std::vector<Jet> px;
    for (int m = 0; m < J.dim(); ++m) px.push_back(J.dx(P, m));
    return (P * P - J.contract_y(px)) / J.F2();
  };

  add({"berwald_PK", "P_{x^k} = P P_{·k} − (1/3F)(K F³)_{·k}", 3,
       Applicability::projectively_flat_only, 2, false, false, nullptr,
       pointwise([projective_K](const CheckContext& ctx, int, const LocalJets& J,
                                ResidualAccumulator& acc) {
         const Jet P = projective_factor(J);
         const Jet KF3 = projective_K(J) * J.F2() * J.F();
         const double F = J.F().value();
         for (int k = 0; k < ctx.dim(); ++k)
           acc.add({J.dx(P, k).value(), -P.value() * J.dy(P, k).value(), J.dy(KF3, k).value() / (3.0 * F)});
       })});

  add({"proj_flag_curvature", "(P² − P_{x^m}y^m)/F² equals the flag curvature", 4,
       Applicability::projectively_flat_only, 2, false, false, nullptr,
       pointwise([projective_K](const CheckContext&, int, const LocalJets& J, ResidualAccumulator& acc) {
         acc.add({projective_K(J).value(), -J.K().value()});
       })});

  add({"proj_K_identity", "projectively flat K: ⅓F(K_{·l}P_{·k} − K_{·k}P_{·l}) + … = 0", 6,
       Applicability::projectively_flat_only, 2, false, false, nullptr,
       pointwise([](const CheckContext& ctx, int, const LocalJets& J, ResidualAccumulator& acc) {
         const int n = ctx.dim();
         const Jet P = projective_factor(J);
         const Jet& K = J.K();
         const double F = J.F().value(), Pv = P.value();
         for (int k = 0; k < n; ++k)
           for (int l = 0; l < n; ++l) {
             const double Kl = J.dy(K, l).value(), Kk = J.dy(K, k).value();
             acc.add({F / 3.0 * (Kl * J.dy(P, k).value() - Kk * J.dy(P, l).value()),
                      Pv * (Kl * J.Fy(k).value() - Kk * J.Fy(l).value()),
                      J.dx(K, k).value() * J.Fy(l).value() - J.dx(K, l).value() * J.Fy(k).value(),
                      F / 3.0 * (J.dx(J.dy(K, l), k).value() - J.dx(J.dy(K, k), l).value())});
           }
       })});

  add({"proj_a_existence", "a F² − σ_{x^l}y^l F + 2θP − θ_{x^l}y^l = 0 with a = a(x)", 5,
       Applicability::projectively_flat_only, 2, true, false, nullptr,
       [](const CheckContext& ctx) {
         const int n = ctx.dim();
         const double a = fit_a(ctx).value();
         Residuals out;
         for (int k = 0; k < ctx.size(); ++k) {
           const LocalJets& J = ctx.jets(k);
           const Iso s = iso_at(ctx, J);
           std::vector<Jet> tx;
           for (int l = 0; l < n; ++l) tx.push_back(J.dx(s.theta, l));
           ResidualAccumulator acc;
           acc.add({a * J.F2().value(), -s.sigma0.value() * J.F().value(),
                    2.0 * s.theta.value() * projective_factor(J).value(), -J.contract_y(tx).value()});
           out.push_back(acc.result());
         }
         return out;
       }});

  add({"proj_b_existence",
       "½σ_{x^k x^l}y^k y^l − σ_{x^l}y^l P = bF² + 2(a_{x^l}y^l + σθ)F + 3θ² with b = b(x)", 6,
       Applicability::projectively_flat_only, 2, true, false, nullptr,
       [](const CheckContext& ctx) {
         const int n = ctx.dim();
         const Jet a = fit_a(ctx);
         std::vector<double> rows, rhs, lhs, mid, th2, Fs;
         for (int k = 0; k < ctx.size(); ++k) {
           const LocalJets& J = ctx.jets(k);
           const Iso s = iso_at(ctx, J);
           std::vector<Jet> ax, sxx;
           for (int l = 0; l < n; ++l) {
             ax.push_back(J.dx(a, l));
             sxx.push_back(J.dx(s.sigma0, l));
           }
           const double F = J.F().value();
           const double l0 = 0.5 * J.contract_y(sxx).value() - s.sigma0.value() * projective_factor(J).value();
           const double m0 = 2.0 * (J.contract_y(ax).value() + s.sigma.value() * s.theta.value()) * F;
           const double t2 = 3.0 * s.theta.value() * s.theta.value();
           lhs.push_back(l0);
           mid.push_back(m0);
           th2.push_back(t2);
           Fs.push_back(F);
           rows.push_back(F * F);
           rhs.push_back(l0 - m0 - t2);
         }
         const double b = fit_scalar(rows, rhs);
         Residuals out;
         for (int k = 0; k < ctx.size(); ++k) {
           ResidualAccumulator acc;
           acc.add({lhs[k], -b * Fs[k] * Fs[k], -mid[k], -th2[k]});
           out.push_back(acc.result());
         }
         return out;
       }});

  return r;
}

// Task plumbing --------------------------------------------------------------------

struct TaskResult {
  std::optional<std::string> skip;
  Residuals residuals;
  std::string source;
  std::exception_ptr error;
};

std::string point_text(const std::vector<double>& x) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

int order_for(const IdentityCheck& check, const RunOptions& opts) {
  if (opts.jet_order == 0) return check.required_order;
  if (opts.jet_order < check.required_order) {
    throw InsufficientOrder(check.name + " needs jet order " + std::to_string(check.required_order) +
                            ", got " + std::to_string(opts.jet_order));
  }
  return opts.jet_order;
}

TaskResult run_task(const IdentityCheck& check, const MetricField& m, const SampleGroup& group,
                    const SampleConfig& sampler, const RunOptions& opts) {
  TaskResult out;
  const int n = m.dimension();
  if (n < check.min_dimension) {
    out.skip = "dimension precondition unmet: requires n ≥ " + std::to_string(check.min_dimension);
    return out;
  }
  CheckContext ctx(m, group, order_for(check, opts), opts.spec, opts.isotropy, sampler.seed);

  const bool needs_sf = check.applicability == Applicability::scalar_flag_only ||
                        check.applicability == Applicability::weakly_isotropic_only ||
                        check.needs_isotropy;
  if (needs_sf) {
    for (int k = 0; k < ctx.size(); ++k) {
      const double r = scalar_flag_fit(ctx.jets(k)).residual;
      if (!(r < opts.scalar_flag_gate)) {
        std::ostringstream os;
        os << "applicability unmet: not of scalar flag curvature (residual " << r << " at x = "
           << point_text(group.x) << ")";
        out.skip = os.str();
        return out;
      }
    }
  }
  if (check.applicability == Applicability::projectively_flat_only && !opts.assume_applicable) {
    for (int k = 0; k < ctx.size(); ++k) {
      const LocalJets& J = ctx.jets(k);
      ResidualAccumulator acc;
      for (int l = 0; l < n; ++l)
        for (int c = 0; c < n; ++c)
          acc.add({J.dy(J.dx(J.F(), l), c).value(), -J.dy(J.dx(J.F(), c), l).value()});
      const double r = acc.result().normalized();
      if (!(r < opts.hamel_gate)) {
        std::ostringstream os;
        os << "applicability unmet: not projectively flat (Hamel residual " << r << " at x = "
           << point_text(group.x) << ")";
        out.skip = os.str();
        return out;
      }
    }
  }
  if (check.needs_isotropy) {
    try {
      const double r = ctx.isotropy_residual();
      out.source = isotropy_source_name(ctx.isotropy_source());
      if (!(r < opts.isotropy_gate)) {
        std::ostringstream os;
        os << "applicability unmet: not weakly isotropic (residual " << r << " at x = "
           << point_text(group.x) << ")";
        out.skip = os.str();
        return out;
      }
    } catch (const PreconditionError& e) {
      out.skip = std::string("applicability unmet: ") + e.what();
      return out;
    }
    if (check.skip_when_theta_zero) {
      double t = 0.0;
      for (const Jet& th : ctx.theta()) t = std::max(t, std::abs(th.value()));
      if (t < opts.theta_zero) {
        out.skip = "not applicable: θ = 0";
        return out;
      }
    }
  }
  if (check.precondition) {
    if (auto why = check.precondition(ctx)) {
      out.skip = "not applicable: " + *why;
      return out;
    }
  }
  out.residuals = check.evaluate(ctx);
  return out;
}

IdentityReport assemble(const IdentityCheck& check, const std::vector<SampleGroup>& groups,
                        std::vector<TaskResult>& tasks, const RunOptions& opts) {
  IdentityReport rep;
  rep.name = check.name;
  rep.tolerance = opts.tolerance;
  rep.jet_order = opts.jet_order == 0 ? check.required_order : opts.jet_order;
  for (auto& t : tasks) {
    if (t.error) std::rethrow_exception(t.error);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (tasks[g].skip) {
      rep.verdict = Verdict::skipped;
      rep.reason = *tasks[g].skip;
      rep.samples = 0;
      rep.points.clear();
      rep.residuals.clear();
      return rep;
    }
    if (rep.isotropy_source.empty()) rep.isotropy_source = tasks[g].source;
    for (std::size_t k = 0; k < groups[g].ys.size(); ++k) {
      rep.points.push_back({groups[g].x, groups[g].ys[k]});
      rep.residuals.push_back(tasks[g].residuals[k].normalized());
    }
  }
  rep.samples = static_cast<int>(rep.residuals.size());
  double sum = 0.0;
  rep.max_residual = -1.0;
  for (std::size_t i = 0; i < rep.residuals.size(); ++i) {
    const double r = std::isnan(rep.residuals[i]) ? std::numeric_limits<double>::infinity() : rep.residuals[i];
    sum += r;
    if (r > rep.max_residual) {
      rep.max_residual = r;
      rep.worst = rep.points[i];
    }
  }
  rep.mean_residual = rep.samples > 0 ? sum / rep.samples : 0.0;
  rep.verdict = rep.max_residual < opts.tolerance ? Verdict::pass : Verdict::fail;
  return rep;
}

}  // namespace

const std::vector<IdentityCheck>& registry() {
  static const std::vector<IdentityCheck> checks = build_registry();
  return checks;
}

const IdentityCheck& find_check(const std::string& name) {
  for (const IdentityCheck& c : registry()) {
    if (c.name == name) return c;
  }
  throw ParseError("unknown identity check '" + name + "'");
}

std::vector<IdentityReport> run_identities(const std::vector<const IdentityCheck*>& checks,
                                           const MetricField& m, const SampleConfig& sampler,
                                           const RunOptions& opts) {
  for (const IdentityCheck* c : checks) order_for(*c, opts);
  const std::vector<SampleGroup> groups = draw_samples(m, sampler);
  const std::size_t ng = groups.size();
  std::vector<TaskResult> results(checks.size() * ng);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= results.size()) return;
      try {
        results[t] = run_task(*checks[t / ng], m, groups[t % ng], sampler, opts);
      } catch (...) {
        results[t].error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(results.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<IdentityReport> out;
  for (std::size_t c = 0; c < checks.size(); ++c) {
    std::vector<TaskResult> slice(std::make_move_iterator(results.begin() + c * ng),
                                  std::make_move_iterator(results.begin() + (c + 1) * ng));
    out.push_back(assemble(*checks[c], groups, slice, opts));
  }
  return out;
}

IdentityReport run_identity(const IdentityCheck& check, const MetricField& m,
                            const SampleConfig& sampler, const RunOptions& opts) {
  return run_identities({&check}, m, sampler, opts).front();
}

}  // namespace finsler
