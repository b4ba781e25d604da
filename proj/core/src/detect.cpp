#include "finsler/detect.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "finsler/error.hpp"

namespace finsler {

namespace {

constexpr double kScalarFlagGate = 1e-6;

std::vector<double> negated(std::span<const double> y) {
  std::vector<double> out(y.begin(), y.end());
  for (double& e : out) e = -e;
  return out;
}

// Least squares with a rank check through a column-pivoted QR.
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols()) {
    throw PreconditionError(std::string(what) + ": rank-deficient regression");
  }
  return qr.solve(b);
}

}  // namespace

int default_fit_directions(int n) { return 6 * (n + 1); }

WeaklyIsotropicFit weakly_isotropic_fit(const MetricField& m, std::span<const double> x,
                                        const SampleConfig& cfg) {
  const int n = m.dimension();
  const int count = std::max(default_fit_directions(n), cfg.directions_per_point);
  const auto dirs = spiral_directions(n, count, cfg.seed);
  Eigen::MatrixXd a(count, n + 1);
  Eigen::VectorXd b(count);
  for (int k = 0; k < count; ++k) {
    const std::vector<double> y = cfg.normalize_F ? normalize_direction(m, x, dirs[k]) : dirs[k];
    LocalJets jets(m, {std::vector<double>(x.begin(), x.end()), y}, required_order::riemann);
    const ScalarFlagFit sf = scalar_flag_fit(jets);
    if (!(sf.residual < kScalarFlagGate)) {
      throw PreconditionError("weakly_isotropic_fit: not of scalar flag curvature (residual " +
                              std::to_string(sf.residual) + ")");
    }
    const double f = jets.F().value();
    for (int i = 0; i < n; ++i) a(k, i) = 3.0 * y[i];
    a(k, n) = f;
    b(k) = sf.K * f;
  }
  const Eigen::VectorXd c = solve_ls(a, b, "weakly_isotropic_fit");
  WeaklyIsotropicFit out;
  out.theta.assign(c.data(), c.data() + n);
  out.sigma = c(n);
  out.directions = count;
  const double scale = b.cwiseAbs().maxCoeff();
  const double err = (a * c - b).cwiseAbs().maxCoeff();
  out.residual = scale > 0.0 ? err / scale : err;
  return out;
}

WeaklyIsotropicJets weakly_isotropic_jets(const MetricField& m, std::span<const double> x,
                                          int order,
                                          std::span<const std::vector<double>> directions) {
  const int n = m.dimension();
  if (order < required_order::riemann) {
    throw InsufficientOrder("weakly_isotropic_jets needs jet order ≥ 4");
  }
  const std::size_t count = directions.size();
  if (static_cast<int>(count) < n + 1) {
    throw PreconditionError("weakly_isotropic_jets: fewer directions than unknowns");
  }
  std::vector<Jet> a, b;
  std::vector<double> av, bv;
  for (const auto& y : directions) {
    LocalJets jets(m, {std::vector<double>(x.begin(), x.end()), y}, order);
    const Jet f = freeze_variables(jets.F(), n, n);
    const Jet kf = freeze_variables(jets.K() * jets.F(), n, n);
    for (int i = 0; i < n; ++i) {
      a.push_back(f.constant(3.0 * y[i]));
      av.push_back(3.0 * y[i]);
    }
    a.push_back(f);
    av.push_back(f.value());
    b.push_back(kf);
    bv.push_back(kf.value());
  }
  std::vector<Jet> c;
  try {
    c = jet_least_squares(a, b);
  } catch (const SingularValue&) {
    throw PreconditionError("weakly_isotropic_jets: rank-deficient regression");
  }
  WeaklyIsotropicJets out;
  out.theta.assign(c.begin(), c.begin() + n);
  out.sigma = c[n];
  double err = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    double r = -bv[k];
    for (int i = 0; i <= n; ++i) r += av[k * (n + 1) + i] * c[i].value();
    err = std::max(err, std::abs(r));
    scale = std::max(scale, std::abs(bv[k]));
  }
  out.residual = scale > 0.0 ? err / scale : err;
  return out;
}

RandersSplit randers_split(const MetricField& m, std::span<const double> x,
                           const SampleConfig& cfg, double threshold) {
  const int n = m.dimension();
  const int count = std::max(default_fit_directions(n), cfg.directions_per_point);
  const auto fit_dirs = spiral_directions(n, count, cfg.seed);
  const auto test_dirs = spiral_directions(n, count + 1, cfg.seed + 0x9e3779b9ULL);
  const int nq = n * (n + 1) / 2;

  auto even_odd = [&](const std::vector<double>& y) {
    const double fp = m(x, y);
    const double fm = m(x, negated(y));
    return std::pair{0.5 * (fp + fm), 0.5 * (fp - fm)};
  };
  auto quad_row = [&](const std::vector<double>& y, Eigen::MatrixXd& a, int r) {
    int c = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) a(r, c++) = (i == j ? 1.0 : 2.0) * y[i] * y[j];
  };

  Eigen::MatrixXd aq(count, nq), al(count, n);
  Eigen::VectorXd bq(count), bl(count);
  for (int k = 0; k < count; ++k) {
    const auto [al_y, be_y] = even_odd(fit_dirs[k]);
    quad_row(fit_dirs[k], aq, k);
    bq(k) = al_y * al_y;
    for (int i = 0; i < n; ++i) al(k, i) = fit_dirs[k][i];
    bl(k) = be_y;
  }
  const Eigen::VectorXd q = solve_ls(aq, bq, "randers_split");
  const Eigen::VectorXd lin = solve_ls(al, bl, "randers_split");

  RandersSplit out;
  out.alpha_matrix = RealTensor(n, 2);
  {
    int c = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        out.alpha_matrix(i, j) = q(c);
        out.alpha_matrix(j, i) = q(c);
        ++c;
      }
  }
  out.beta.assign(lin.data(), lin.data() + n);

  Eigen::MatrixXd amat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) amat(i, j) = out.alpha_matrix(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(amat);
  out.positive_definite = eig.eigenvalues().minCoeff() > 0.0;

  double qerr = 0.0, qscale = 0.0, lerr = 0.0, lscale = 0.0, rec = 0.0;
  for (const auto& y : test_dirs) {
    const auto [al_y, be_y] = even_odd(y);
    double quad = 0.0, lin_y = 0.0;
    for (int i = 0; i < n; ++i) {
      lin_y += out.beta[i] * y[i];
      for (int j = 0; j < n; ++j) quad += out.alpha_matrix(i, j) * y[i] * y[j];
    }
    qerr = std::max(qerr, std::abs(al_y * al_y - quad));
    qscale = std::max(qscale, al_y * al_y);
    lerr = std::max(lerr, std::abs(be_y - lin_y));
    lscale = std::max(lscale, std::abs(al_y));
    if (out.positive_definite) {
      const double f = al_y + be_y;
      rec = std::max(rec, std::abs(f - std::sqrt(quad) - lin_y) / f);
    }
  }
  out.quadratic_residual = qscale > 0.0 ? qerr / qscale : qerr;
  out.linear_residual = lscale > 0.0 ? lerr / lscale : lerr;

  if (!out.positive_definite) {
    out.reconstruction_error = INFINITY;
    out.reason = "fitted a_ij is not positive definite";
    return out;
  }
  out.reconstruction_error = rec;
  const Eigen::VectorXd bv = lin;
  out.beta_norm = std::sqrt(bv.dot(amat.ldlt().solve(bv)));
  if (!(out.quadratic_residual < threshold)) {
    out.reason = "even part is not a quadratic form (residual " +
                 std::to_string(out.quadratic_residual) + ")";
  } else if (!(out.linear_residual < threshold)) {
    out.reason = "odd part is not linear (residual " + std::to_string(out.linear_residual) + ")";
  } else if (!(out.beta_norm < 1.0)) {
    out.reason = "‖β‖_α ≥ 1";
  } else {
    out.is_randers = true;
  }
  return out;
}

double quadratic_root(double a, double eta, double xi) {
  if (a == 0.0) throw PreconditionError("quadratic_root: leading coefficient vanishes");
  const double disc = eta * eta - 4.0 * a * xi;
  if (disc < 0.0) throw DomainError("quadratic_root: negative discriminant");
  const double s = std::sqrt(disc);
  // Same root as (−η + √disc)/(2a), without cancellation.
  if (eta <= 0.0) return (-eta + s) / (2.0 * a);
  return (2.0 * xi) / (-eta - s);
}

}  // namespace finsler
