#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "finsler/error.hpp"
#include "finsler/geometry.hpp"

namespace finsler {

namespace {

struct Node {
  std::vector<double> u;
  double weight;
};

// P_count(z) and its derivative.
std::pair<double, double> legendre(int count, double z) {
  double p0 = 1.0, p1 = z;
  for (int k = 2; k <= count; ++k) {
    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, count * (z * p1 - p0) / (z * z - 1.0)};
}

// Gauss–Legendre nodes and weights on [-1, 1].
void gauss_legendre(int count, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(count, 0.0);
  weights.assign(count, 0.0);
  for (int i = 0; i < (count + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(count, z);
      const double dz = p / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double dp = legendre(count, z).second;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    nodes[i] = z;
    nodes[count - 1 - i] = -z;
    weights[i] = w;
    weights[count - 1 - i] = w;
  }
}

// Nodes on S^{n-1} with the surface-measure weights.
//   n = 2: trapezoid rule in the angle.
//   n = 3: Gauss–Legendre in the height times trapezoid in the azimuth.
//   n = 4: Hopf coordinates u = (cos η e^{iξ₁}, sin η e^{iξ₂}) with
//          dΩ = sin η cos η dη dξ₁ dξ₂; Gauss–Legendre in η.
std::vector<Node> sphere_rule(int n, int level) {
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<Node> out;
  if (n == 2) {
    const int m = 4 * level;
    for (int a = 0; a < m; ++a) {
      const double t = two_pi * a / m;
      out.push_back({{std::cos(t), std::sin(t)}, two_pi / m});
    }
  } else if (n == 3) {
    std::vector<double> z, w;
    gauss_legendre(level, z, w);
    const int m = 2 * level;
    for (int i = 0; i < level; ++i) {
      const double r = std::sqrt(1.0 - z[i] * z[i]);
      for (int a = 0; a < m; ++a) {
        const double t = two_pi * a / m;
        out.push_back({{r * std::cos(t), r * std::sin(t), z[i]}, w[i] * two_pi / m});
      }
    }
  } else if (n == 4) {
    std::vector<double> s, w;
    gauss_legendre(level, s, w);
    const int m = 2 * level;
    for (int i = 0; i < level; ++i) {
      const double eta = std::numbers::pi / 4.0 * (s[i] + 1.0);
      const double ce = std::cos(eta), se = std::sin(eta);
      const double we = w[i] * std::numbers::pi / 4.0 * ce * se;
      for (int a = 0; a < m; ++a) {
        const double t1 = two_pi * a / m;
        for (int b = 0; b < m; ++b) {
          const double t2 = two_pi * b / m;
          out.push_back({{ce * std::cos(t1), ce * std::sin(t1), se * std::cos(t2),
                          se * std::sin(t2)},
                         we * (two_pi / m) * (two_pi / m)});
        }
      }
    }
  } else {
    throw PreconditionError("volume density supports dimensions 2..4");
  }
  return out;
}

double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
}

double indicatrix_volume(const MetricField& m, std::span<const double> x, int level) {
  const int n = m.dimension();
  double acc = 0.0;
  for (const Node& node : sphere_rule(n, level)) {
    acc += node.weight * std::pow(m(x, std::span<const double>(node.u)), -n);
  }
  return acc / n;
}

// The smallest level (doubling from initial_level) at which successive
// estimates agree to the tolerance.
int converged_level(const MetricField& m, std::span<const double> x,
                    const QuadratureOptions& opts, double* value) {
  int level = opts.initial_level;
  double prev = indicatrix_volume(m, x, level);
  double change = 0.0;
  while (2 * level <= opts.max_level) {
    level *= 2;
    const double cur = indicatrix_volume(m, x, level);
    change = std::abs(cur - prev) / std::abs(cur);
    if (change <= opts.tolerance) {
      if (value) *value = cur;
      return level;
    }
    prev = cur;
  }
  throw QuadratureError("indicatrix volume did not converge up to level " + std::to_string(level),
                        change);
}

}  // namespace

double bh_volume_density(const MetricField& m, std::span<const double> x,
                         const QuadratureOptions& opts) {
  double vol = 0.0;
  converged_level(m, x, opts, &vol);
  return unit_ball_volume(m.dimension()) / vol;
}

Jet bh_volume_density(const MetricField& m, std::span<const Jet> x, const QuadratureOptions& opts) {
  const int n = m.dimension();
  if (static_cast<int>(x.size()) != n) throw PreconditionError("x does not match the dimension");
  std::vector<double> xv;
  for (const Jet& xi : x) xv.push_back(xi.value());
  const int level = converged_level(m, xv, opts, nullptr);
  Jet acc = x[0].constant(0.0);
  std::vector<Jet> u(n);
  for (const Node& node : sphere_rule(n, level)) {
    for (int i = 0; i < n; ++i) u[i] = x[0].constant(node.u[i]);
    acc += node.weight * pow(m(x, std::span<const Jet>(u)), -n);
  }
  return unit_ball_volume(n) * static_cast<double>(n) / acc;
}

Jet s_curvature(const LocalJets& jets, int volume_order, const QuadratureOptions& opts) {
  const int n = jets.dim();
  if (volume_order < 1 || volume_order > jets.order()) {
    throw InsufficientOrder("S-curvature volume order must lie in 1..jet order");
  }
  std::vector<Jet> xt;
  for (int i = 0; i < n; ++i) xt.push_back(jets.x(i).truncated(volume_order));
  const Jet lns = log(bh_volume_density(jets.metric(), xt, opts));
  Jet acc = jets.dy(jets.G(0), 0);
  for (int i = 1; i < n; ++i) acc += jets.dy(jets.G(i), i);
  for (int i = 0; i < n; ++i) acc -= jets.y(i) * jets.dx(lns, i);
  return acc;
}

double s_curvature(const MetricField& m, const TangentPoint& p, const QuadratureOptions& opts) {
  LocalJets jets(m, p, 3);
  return s_curvature(jets, 1, opts).value();
}

}  // namespace finsler
