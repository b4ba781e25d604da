#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "finsler/families.hpp"
#include "finsler/metric.hpp"

namespace finsler::testing {

// Named fixtures shared by the test suites.
inline MetricFamilySpec fixture(const std::string& name) {
  MetricFamilySpec s;
  s.dimension = 3;
  if (name == "euclidean") {
    s.family = Family::euclidean;
  } else if (name == "space_form") {
    s.family = Family::space_form;
    s.mu = 1.0;
  } else if (name == "cms") {
    s.family = Family::cms_family;
    s.mu = 0.3;
    s.a = {0.1, 0.0, 0.0};
    s.b = {0.02, -0.01, 0.03};
    s.Q = {0.0, 0.05, -0.02, -0.05, 0.0, 0.03, 0.02, -0.03, 0.0};
  } else if (name == "cms_radial") {
    s.family = Family::cms_family;
    s.delta = 0.2;
    s.mu = 0.3;
  } else if (name == "cms_delta") {
    s.family = Family::cms_family;
    s.delta = 0.1;
  } else if (name == "cms_2d") {
    s.family = Family::cms_family;
    s.dimension = 2;
    s.a = {0.1, 0.0};
  } else if (name == "funk") {
    s.family = Family::funk;
  } else if (name == "funk_a") {
    s.family = Family::funk;
    s.a = {0.2, 0.1, -0.1};
  } else if (name == "randers") {
    s.family = Family::randers;
    s.kappa = {0.3, 0.2, 0.1};
    s.b = {0.1, 0.05, 0.0};
    s.omega = {0.0, 0.1, 0.0, -0.05, 0.0, 0.1, 0.02, 0.0, 0.0};
  } else if (name == "riemannian") {
    s.family = Family::riemannian;
    s.kappa = {0.4, -0.3, 0.2};
  } else if (name == "quartic") {
    s.family = Family::quartic;
    s.epsilon = 0.1;
  }
  return normalized(s);
}

// Mixed partial ∂^α f at z by nested central differences of second order,
// refined twice by Richardson extrapolation, in long double.
inline long double richardson_partial(const std::function<long double(const std::vector<long double>&)>& f,
                                      const std::vector<long double>& z,
                                      const std::vector<int>& alpha, long double h) {
  auto central = [&](long double step) {
    // Σ over the product stencil (−1)^j C(k, j) f(z + (k/2 − j) step e_v).
    std::vector<int> vars, orders;
    for (std::size_t v = 0; v < alpha.size(); ++v) {
      if (alpha[v] > 0) {
        vars.push_back(static_cast<int>(v));
        orders.push_back(alpha[v]);
      }
    }
    std::vector<int> j(vars.size(), 0);
    long double acc = 0.0L;
    int total = 0;
    for (int k : orders) total += k;
    while (true) {
      std::vector<long double> p = z;
      long double w = 1.0L;
      for (std::size_t t = 0; t < vars.size(); ++t) {
        const int k = orders[t];
        long double binom = 1.0L;
        for (int q = 0; q < j[t]; ++q) binom = binom * (k - q) / (q + 1);
        w *= (j[t] % 2 ? -1.0L : 1.0L) * binom;
        p[vars[t]] += (0.5L * k - j[t]) * step;
      }
      acc += w * f(p);
      std::size_t t = 0;
      while (t < vars.size() && ++j[t] > orders[t]) j[t++] = 0;
      if (t == vars.size()) break;
    }
    return acc / std::pow(step, static_cast<long double>(total));
  };
  const long double d1 = central(h), d2 = central(h / 2), d3 = central(h / 4);
  const long double r1 = (4 * d2 - d1) / 3, r2 = (4 * d3 - d2) / 3;
  return (16 * r2 - r1) / 15;
}

inline double rel_err(double got, double want, double floor = 1.0) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

}  // namespace finsler::testing
