#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "finsler/jet.hpp"

namespace finsler {

// A Finsler metric F(x, y) on a coordinate domain of R^n, evaluatable with
// plain reals, extended-precision reals and jets. Instances are immutable and
// may be shared between threads.
class MetricField {
 public:
  class Model {
   public:
    virtual ~Model() = default;
    virtual double evaluate(std::span<const double> x, std::span<const double> y) const = 0;
    virtual long double evaluate(std::span<const long double> x,
                                 std::span<const long double> y) const = 0;
    virtual Jet evaluate(std::span<const Jet> x, std::span<const Jet> y) const = 0;
    virtual bool in_domain(std::span<const double> x) const = 0;
  };

  MetricField(std::string name, int dimension, std::shared_ptr<const Model> model)
      : name_(std::move(name)), dimension_(dimension), model_(std::move(model)) {}

  const std::string& name() const { return name_; }
  int dimension() const { return dimension_; }

  // Throws DomainError when x is outside the domain and PreconditionError on
  // size mismatch.
  double operator()(std::span<const double> x, std::span<const double> y) const;
  long double operator()(std::span<const long double> x, std::span<const long double> y) const;
  Jet operator()(std::span<const Jet> x, std::span<const Jet> y) const;

  bool in_domain(std::span<const double> x) const { return model_->in_domain(x); }

 private:
  void check_sizes(std::size_t nx, std::size_t ny) const;

  std::string name_;
  int dimension_;
  std::shared_ptr<const Model> model_;
};

namespace detail {

template <class Formula, class Domain>
class FormulaModel final : public MetricField::Model {
 public:
  FormulaModel(Formula formula, Domain domain)
      : formula_(std::move(formula)), domain_(std::move(domain)) {}

  double evaluate(std::span<const double> x, std::span<const double> y) const override {
    return formula_(x, y);
  }
  long double evaluate(std::span<const long double> x,
                       std::span<const long double> y) const override {
    return formula_(x, y);
  }
  Jet evaluate(std::span<const Jet> x, std::span<const Jet> y) const override {
    return formula_(x, y);
  }
  bool in_domain(std::span<const double> x) const override { return domain_(x); }

 private:
  Formula formula_;
  Domain domain_;
};

}  // namespace detail

// Wraps a formula object with a templated call operator
//   template <class T> T operator()(std::span<const T> x, std::span<const T> y) const
// and a domain predicate on x.
template <class Formula, class Domain>
MetricField make_metric(std::string name, int dimension, Formula formula, Domain domain) {
  return MetricField(std::move(name), dimension,
                     std::make_shared<const detail::FormulaModel<Formula, Domain>>(
                         std::move(formula), std::move(domain)));
}

// Helpers for writing metric formulas generically over double, long double
// and Jet. Every helper needs at least one element, so no zero literal of
// type T is required.
namespace fmath {

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T acc = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) acc = acc + a[i] * b[i];
  return acc;
}

// a · v for a constant coefficient vector.
template <class T>
T cdot(std::span<const double> a, std::span<const T> v) {
  T acc = v[0] * a[0];
  for (std::size_t i = 1; i < v.size(); ++i) acc = acc + v[i] * a[i];
  return acc;
}

// v^T M w for a constant row-major n×n matrix M.
template <class T>
T quadratic(std::span<const double> m, std::span<const T> v, std::span<const T> w) {
  const std::size_t n = v.size();
  T acc = v[0] * (w[0] * m[0]);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == 0 && j == 0) continue;
      if (m[i * n + j] == 0.0) continue;
      acc = acc + v[i] * (w[j] * m[i * n + j]);
    }
  }
  return acc;
}

}  // namespace fmath

}  // namespace finsler
