#include "finsler/metric.hpp"

#include <string>

#include "finsler/error.hpp"

namespace finsler {

void MetricField::check_sizes(std::size_t nx, std::size_t ny) const {
  if (static_cast<int>(nx) != dimension_ || static_cast<int>(ny) != dimension_) {
    throw PreconditionError(name_ + ": expected x and y of dimension " +
                            std::to_string(dimension_));
  }
}

double MetricField::operator()(std::span<const double> x, std::span<const double> y) const {
  check_sizes(x.size(), y.size());
  if (!model_->in_domain(x)) throw DomainError(name_ + ": position outside the metric domain");
  return model_->evaluate(x, y);
}

long double MetricField::operator()(std::span<const long double> x,
                                    std::span<const long double> y) const {
  check_sizes(x.size(), y.size());
  std::vector<double> xd(x.begin(), x.end());
  if (!model_->in_domain(xd)) throw DomainError(name_ + ": position outside the metric domain");
  return model_->evaluate(x, y);
}

Jet MetricField::operator()(std::span<const Jet> x, std::span<const Jet> y) const {
  check_sizes(x.size(), y.size());
  std::vector<double> xd;
  xd.reserve(x.size());
  for (const Jet& xi : x) xd.push_back(xi.value());
  if (!model_->in_domain(xd)) throw DomainError(name_ + ": position outside the metric domain");
  return model_->evaluate(x, y);
}

}  // namespace finsler
