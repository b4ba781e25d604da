#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input documents or arguments.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A point lies outside the domain of a metric, or a family parameter set does
// not define a Finsler metric.
class DomainError : public Error {
 public:
  using Error::Error;
};

// An operation's documented precondition does not hold (degenerate flag,
// unsupported dimension, rank-deficient regression, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Two jets built over different variable counts were combined.
class ContextMismatch : public Error {
 public:
  using Error::Error;
};

// A derivative was requested beyond the truncation order of a jet.
class InsufficientOrder : public Error {
 public:
  using Error::Error;
};

// Division by a jet with zero constant term, or a singular constant-term
// matrix in a jet linear solve.
class SingularValue : public Error {
 public:
  using Error::Error;
};

// g_ij failed to be positive definite; carries its eigenvalues.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, std::vector<double> eigenvalues)
      : Error(what), eigenvalues_(std::move(eigenvalues)) {}
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }

 private:
  std::vector<double> eigenvalues_;
};

// Adaptive quadrature failed to reach its tolerance.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double estimated_error)
      : Error(what), estimated_error_(estimated_error) {}
  double estimated_error() const { return estimated_error_; }

 private:
  double estimated_error_;
};

}  // namespace finsler
