#pragma once

// Truncated multivariate Taylor arithmetic.
//
// A Jet holds the Taylor coefficients c[α] = ∂^α f / α! of a scalar quantity
// at a fixed base point, for every multi-index α with |α| ≤ order. All
// arithmetic is exact in the truncated polynomial ring, so any composite
// expression built from seeded variables carries its exact partial
// derivatives up to the truncation order.
//
// Coefficients are stored densely in graded-lexicographic rank order. With
// that ordering a truncation to a lower order is a prefix of the coefficient
// vector, which lets jets of different orders over the same variables mix
// freely: the result of any binary operation has the smaller of the two
// orders.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace finsler {

using MultiIndex = std::vector<int>;

// Immutable index tables for a given number of variables and maximal order.
class JetSpace {
 public:
  // Returns the shared tables for (num_vars, max_order). Tables are built once
  // per process and never modified afterwards.
  static std::shared_ptr<const JetSpace> get(int num_vars, int max_order);

  JetSpace(int num_vars, int max_order);

  int num_vars() const { return num_vars_; }
  int max_order() const { return max_order_; }

  // Number of multi-indices with |α| ≤ order.
  std::size_t size(int order) const { return upto_[order]; }
  int degree(std::size_t rank) const { return degree_[rank]; }
  std::span<const std::uint8_t> exponents(std::size_t rank) const {
    return {exps_.data() + rank * num_vars_, static_cast<std::size_t>(num_vars_)};
  }
  // Rank of α, or -1 when |α| exceeds max_order or α has negative entries.
  std::ptrdiff_t rank(std::span<const int> alpha) const;
  // ranks of α + β for the first size(max_order - |α|) ranks β.
  const std::uint32_t* product_row(std::size_t rank) const {
    return products_.data() + product_offset_[rank];
  }
  // Rank of α + e_var, or -1 when |α| = max_order.
  std::int32_t shifted(std::size_t rank, int var) const {
    return shift_[rank * num_vars_ + var];
  }
  // α!
  double factorial(std::size_t rank) const { return factorial_[rank]; }

 private:
  std::uint64_t key(std::span<const int> alpha) const;

  int num_vars_;
  int max_order_;
  std::vector<std::size_t> upto_;
  std::vector<std::uint8_t> exps_;
  std::vector<int> degree_;
  std::vector<double> factorial_;
  std::vector<std::size_t> product_offset_;
  std::vector<std::uint32_t> products_;
  std::vector<std::int32_t> shift_;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> lookup_;  // sorted by key
};

// The variable count and truncation order jets are created at.
class JetContext {
 public:
  // Throws PreconditionError unless num_vars ≥ 2 is even and order ≥ 1.
  JetContext(int num_vars, int order);

  int num_vars() const { return space_->num_vars(); }
  int order() const { return order_; }
  const std::shared_ptr<const JetSpace>& space() const { return space_; }

 private:
  std::shared_ptr<const JetSpace> space_;
  int order_;
};

class Jet {
 public:
  // An empty jet; only assignment and destruction are valid on it.
  Jet() = default;
  // The constant function with the given value.
  Jet(const JetContext& ctx, double value);

  bool empty() const { return space_ == nullptr; }
  int order() const { return order_; }
  int num_vars() const { return space_->num_vars(); }
  const std::shared_ptr<const JetSpace>& space() const { return space_; }

  double value() const { return coeffs_[0]; }
  std::span<const double> coefficients() const { return coeffs_; }
  // The Taylor coefficient c[α] (zero when α is beyond the order).
  double coefficient(std::span<const int> alpha) const;
  // ∂^α f at the base point.
  double partial(std::span<const int> alpha) const;

  // ∂f/∂v_var as a jet of order order() - 1.
  Jet derivative(int var) const;
  Jet truncated(int order) const;
  // A constant jet sharing this jet's variables.
  Jet constant(double value) const;
  // True when every coefficient except the constant term is zero.
  bool is_constant() const;

  // Evaluates the truncated polynomial at base + displacement.
  double evaluate(std::span<const double> displacement) const;

  friend Jet operator+(const Jet& a, const Jet& b);
  friend Jet operator-(const Jet& a, const Jet& b);
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator-(const Jet& a);

  friend Jet operator+(const Jet& a, double b);
  friend Jet operator+(double a, const Jet& b);
  friend Jet operator-(const Jet& a, double b);
  friend Jet operator-(double a, const Jet& b);
  friend Jet operator*(const Jet& a, double b);
  friend Jet operator*(double a, const Jet& b);
  friend Jet operator/(const Jet& a, double b);
  friend Jet operator/(double a, const Jet& b);

  Jet& operator+=(const Jet& b) { return *this = *this + b; }
  Jet& operator-=(const Jet& b) { return *this = *this - b; }
  Jet& operator*=(const Jet& b) { return *this = *this * b; }
  Jet& operator/=(const Jet& b) { return *this = *this / b; }
  Jet& operator+=(double b) { return *this = *this + b; }
  Jet& operator-=(double b) { return *this = *this - b; }
  Jet& operator*=(double b) { return *this = *this * b; }
  Jet& operator/=(double b) { return *this = *this / b; }

  friend Jet reciprocal(const Jet& a);
  friend Jet sqrt(const Jet& a);
  friend Jet pow(const Jet& a, double p);
  friend Jet pow(const Jet& a, int p);
  friend Jet exp(const Jet& a);
  friend Jet log(const Jet& a);
  friend Jet sin(const Jet& a);
  friend Jet cos(const Jet& a);
  // f(a) where taylor[k] = f^(k)(a.value()) / k!, k = 0 .. a.order().
  friend Jet compose(const Jet& a, std::span<const double> taylor);

  friend Jet seed_variable(const JetContext& ctx, int index, double value);
  friend Jet freeze_variables(const Jet& j, int first, int count);

 private:
  Jet(std::shared_ptr<const JetSpace> space, int order, std::vector<double> coeffs)
      : space_(std::move(space)), order_(order), coeffs_(std::move(coeffs)) {}

  std::shared_ptr<const JetSpace> space_;
  int order_ = 0;
  std::vector<double> coeffs_;
};

// The jet of v ↦ v_index with the given base value.
Jet seed_variable(const JetContext& ctx, int index, double value);

// ∂^α f = α! · c[α]; throws InsufficientOrder when |α| > order.
double extract_partial(const Jet& j, std::span<const int> alpha);

// Solves A·x = b in the truncated algebra. A is n×n row-major. Throws
// SingularValue when the constant-term matrix of A is singular.
std::vector<Jet> jet_linear_solve(std::span<const Jet> a, std::span<const Jet> b);

// Inverse of an n×n row-major jet matrix.
std::vector<Jet> jet_inverse(std::span<const Jet> a);

// Least-squares solution of A·x ≈ b through the normal equations. A is m×k
// row-major with m ≥ k. Throws SingularValue when the constant-term normal
// matrix is singular (rank-deficient regression).
std::vector<Jet> jet_least_squares(std::span<const Jet> a, std::span<const Jet> b);

// The jet of f with variables first .. first + count − 1 held at their base
// values.
Jet freeze_variables(const Jet& j, int first, int count);

}  // namespace finsler
