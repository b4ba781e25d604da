#include "finsler/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <string>

#include "finsler/error.hpp"

namespace finsler {

namespace {

constexpr int kMaxVars = 8;
constexpr int kMaxOrder = 15;

void enumerate_degree(int num_vars, int pos, int remaining, std::vector<int>& current,
                      std::vector<std::uint8_t>& out) {
  if (pos == num_vars - 1) {
    current[pos] = remaining;
    for (int e : current) out.push_back(static_cast<std::uint8_t>(e));
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    current[pos] = e;
    enumerate_degree(num_vars, pos + 1, remaining - e, current, out);
  }
}

const JetSpace& common_space(const Jet& a, const Jet& b) {
  if (a.empty() || b.empty()) throw ContextMismatch("operation on an empty jet");
  if (a.space() != b.space() && a.space()->num_vars() != b.space()->num_vars()) {
    throw ContextMismatch("jets over " + std::to_string(a.space()->num_vars()) + " and " +
                          std::to_string(b.space()->num_vars()) + " variables combined");
  }
  return *a.space();
}

void require(const Jet& a) {
  if (a.empty()) throw ContextMismatch("operation on an empty jet");
}

}  // namespace

// ---------------------------------------------------------------------------
// JetSpace

std::shared_ptr<const JetSpace> JetSpace::get(int num_vars, int max_order) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const JetSpace>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[num_vars];
  if (!slot || slot->max_order() < max_order) {
    slot = std::make_shared<const JetSpace>(num_vars, max_order);
  }
  return slot;
}

JetSpace::JetSpace(int num_vars, int max_order) : num_vars_(num_vars), max_order_(max_order) {
  if (num_vars < 1 || num_vars > kMaxVars) {
    throw PreconditionError("jet variable count must lie in [1, " + std::to_string(kMaxVars) +
                            "], got " + std::to_string(num_vars));
  }
  if (max_order < 0 || max_order > kMaxOrder) {
    throw PreconditionError("jet order must lie in [0, " + std::to_string(kMaxOrder) +
                            "], got " + std::to_string(max_order));
  }
  std::vector<int> current(num_vars, 0);
  upto_.reserve(max_order + 1);
  for (int k = 0; k <= max_order; ++k) {
    enumerate_degree(num_vars, 0, k, current, exps_);
    upto_.push_back(exps_.size() / num_vars);
  }
  const std::size_t total = upto_.back();

  degree_.resize(total);
  factorial_.resize(total);
  lookup_.reserve(total);
  std::vector<int> alpha(num_vars);
  for (std::size_t r = 0; r < total; ++r) {
    int deg = 0;
    double fact = 1.0;
    for (int v = 0; v < num_vars; ++v) {
      alpha[v] = exps_[r * num_vars + v];
      deg += alpha[v];
      for (int t = 2; t <= alpha[v]; ++t) fact *= t;
    }
    degree_[r] = deg;
    factorial_[r] = fact;
    lookup_.emplace_back(key(alpha), static_cast<std::uint32_t>(r));
  }
  std::sort(lookup_.begin(), lookup_.end());

  product_offset_.resize(total + 1);
  std::size_t offset = 0;
  for (std::size_t r = 0; r < total; ++r) {
    product_offset_[r] = offset;
    offset += upto_[max_order - degree_[r]];
  }
  product_offset_[total] = offset;
  products_.resize(offset);
  std::vector<int> sum(num_vars);
  for (std::size_t a = 0; a < total; ++a) {
    const std::size_t lim = upto_[max_order - degree_[a]];
    std::uint32_t* row = products_.data() + product_offset_[a];
    for (std::size_t b = 0; b < lim; ++b) {
      for (int v = 0; v < num_vars; ++v) {
        sum[v] = exps_[a * num_vars + v] + exps_[b * num_vars + v];
      }
      row[b] = static_cast<std::uint32_t>(rank(sum));
    }
  }

  shift_.assign(total * num_vars, -1);
  const std::size_t shiftable = max_order > 0 ? upto_[max_order - 1] : 0;
  for (std::size_t r = 0; r < shiftable; ++r) {
    for (int v = 0; v < num_vars; ++v) {
      shift_[r * num_vars + v] = static_cast<std::int32_t>(product_row(r)[1 + v]);
    }
  }
}

std::uint64_t JetSpace::key(std::span<const int> alpha) const {
  std::uint64_t k = 0;
  for (int e : alpha) k = k * (kMaxOrder + 1) + static_cast<std::uint64_t>(e);
  return k;
}

std::ptrdiff_t JetSpace::rank(std::span<const int> alpha) const {
  if (static_cast<int>(alpha.size()) != num_vars_) return -1;
  int deg = 0;
  for (int e : alpha) {
    if (e < 0) return -1;
    deg += e;
  }
  if (deg > max_order_) return -1;
  const std::uint64_t k = key(alpha);
  auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(k, std::uint32_t{0}));
  if (it == lookup_.end() || it->first != k) return -1;
  return it->second;
}

// ---------------------------------------------------------------------------
// JetContext

JetContext::JetContext(int num_vars, int order) : order_(order) {
  if (num_vars < 2 || num_vars % 2 != 0) {
    throw PreconditionError("jet context needs an even variable count ≥ 2, got " +
                            std::to_string(num_vars));
  }
  if (order < 1) {
    throw PreconditionError("jet context order must be ≥ 1, got " + std::to_string(order));
  }
  space_ = JetSpace::get(num_vars, order);
}

// ---------------------------------------------------------------------------
// Jet

Jet::Jet(const JetContext& ctx, double value)
    : space_(ctx.space()), order_(ctx.order()), coeffs_(ctx.space()->size(ctx.order()), 0.0) {
  coeffs_[0] = value;
}

Jet seed_variable(const JetContext& ctx, int index, double value) {
  if (index < 0 || index >= ctx.num_vars()) {
    throw PreconditionError("seed index " + std::to_string(index) + " outside [0, " +
                            std::to_string(ctx.num_vars()) + ")");
  }
  std::vector<double> c(ctx.space()->size(ctx.order()), 0.0);
  c[0] = value;
  c[1 + index] = 1.0;  // degree-one ranks follow the variable order
  return Jet(ctx.space(), ctx.order(), std::move(c));
}

double Jet::coefficient(std::span<const int> alpha) const {
  require(*this);
  const std::ptrdiff_t r = space_->rank(alpha);
  if (r < 0 || static_cast<std::size_t>(r) >= coeffs_.size()) return 0.0;
  return coeffs_[r];
}

double Jet::partial(std::span<const int> alpha) const { return extract_partial(*this, alpha); }

double extract_partial(const Jet& j, std::span<const int> alpha) {
  require(j);
  int deg = 0;
  for (int e : alpha) deg += e;
  if (static_cast<int>(alpha.size()) != j.num_vars()) {
    throw PreconditionError("multi-index has " + std::to_string(alpha.size()) +
                            " entries, jet has " + std::to_string(j.num_vars()) + " variables");
  }
  if (deg > j.order()) {
    throw InsufficientOrder("derivative of total order " + std::to_string(deg) +
                            " requested from a jet of order " + std::to_string(j.order()));
  }
  const std::ptrdiff_t r = j.space()->rank(alpha);
  if (r < 0) throw PreconditionError("invalid multi-index");
  return j.space()->factorial(r) * j.coefficients()[r];
}

Jet Jet::derivative(int var) const {
  require(*this);
  if (var < 0 || var >= space_->num_vars()) {
    throw PreconditionError("derivative variable " + std::to_string(var) + " out of range");
  }
  if (order_ < 1) throw InsufficientOrder("derivative of an order-0 jet");
  const int m = order_ - 1;
  std::vector<double> out(space_->size(m));
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto s = static_cast<std::size_t>(space_->shifted(r, var));
    out[r] = (space_->exponents(r)[var] + 1) * coeffs_[s];
  }
  return Jet(space_, m, std::move(out));
}

Jet Jet::truncated(int order) const {
  require(*this);
  if (order >= order_) return *this;
  if (order < 0) throw InsufficientOrder("truncation to a negative order");
  std::vector<double> out(coeffs_.begin(), coeffs_.begin() + space_->size(order));
  return Jet(space_, order, std::move(out));
}

Jet Jet::constant(double value) const {
  require(*this);
  std::vector<double> out(space_->size(order_), 0.0);
  out[0] = value;
  return Jet(space_, order_, std::move(out));
}

bool Jet::is_constant() const {
  return std::all_of(coeffs_.begin() + 1, coeffs_.end(), [](double c) { return c == 0.0; });
}

double Jet::evaluate(std::span<const double> displacement) const {
  require(*this);
  if (static_cast<int>(displacement.size()) != space_->num_vars()) {
    throw PreconditionError("displacement size does not match the jet variable count");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < coeffs_.size(); ++r) {
    double term = coeffs_[r];
    const auto e = space_->exponents(r);
    for (int v = 0; v < space_->num_vars() && term != 0.0; ++v) {
      for (int t = 0; t < e[v]; ++t) term *= displacement[v];
    }
    total += term;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Arithmetic

Jet operator+(const Jet& a, const Jet& b) {
  common_space(a, b);
  const Jet& lo = a.order_ <= b.order_ ? a : b;
  const Jet& hi = a.order_ <= b.order_ ? b : a;
  std::vector<double> out(lo.coeffs_);
  for (std::size_t r = 0; r < out.size(); ++r) out[r] += hi.coeffs_[r];
  return Jet(lo.space_, lo.order_, std::move(out));
}

Jet operator-(const Jet& a, const Jet& b) {
  common_space(a, b);
  const int m = std::min(a.order_, b.order_);
  const auto& space = a.order_ <= b.order_ ? a.space_ : b.space_;
  std::vector<double> out(space->size(m));
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = a.coeffs_[r] - b.coeffs_[r];
  return Jet(space, m, std::move(out));
}

Jet operator*(const Jet& a, const Jet& b) {
  const JetSpace& space = common_space(a, b);
  const int m = std::min(a.order_, b.order_);
  std::vector<double> out(space.size(m), 0.0);
  const double* bc = b.coeffs_.data();
  for (std::size_t ra = 0; ra < out.size(); ++ra) {
    const double av = a.coeffs_[ra];
    if (av == 0.0) continue;
    const std::size_t lim = space.size(m - space.degree(ra));
    const std::uint32_t* row = space.product_row(ra);
    for (std::size_t rb = 0; rb < lim; ++rb) out[row[rb]] += av * bc[rb];
  }
  return Jet(a.space_, m, std::move(out));
}

Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

Jet operator-(const Jet& a) {
  require(a);
  std::vector<double> out(a.coeffs_);
  for (double& c : out) c = -c;
  return Jet(a.space_, a.order_, std::move(out));
}

Jet operator+(const Jet& a, double b) {
  require(a);
  std::vector<double> out(a.coeffs_);
  out[0] += b;
  return Jet(a.space_, a.order_, std::move(out));
}

Jet operator+(double a, const Jet& b) { return b + a; }
Jet operator-(const Jet& a, double b) { return a + (-b); }
Jet operator-(double a, const Jet& b) { return (-b) + a; }

Jet operator*(const Jet& a, double b) {
  require(a);
  std::vector<double> out(a.coeffs_);
  for (double& c : out) c *= b;
  return Jet(a.space_, a.order_, std::move(out));
}

Jet operator*(double a, const Jet& b) { return b * a; }

Jet operator/(const Jet& a, double b) {
  if (b == 0.0) throw SingularValue("division of a jet by zero");
  return a * (1.0 / b);
}

Jet operator/(double a, const Jet& b) { return reciprocal(b) * a; }

// Newton iteration r <- r (2 - b r); each step doubles the number of exact
// orders, starting from the exact constant term.
Jet reciprocal(const Jet& b) {
  require(b);
  const double b0 = b.value();
  if (b0 == 0.0 || !std::isfinite(b0)) {
    throw SingularValue("division by a jet with zero constant term");
  }
  Jet r = b.constant(1.0 / b0);
  for (int exact = 0; exact < b.order_; exact = 2 * exact + 1) {
    r = r * (2.0 - b * r);
  }
  return r;
}

// Newton iteration for a^{-1/2}: r <- r (3 - a r^2) / 2, then sqrt a = a r.
Jet sqrt(const Jet& a) {
  require(a);
  const double a0 = a.value();
  if (!(a0 > 0.0)) {
    throw SingularValue("square root of a jet with non-positive constant term " +
                        std::to_string(a0));
  }
  Jet r = a.constant(1.0 / std::sqrt(a0));
  for (int exact = 0; exact < a.order_; exact = 2 * exact + 1) {
    r = r * (3.0 - a * r * r) * 0.5;
  }
  return a * r;
}

Jet compose(const Jet& a, std::span<const double> taylor) {
  require(a);
  if (static_cast<int>(taylor.size()) < a.order_ + 1) {
    throw PreconditionError("composition needs order + 1 Taylor coefficients");
  }
  const Jet delta = a - a.value();
  Jet out = a.constant(taylor[a.order_]);
  for (int k = a.order_ - 1; k >= 0; --k) out = out * delta + taylor[k];
  return out;
}

Jet pow(const Jet& a, double p) {
  require(a);
  const double a0 = a.value();
  if (!(a0 > 0.0)) {
    throw SingularValue("real power of a jet with non-positive constant term");
  }
  std::vector<double> taylor(a.order_ + 1);
  double binom = 1.0;
  for (int k = 0; k <= a.order_; ++k) {
    taylor[k] = binom * std::pow(a0, p - k);
    binom *= (p - k) / (k + 1);
  }
  return compose(a, taylor);
}

Jet pow(const Jet& a, int p) {
  require(a);
  if (p < 0) return reciprocal(pow(a, -p));
  Jet result = a.constant(1.0);
  Jet base = a;
  while (p > 0) {
    if (p & 1) result = result * base;
    p >>= 1;
    if (p > 0) base = base * base;
  }
  return result;
}

Jet exp(const Jet& a) {
  require(a);
  std::vector<double> taylor(a.order_ + 1);
  double term = std::exp(a.value());
  for (int k = 0; k <= a.order_; ++k) {
    taylor[k] = term;
    term /= (k + 1);
  }
  return compose(a, taylor);
}

Jet log(const Jet& a) {
  require(a);
  const double a0 = a.value();
  if (!(a0 > 0.0)) throw SingularValue("logarithm of a jet with non-positive constant term");
  std::vector<double> taylor(a.order_ + 1);
  taylor[0] = std::log(a0);
  double power = 1.0;
  for (int k = 1; k <= a.order_; ++k) {
    power *= a0;
    taylor[k] = ((k % 2 == 1) ? 1.0 : -1.0) / (k * power);
  }
  return compose(a, taylor);
}

namespace {

std::vector<double> trig_taylor(double s, double c, int order, bool sine) {
  // derivative cycle of sin: sin, cos, -sin, -cos; of cos: cos, -sin, -cos, sin
  const double cycle_sin[4] = {s, c, -s, -c};
  const double cycle_cos[4] = {c, -s, -c, s};
  std::vector<double> taylor(order + 1);
  double fact = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) fact *= k;
    taylor[k] = (sine ? cycle_sin[k % 4] : cycle_cos[k % 4]) / fact;
  }
  return taylor;
}

}  // namespace

Jet sin(const Jet& a) {
  require(a);
  return compose(a, trig_taylor(std::sin(a.value()), std::cos(a.value()), a.order_, true));
}

Jet cos(const Jet& a) {
  require(a);
  return compose(a, trig_taylor(std::sin(a.value()), std::cos(a.value()), a.order_, false));
}

// ---------------------------------------------------------------------------
// Linear algebra

std::vector<Jet> jet_linear_solve(std::span<const Jet> a, std::span<const Jet> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw PreconditionError("jet_linear_solve: matrix is not n x n");
  if (n == 0) return {};
  std::vector<Jet> m(a.begin(), a.end());
  std::vector<Jet> rhs(b.begin(), b.end());
  double scale = 0.0;
  for (const Jet& e : m) scale = std::max(scale, std::abs(e.value()));
  if (scale == 0.0) throw SingularValue("jet_linear_solve: zero constant-term matrix");

  std::vector<Jet> inv_pivot(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(m[r * n + c].value()) > std::abs(m[piv * n + c].value())) piv = r;
    }
    if (std::abs(m[piv * n + c].value()) <= 1e-13 * scale) {
      throw SingularValue("jet_linear_solve: singular constant-term matrix");
    }
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m[c * n + j], m[piv * n + j]);
      std::swap(rhs[c], rhs[piv]);
    }
    inv_pivot[c] = reciprocal(m[c * n + c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      if (m[r * n + c].is_constant() && m[r * n + c].value() == 0.0) continue;
      const Jet factor = m[r * n + c] * inv_pivot[c];
      for (std::size_t j = c + 1; j < n; ++j) m[r * n + j] -= factor * m[c * n + j];
      rhs[r] -= factor * rhs[c];
    }
  }
  std::vector<Jet> x(n);
  for (std::size_t c = n; c-- > 0;) {
    Jet acc = rhs[c];
    for (std::size_t j = c + 1; j < n; ++j) acc -= m[c * n + j] * x[j];
    x[c] = acc * inv_pivot[c];
  }
  return x;
}

std::vector<Jet> jet_inverse(std::span<const Jet> a) {
  std::size_t n = 0;
  while (n * n < a.size()) ++n;
  if (n * n != a.size()) throw PreconditionError("jet_inverse: matrix is not square");
  std::vector<Jet> inv(n * n);
  for (std::size_t col = 0; col < n; ++col) {
    std::vector<Jet> e(n);
    for (std::size_t r = 0; r < n; ++r) e[r] = a[0].constant(r == col ? 1.0 : 0.0);
    const std::vector<Jet> x = jet_linear_solve(a, e);
    for (std::size_t r = 0; r < n; ++r) inv[r * n + col] = x[r];
  }
  return inv;
}

std::vector<Jet> jet_least_squares(std::span<const Jet> a, std::span<const Jet> b) {
  const std::size_t m = b.size();
  if (m == 0 || a.size() % m != 0) throw PreconditionError("jet_least_squares: shape mismatch");
  const std::size_t k = a.size() / m;
  if (k == 0 || m < k) throw PreconditionError("jet_least_squares: fewer rows than unknowns");
  std::vector<Jet> normal(k * k), rhs(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = c; d < k; ++d) {
      Jet acc = a[c] * a[d];
      for (std::size_t r = 1; r < m; ++r) acc += a[r * k + c] * a[r * k + d];
      normal[c * k + d] = acc;
      normal[d * k + c] = acc;
    }
    Jet acc = a[c] * b[0];
    for (std::size_t r = 1; r < m; ++r) acc += a[r * k + c] * b[r];
    rhs[c] = acc;
  }
  return jet_linear_solve(normal, rhs);
}

Jet freeze_variables(const Jet& j, int first, int count) {
  if (first < 0 || count < 0 || first + count > j.num_vars()) {
    throw PreconditionError("freeze_variables: variable range out of bounds");
  }
  std::vector<double> c(j.coeffs_);
  for (std::size_t r = 1; r < c.size(); ++r) {
    const auto e = j.space_->exponents(r);
    for (int v = first; v < first + count; ++v) {
      if (e[v] != 0) {
        c[r] = 0.0;
        break;
      }
    }
  }
  return Jet(j.space_, j.order_, std::move(c));
}

}  // namespace finsler
