#include "finsler/families.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "finsler/error.hpp"

namespace finsler {

namespace {

using fmath::cdot;
using fmath::dot;

constexpr int kMinDimension = 2;
constexpr int kMaxDimension = 4;

double constant_like(double, double v) { return v; }
Jet constant_like(const Jet& ref, double v) { return ref.constant(v); }

template <class T>
T sq(const T& v) {
  return v * v;
}

// Σ κ_i x^i y^i.
template <class T>
T graph_term(const std::vector<double>& kappa, std::span<const T> x, std::span<const T> y) {
  T acc = x[0] * y[0] * kappa[0];
  for (std::size_t i = 1; i < x.size(); ++i) acc = acc + x[i] * y[i] * kappa[i];
  return acc;
}

template <class T>
T riemann_norm(const MetricFamilySpec& s, std::span<const T> x, std::span<const T> y) {
  using std::sqrt;
  return sqrt(fmath::quadratic<T>(s.A, y, y) + sq(graph_term(s.kappa, x, y)));
}

template <class T>
T space_form_norm(double mu, std::span<const T> x, std::span<const T> y) {
  using std::sqrt;
  const T d = 1.0 + mu * dot(x, x);
  return sqrt(d * dot(y, y) - mu * sq(dot(x, y))) / d;
}

template <class T>
std::vector<T> wind(const MetricFamilySpec& s, std::span<const T> x) {
  using std::sqrt;
  const int n = s.dimension;
  const T x2 = dot(x, x);
  const T r = sqrt(1.0 + s.mu * x2);
  const T ax = cdot<T>(s.a, x);
  const T bx = cdot<T>(s.b, x);
  const T lead = s.delta * r + ax;
  const T tail = x2 / (r + 1.0);
  std::vector<T> w;
  for (int i = 0; i < n; ++i) {
    T xq = x[0] * s.Q[static_cast<std::size_t>(i)];
    for (int j = 1; j < n; ++j) xq = xq + x[j] * s.Q[static_cast<std::size_t>(j * n + i)];
    w.push_back(-2.0 * (lead * x[i] - tail * s.a[i]) + xq + s.b[i] + s.mu * bx * x[i]);
  }
  return w;
}

// W_i and ‖W‖²_h.
template <class T>
std::pair<std::vector<T>, T> lower_wind(double mu, std::span<const T> x, const std::vector<T>& w) {
  const T d = 1.0 + mu * dot(x, x);
  const T xw = dot(x, std::span<const T>(w));
  const T d2 = d * d;
  std::vector<T> low;
  for (std::size_t i = 0; i < w.size(); ++i) low.push_back((d * w[i] - mu * xw * x[i]) / d2);
  const T norm2 = (d * dot(std::span<const T>(w), std::span<const T>(w)) - mu * xw * xw) / d2;
  return {std::move(low), norm2};
}

template <class T>
T cms_norm(const MetricFamilySpec& s, std::span<const T> x, std::span<const T> y) {
  using std::sqrt;
  const auto [low, w2] = lower_wind(s.mu, x, wind(s, x));
  const T d = 1.0 + s.mu * dot(x, x);
  const T h2 = (d * dot(y, y) - s.mu * sq(dot(x, y))) / (d * d);
  const T wy = dot(std::span<const T>(low), y);
  const T lambda = 1.0 - w2;
  return (sqrt(lambda * h2 + wy * wy) - wy) / lambda;
}

template <class T>
T funk_norm(const MetricFamilySpec& s, std::span<const T> x, std::span<const T> y) {
  using std::sqrt;
  const T x2 = dot(x, x);
  const T xy = dot(x, y);
  const T y2 = dot(y, y);
  T f = (sqrt(y2 - (x2 * y2 - xy * xy)) + xy) / (1.0 - x2);
  bool has_a = false;
  for (double v : s.a) has_a = has_a || v != 0.0;
  if (has_a) f = f + cdot<T>(s.a, y) / (1.0 + cdot<T>(s.a, x));
  return f;
}

template <class T>
T quartic_norm(double eps, std::span<const T> y) {
  using std::pow;
  T q = sq(sq(y[0]));
  for (std::size_t i = 1; i < y.size(); ++i) q = q + sq(sq(y[i]));
  return pow(q + eps * sq(dot(y, y)), 0.25);
}

template <class T>
T randers_beta(const MetricFamilySpec& s, std::span<const T> x, std::span<const T> y) {
  const int n = s.dimension;
  T acc = y[0] * s.b[0];
  for (int i = 0; i < n; ++i) {
    if (i > 0) acc = acc + y[i] * s.b[i];
    for (int j = 0; j < n; ++j) {
      const double w = s.omega[static_cast<std::size_t>(i * n + j)];
      if (w != 0.0) acc = acc + y[i] * x[j] * w;
    }
  }
  return acc;
}

struct Formula {
  MetricFamilySpec s;

  template <class T>
  T operator()(std::span<const T> x, std::span<const T> y) const {
    using std::sqrt;
    switch (s.family) {
      case Family::euclidean:
        return sqrt(dot(y, y));
      case Family::riemannian:
        return riemann_norm(s, x, y);
      case Family::space_form:
        return space_form_norm(s.mu, x, y);
      case Family::randers:
        return riemann_norm(s, x, y) + randers_beta(s, x, y);
      case Family::cms_family:
        return cms_norm(s, x, y);
      case Family::funk:
        return funk_norm(s, x, y);
      case Family::quartic:
        return quartic_norm(s.epsilon, y);
    }
    throw PreconditionError("unknown family");
  }
};

Eigen::MatrixXd matrix(const std::vector<double>& v, int n) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = v[static_cast<std::size_t>(i * n + j)];
  return m;
}

// ‖β‖²_α at x for the randers family.
double randers_beta_norm2(const MetricFamilySpec& s, std::span<const double> x) {
  const int n = s.dimension;
  Eigen::MatrixXd a = matrix(s.A, n);
  Eigen::VectorXd v(n), beta(n);
  for (int i = 0; i < n; ++i) {
    v(i) = s.kappa[i] * x[i];
    beta(i) = s.b[i];
    for (int j = 0; j < n; ++j) beta(i) += s.omega[static_cast<std::size_t>(i * n + j)] * x[j];
  }
  a += v * v.transpose();
  return beta.dot(a.ldlt().solve(beta));
}

double cms_wind_norm2(const MetricFamilySpec& s, std::span<const double> x) {
  return lower_wind(s.mu, x, wind(s, x)).second;
}

struct Domain {
  MetricFamilySpec s;

  bool operator()(std::span<const double> x) const {
    for (double v : x) {
      if (!std::isfinite(v)) return false;
    }
    switch (s.family) {
      case Family::euclidean:
      case Family::riemannian:
      case Family::quartic:
        return true;
      case Family::space_form:
        return 1.0 + s.mu * dot(x, x) > 0.0;
      case Family::randers:
        return randers_beta_norm2(s, x) < 1.0;
      case Family::cms_family:
        return 1.0 + s.mu * dot(x, x) > 0.0 && cms_wind_norm2(s, x) < 1.0;
      case Family::funk:
        return dot(x, x) < 1.0 && 1.0 + cdot<double>(s.a, x) > 0.0;
    }
    return false;
  }
};

std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

void check_size(const std::vector<double>& v, std::size_t expected, const char* what) {
  if (v.size() != expected) {
    throw PreconditionError(std::string(what) + " has " + std::to_string(v.size()) +
                            " entries, expected " + std::to_string(expected));
  }
}

void check_spd(const std::vector<double>& A, int n) {
  const Eigen::MatrixXd m = matrix(A, n);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("A must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw DomainError("A must be positive definite");
}

// Visits the probe lattice.
template <class Fn>
void for_each_probe(const MetricFamilySpec& s, Fn&& fn) {
  const int n = s.dimension;
  const int k = std::max(1, s.probe_points);
  std::vector<int> idx(n, 0);
  std::vector<double> x(n);
  while (true) {
    for (int i = 0; i < n; ++i) {
      x[i] = k == 1 ? 0.0 : -s.probe_half_width + 2.0 * s.probe_half_width * idx[i] / (k - 1);
    }
    fn(std::span<const double>(x));
    int p = 0;
    while (p < n && ++idx[p] == k) idx[p++] = 0;
    if (p == n) break;
  }
}

void validate(const MetricFamilySpec& s) {
  const int n = s.dimension;
  switch (s.family) {
    case Family::euclidean:
    case Family::quartic:
      if (s.family == Family::quartic && !(s.epsilon > 0.0)) {
        throw DomainError("quartic: epsilon must be positive");
      }
      return;
    case Family::riemannian:
      check_spd(s.A, n);
      return;
    case Family::space_form:
      for_each_probe(s, [&](std::span<const double> x) {
        if (!(1.0 + s.mu * dot(x, x) > 0.0)) {
          throw DomainError("space_form: 1 + μ|x|² ≤ 0 at x = " + format_point(x));
        }
      });
      return;
    case Family::randers:
      check_spd(s.A, n);
      for_each_probe(s, [&](std::span<const double> x) {
        const double b2 = randers_beta_norm2(s, x);
        if (!(b2 < 1.0)) {
          throw DomainError("randers: ‖β‖_α = " + std::to_string(std::sqrt(b2)) +
                            " ≥ 1 at x = " + format_point(x));
        }
      });
      return;
    case Family::cms_family: {
      const Eigen::MatrixXd q = matrix(s.Q, n);
      if ((q + q.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw DomainError("cms_family: Q must be antisymmetric");
      }
      for_each_probe(s, [&](std::span<const double> x) {
        if (!(1.0 + s.mu * dot(x, x) > 0.0)) {
          throw DomainError("cms_family: 1 + μ|x|² ≤ 0 at x = " + format_point(x));
        }
        const double w2 = cms_wind_norm2(s, x);
        if (!(w2 < 1.0)) {
          throw DomainError("cms_family: ‖W‖_h = " + std::to_string(std::sqrt(std::max(w2, 0.0))) +
                            " ≥ 1 at x = " + format_point(x));
        }
      });
      return;
    }
    case Family::funk: {
      const Formula f{s};
      for_each_probe(s, [&](std::span<const double> x) {
        if (!(dot(x, x) < 1.0)) return;
        if (!(1.0 + cdot<double>(s.a, x) > 0.0)) {
          throw DomainError("funk: 1 + ⟨a,x⟩ ≤ 0 at x = " + format_point(x));
        }
        std::vector<double> y(n, 0.0);
        for (int i = 0; i < n; ++i) {
          for (double sign : {1.0, -1.0}) {
            y[i] = sign;
            if (!(f(x, std::span<const double>(y)) > 0.0)) {
              throw DomainError("funk: F is not positive at x = " + format_point(x));
            }
          }
          y[i] = 0.0;
        }
      });
      return;
    }
  }
}

template <class T>
Invariants<T> invariants(const MetricFamilySpec& s, std::span<const T> x) {
  using std::sqrt;
  const int n = s.dimension;
  const T zero = constant_like(x[0], 0.0);
  Invariants<T> out{zero, std::vector<T>(n, zero), zero, {}, std::vector<T>(n, zero), zero};
  if (s.family == Family::euclidean) {
    out.theta = out.c_x;
    return out;
  }
  if (s.family == Family::funk) {
    out.c = constant_like(x[0], 0.5);
    out.sigma = constant_like(x[0], -0.25);
    out.s_coefficient = 0.5 * (n + 1.0) * constant_like(x[0], 1.0);
    out.theta = out.c_x;
    return out;
  }
  // space_form is the cms family with δ = 0, a = b = 0, Q = 0.
  const T r = sqrt(1.0 + s.mu * dot(x, x));
  const T num = s.delta + cdot<T>(s.a, x);
  out.c = num / r;
  const T r3 = r * r * r;
  for (int i = 0; i < n; ++i) out.c_x[i] = s.a[i] / r - num * s.mu * x[i] / r3;
  out.W = wind(s, x);
  T cw = out.c_x[0] * out.W[0];
  for (int i = 1; i < n; ++i) cw = cw + out.c_x[i] * out.W[i];
  out.sigma = s.mu - out.c * out.c - 2.0 * cw;
  out.theta = out.c_x;
  out.s_coefficient = (n + 1.0) * out.c;
  return out;
}

const std::pair<Family, const char*> kFamilyNames[] = {
    {Family::euclidean, "euclidean"}, {Family::riemannian, "riemannian"},
    {Family::space_form, "space_form"}, {Family::randers, "randers"},
    {Family::cms_family, "cms_family"}, {Family::funk, "funk"},
    {Family::quartic, "quartic"},
};

}  // namespace

std::string family_name(Family f) {
  for (const auto& [fam, name] : kFamilyNames) {
    if (fam == f) return name;
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  for (const auto& [fam, n] : kFamilyNames) {
    if (name == n) return fam;
  }
  throw ParseError("unknown family '" + name + "'");
}

MetricFamilySpec normalized(MetricFamilySpec s) {
  const std::size_t n = static_cast<std::size_t>(s.dimension);
  if (s.Q.empty()) s.Q.assign(n * n, 0.0);
  if (s.a.empty()) s.a.assign(n, 0.0);
  if (s.b.empty()) s.b.assign(n, 0.0);
  if (s.kappa.empty()) s.kappa.assign(n, 0.0);
  if (s.omega.empty()) s.omega.assign(n * n, 0.0);
  if (s.A.empty()) {
    s.A.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) s.A[i * n + i] = 1.0;
  }
  return s;
}

MetricField construct(const MetricFamilySpec& spec) {
  if (spec.dimension < kMinDimension || spec.dimension > kMaxDimension) {
    throw PreconditionError("dimension must lie in 2..4");
  }
  const MetricFamilySpec s = normalized(spec);
  const std::size_t n = static_cast<std::size_t>(s.dimension);
  check_size(s.Q, n * n, "Q");
  check_size(s.A, n * n, "A");
  check_size(s.omega, n * n, "omega");
  check_size(s.a, n, "a");
  check_size(s.b, n, "b");
  check_size(s.kappa, n, "kappa");
  if (!s.box.empty() && s.box.size() != n) throw PreconditionError("box does not match dimension");
  validate(s);
  return make_metric(family_name(s.family), s.dimension, Formula{s}, Domain{s});
}

std::vector<Interval> sampling_box(const MetricFamilySpec& spec) {
  if (!spec.box.empty()) return spec.box;
  return std::vector<Interval>(static_cast<std::size_t>(spec.dimension), Interval{-0.4, 0.4});
}

bool has_predicted_invariants(const MetricFamilySpec& spec) {
  switch (spec.family) {
    case Family::euclidean:
    case Family::space_form:
    case Family::cms_family:
      return true;
    case Family::funk:
      for (double v : spec.a) {
        if (v != 0.0) return false;
      }
      return true;
    default:
      return false;
  }
}

PredictedInvariants predicted_invariants(const MetricFamilySpec& spec, std::span<const double> x) {
  if (!has_predicted_invariants(spec)) {
    throw PreconditionError(family_name(spec.family) + ": no closed-form invariants");
  }
  return invariants(normalized(spec), x);
}

Invariants<Jet> predicted_invariants(const MetricFamilySpec& spec, std::span<const Jet> x) {
  if (!has_predicted_invariants(spec)) {
    throw PreconditionError(family_name(spec.family) + ": no closed-form invariants");
  }
  return invariants(normalized(spec), x);
}

std::vector<double> cms_wind(const MetricFamilySpec& spec, std::span<const double> x) {
  return wind(normalized(spec), x);
}

// JSON -----------------------------------------------------------------------

namespace {

using nlohmann::json;

double read_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ParseError("'" + key + "' must be a number");
  return v.get<double>();
}

std::vector<double> read_vector(const json& v, const std::string& key, int n) {
  if (!v.is_array() || static_cast<int>(v.size()) != n) {
    throw ParseError("'" + key + "' must be an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(read_number(v[i], key + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<double> read_matrix(const json& v, const std::string& key, int n) {
  if (!v.is_array() || static_cast<int>(v.size()) != n) {
    throw ParseError("'" + key + "' must be an " + std::to_string(n) + "×" + std::to_string(n) +
                     " array of arrays");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto row = read_vector(v[i], key + "[" + std::to_string(i) + "]", n);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

json matrix_json(const std::vector<double>& m, int n) {
  json out = json::array();
  for (int i = 0; i < n; ++i) {
    json row = json::array();
    for (int j = 0; j < n; ++j) row.push_back(m[static_cast<std::size_t>(i * n + j)]);
    out.push_back(row);
  }
  return out;
}

std::vector<std::string> allowed_params(Family f) {
  switch (f) {
    case Family::euclidean:
      return {};
    case Family::riemannian:
      return {"A", "kappa"};
    case Family::space_form:
      return {"mu"};
    case Family::randers:
      return {"A", "kappa", "b", "omega"};
    case Family::cms_family:
      return {"delta", "mu", "Q", "a", "b"};
    case Family::funk:
      return {"a"};
    case Family::quartic:
      return {"epsilon"};
  }
  return {};
}

}  // namespace

MetricFamilySpec spec_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("metric spec must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "family" && key != "dimension" && key != "params" && key != "box" &&
        key != "probe") {
      throw ParseError("unknown key '" + key + "'");
    }
  }
  MetricFamilySpec s;
  if (!doc.contains("family") || !doc["family"].is_string()) {
    throw ParseError("'family' must be a string");
  }
  s.family = family_from_name(doc["family"].get<std::string>());
  if (!doc.contains("dimension") || !doc["dimension"].is_number_integer()) {
    throw ParseError("'dimension' must be an integer");
  }
  s.dimension = doc["dimension"].get<int>();
  if (s.dimension < kMinDimension || s.dimension > kMaxDimension) {
    throw ParseError("'dimension' must lie in 2..4");
  }
  const int n = s.dimension;
  if (doc.contains("params")) {
    const json& p = doc["params"];
    if (!p.is_object()) throw ParseError("'params' must be an object");
    const auto allowed = allowed_params(s.family);
    for (const auto& [key, value] : p.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ParseError("unknown parameter 'params." + key + "' for family " +
                         family_name(s.family));
      }
      const std::string name = "params." + key;
      if (key == "delta") s.delta = read_number(value, name);
      if (key == "mu") s.mu = read_number(value, name);
      if (key == "epsilon") s.epsilon = read_number(value, name);
      if (key == "Q") s.Q = read_matrix(value, name, n);
      if (key == "A") s.A = read_matrix(value, name, n);
      if (key == "omega") s.omega = read_matrix(value, name, n);
      if (key == "a") s.a = read_vector(value, name, n);
      if (key == "b") s.b = read_vector(value, name, n);
      if (key == "kappa") s.kappa = read_vector(value, name, n);
    }
  }
  if (doc.contains("box")) {
    const json& b = doc["box"];
    if (!b.is_array() || static_cast<int>(b.size()) != n) {
      throw ParseError("'box' must be an array of " + std::to_string(n) + " [lo, hi] pairs");
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto iv = read_vector(b[i], "box[" + std::to_string(i) + "]", 2);
      if (!(iv[0] <= iv[1])) throw ParseError("'box[" + std::to_string(i) + "]' has lo > hi");
      s.box.push_back({iv[0], iv[1]});
    }
  }
  if (doc.contains("probe")) {
    const json& p = doc["probe"];
    if (!p.is_object()) throw ParseError("'probe' must be an object");
    for (const auto& [key, value] : p.items()) {
      if (key == "points") {
        if (!value.is_number_integer() || value.get<int>() < 1) {
          throw ParseError("'probe.points' must be a positive integer");
        }
        s.probe_points = value.get<int>();
      } else if (key == "half_width") {
        s.probe_half_width = read_number(value, "probe.half_width");
      } else {
        throw ParseError("unknown key 'probe." + key + "'");
      }
    }
  }
  return s;
}

json spec_to_json(const MetricFamilySpec& spec) {
  const MetricFamilySpec s = normalized(spec);
  const int n = s.dimension;
  json params = json::object();
  for (const std::string& key : allowed_params(s.family)) {
    if (key == "delta") params[key] = s.delta;
    if (key == "mu") params[key] = s.mu;
    if (key == "epsilon") params[key] = s.epsilon;
    if (key == "Q") params[key] = matrix_json(s.Q, n);
    if (key == "A") params[key] = matrix_json(s.A, n);
    if (key == "omega") params[key] = matrix_json(s.omega, n);
    if (key == "a") params[key] = s.a;
    if (key == "b") params[key] = s.b;
    if (key == "kappa") params[key] = s.kappa;
  }
  json box = json::array();
  for (const Interval& iv : sampling_box(s)) box.push_back({iv.lo, iv.hi});
  return {{"family", family_name(s.family)},
          {"dimension", n},
          {"params", params},
          {"box", box},
          {"probe", {{"points", s.probe_points}, {"half_width", s.probe_half_width}}}};
}

MetricFamilySpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open metric spec '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
  return spec_from_json(doc);
}

}  // namespace finsler
