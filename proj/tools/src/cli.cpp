#include "finsler/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "finsler/detect.hpp"
#include "finsler/error.hpp"
#include "finsler/families.hpp"
#include "finsler/geometry.hpp"
#include "finsler/identities.hpp"

namespace finsler::cli {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr double kThetaNonzero = 1e-7;
constexpr double kScalarFlagGate = 1e-6;

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string vec6(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt6(v[i]);
  return s + ")";
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json report_header(const char* command, const MetricFamilySpec& spec) {
  return {{"schema", kReportSchema},
          {"tool", {{"name", "finsler"}, {"version", kToolVersion}}},
          {"command", command},
          {"spec", spec_to_json(spec)}};
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot write report '" + path + "'");
  f << doc.dump(2) << '\n';
}

json point_json(const TangentPoint& p) { return {{"x", p.x}, {"y", p.y}}; }

// Maps library exceptions onto the exit-code contract.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InsufficientOrder& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDomain;
  }
}

double frobenius(const RealTensor& t) {
  double s = 0.0;
  for (double v : t.flat()) s += v * v;
  return std::sqrt(s);
}

std::vector<double> eigenvalues(const RealTensor& g) {
  const int n = g.dim();
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = g(i, j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().data(), es.eigenvalues().data() + n};
}

std::vector<std::string> split_checks(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const std::string& item : items) {
    std::stringstream ss(item);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) out.push_back(name);
    }
  }
  return out;
}

IsotropySource isotropy_from_name(const std::string& s) {
  if (s == "automatic") return IsotropySource::automatic;
  if (s == "predicted") return IsotropySource::predicted;
  if (s == "fitted") return IsotropySource::fitted;
  throw ParseError("unknown isotropy source '" + s + "'");
}

// Cell centres of a G^n lattice over the sampling box, inside the domain.
std::vector<std::vector<double>> grid_points(const MetricField& m, const MetricFamilySpec& spec,
                                             int g) {
  const auto box = sampling_box(spec);
  const int n = spec.dimension;
  std::vector<std::vector<double>> out;
  std::vector<int> idx(n, 0);
  while (true) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = box[i].lo + (idx[i] + 0.5) / g * (box[i].hi - box[i].lo);
    if (m.in_domain(x)) out.push_back(std::move(x));
    int k = 0;
    while (k < n && ++idx[k] == g) idx[k++] = 0;
    if (k == n) break;
  }
  return out;
}

}  // namespace

json payload(const json& report) {
  json p = report;
  p.erase("timing");
  return p;
}

int cmd_inspect(const InspectOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    const MetricFamilySpec spec = normalized(load_spec(opts.spec_path));
    const int n = spec.dimension;
    std::vector<double> x = opts.x.empty() ? std::vector<double>(n, 0.0) : opts.x;
    std::vector<double> y = opts.y;
    if (y.empty()) {
      y.assign(n, 0.0);
      y[0] = 1.0;
    }
    if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n) {
      throw ParseError("--x and --y need " + std::to_string(n) + " components");
    }
    const MetricField m = construct(spec);
    const TangentPoint p{x, y};
    const CurvatureBundle cb = curvature_bundle(m, p);
    const std::vector<double> eig = eigenvalues(cb.g);
    const ScalarFlagFit fit = scalar_flag_fit(m, p);
    const bool scalar_flag = fit.residual < kScalarFlagGate;
    const double S = s_curvature(m, p);
    const double normC = frobenius(cb.cartan), normB = frobenius(cb.berwald),
                 normL = frobenius(cb.landsberg);

    if (!opts.quiet) {
      out << "metric  " << family_name(spec.family) << " (n = " << n << ")\n";
      out << "x       " << vec6(x) << "\n";
      out << "y       " << vec6(y) << "\n";
      out << "F       " << fmt6(cb.F) << "\n";
      out << "eig g   " << vec6(eig) << "\n";
      if (scalar_flag) {
        out << "K       " << fmt6(fit.K) << "\n";
      } else {
        out << "K       not scalar (residual " << fmt6(fit.residual) << ")\n";
      }
      out << "S       " << fmt6(S) << "\n";
      out << "|C|     " << fmt6(normC) << "\n";
      out << "|B|     " << fmt6(normB) << "\n";
      out << "|L|     " << fmt6(normL) << "\n";
    }
    if (!opts.report_path.empty()) {
      json doc = report_header("inspect", spec);
      doc["point"] = point_json(p);
      doc["inspect"] = {{"F", cb.F},
                        {"g_eigenvalues", eig},
                        {"scalar_flag", scalar_flag},
                        {"scalar_flag_residual", fit.residual},
                        {"K", scalar_flag ? json(fit.K) : json(nullptr)},
                        {"S", S},
                        {"norm_cartan", normC},
                        {"norm_berwald", normB},
                        {"norm_landsberg", normL},
                        {"mean_cartan", cb.mean_cartan},
                        {"mean_landsberg", cb.mean_landsberg},
                        {"spray", cb.spray}};
      doc["timing"] = {{"total_seconds", seconds_since(t0)}};
      write_json(opts.report_path, doc);
    }
    return static_cast<int>(kPass);
  });
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    if (opts.points < 1) throw ParseError("--points must be positive");
    if (opts.directions < 1) throw ParseError("--directions must be positive");
    if (opts.threads < 1) throw ParseError("--threads must be positive");
    if (opts.jet_order < 0) throw ParseError("--jet-order must be non-negative");

    std::vector<std::string> names = split_checks(opts.checks);
    if (names.empty()) throw ParseError("no checks requested");
    const bool all = names.size() == 1 && names[0] == "all";
    std::vector<const IdentityCheck*> checks;
    if (all) {
      for (const IdentityCheck& c : registry()) checks.push_back(&c);
    } else {
      for (const std::string& name : names) checks.push_back(&find_check(name));
    }
    const IsotropySource source = isotropy_from_name(opts.isotropy);

    const MetricFamilySpec spec = normalized(load_spec(opts.spec_path));
    const MetricField m = construct(spec);

    SampleConfig sampler;
    sampler.num_points = opts.points;
    sampler.directions_per_point = opts.directions;
    sampler.seed = opts.seed;
    sampler.box = sampling_box(spec);

    RunOptions ro;
    ro.tolerance = opts.tol;
    ro.jet_order = opts.jet_order;
    ro.threads = opts.threads;
    ro.isotropy = source;
    ro.spec = &spec;
    ro.assume_applicable = !all;

    const auto t1 = Clock::now();
    const std::vector<IdentityReport> reports = run_identities(checks, m, sampler, ro);
    const double run_seconds = seconds_since(t1);

    int passed = 0, failed = 0, skipped = 0;
    for (const IdentityReport& r : reports) {
      if (r.verdict == Verdict::pass) ++passed;
      if (r.verdict == Verdict::fail) ++failed;
      if (r.verdict == Verdict::skipped) ++skipped;
    }

    if (!opts.quiet) {
      out << pad("check", 26) << pad("verdict", 9) << pad("max", 13) << pad("mean", 13)
          << "order\n";
      for (const IdentityReport& r : reports) {
        out << pad(r.name, 26);
        if (r.verdict == Verdict::skipped) {
          out << "skipped: " << r.reason << "\n";
          continue;
        }
        out << pad(verdict_name(r.verdict), 9) << pad(fmt6(r.max_residual), 13)
            << pad(fmt6(r.mean_residual), 13) << r.jet_order << "\n";
      }
      out << passed << " passed, " << failed << " failed, " << skipped << " skipped\n";
    }

    if (!opts.csv_path.empty()) {
      std::ofstream f(opts.csv_path);
      if (!f) throw ParseError("cannot write csv '" + opts.csv_path + "'");
      f << "check,point";
      for (int i = 0; i < spec.dimension; ++i) f << ",x" << i;
      for (int i = 0; i < spec.dimension; ++i) f << ",y" << i;
      f << ",residual\n";
      f.precision(17);
      for (const IdentityReport& r : reports) {
        for (std::size_t k = 0; k < r.residuals.size(); ++k) {
          f << r.name << ',' << k;
          for (double v : r.points[k].x) f << ',' << v;
          for (double v : r.points[k].y) f << ',' << v;
          f << ',' << r.residuals[k] << '\n';
        }
      }
    }

    if (!opts.report_path.empty()) {
      json doc = report_header("verify", spec);
      doc["config"] = {{"checks", names},
                       {"points", opts.points},
                       {"directions", opts.directions},
                       {"seed", opts.seed},
                       {"tolerance", opts.tol},
                       {"jet_order", opts.jet_order},
                       {"isotropy", isotropy_source_name(source)},
                       {"normalize_F", sampler.normalize_F}};
      json orders = json::object();
      json items = json::array();
      for (const IdentityReport& r : reports) {
        orders[r.name] = r.jet_order;
        json item = {{"name", r.name},
                     {"verdict", verdict_name(r.verdict)},
                     {"samples", r.samples},
                     {"tolerance", r.tolerance},
                     {"jet_order", r.jet_order}};
        if (r.verdict == Verdict::skipped) {
          item["reason"] = r.reason;
        } else {
          item["max_residual"] = r.max_residual;
          item["mean_residual"] = r.mean_residual;
          item["worst"] = point_json(r.worst);
          item["residuals"] = r.residuals;
        }
        if (!r.isotropy_source.empty()) item["isotropy_source"] = r.isotropy_source;
        items.push_back(std::move(item));
      }
      doc["jet_orders"] = orders;
      doc["identities"] = items;
      doc["summary"] = {{"passed", passed}, {"failed", failed}, {"skipped", skipped}};
      doc["timing"] = {{"identities_seconds", run_seconds},
                       {"total_seconds", seconds_since(t0)},
                       {"threads", opts.threads}};
      write_json(opts.report_path, doc);
    }
    return static_cast<int>(failed ? kFail : kPass);
  });
}

int cmd_detect(const DetectOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    if (opts.grid < 1) throw ParseError("--grid must be positive");
    const MetricFamilySpec spec = normalized(load_spec(opts.spec_path));
    const MetricField m = construct(spec);
    const int n = spec.dimension;
    const auto xs = grid_points(m, spec, opts.grid);
    if (xs.empty()) throw DomainError("no grid point lies in the metric's domain");

    SampleConfig cfg;
    cfg.seed = opts.seed;
    const auto probe = spiral_directions(n, default_fit_directions(n), opts.seed);

    bool all_scalar = true, all_iso = true, all_randers = true;
    double max_flag = 0.0, max_iso = 0.0, max_theta = 0.0, max_quad = 0.0;
    double sigma_lo = INFINITY, sigma_hi = -INFINITY;
    std::string randers_reason;
    json points = json::array();

    if (!opts.quiet) {
      out << pad("x", 34) << pad("flag res", 13) << pad("sigma", 13) << pad("|theta|", 13)
          << pad("quad res", 13) << "Randers\n";
    }
    for (const auto& x : xs) {
      double flag = 0.0;
      for (const auto& u : probe) {
        flag = std::max(flag, scalar_flag_fit(m, TangentPoint{x, u}).residual);
      }
      max_flag = std::max(max_flag, flag);
      json pj = {{"x", x}, {"scalar_flag_residual", flag}};

      bool iso = false;
      WeaklyIsotropicFit wi;
      if (flag < kScalarFlagGate) {
        try {
          wi = weakly_isotropic_fit(m, x, cfg);
          iso = wi.residual < kScalarFlagGate;
        } catch (const PreconditionError&) {
          iso = false;
        }
      } else {
        all_scalar = false;
      }
      double theta = 0.0;
      if (iso) {
        for (double t : wi.theta) theta = std::max(theta, std::abs(t));
        max_theta = std::max(max_theta, theta);
        max_iso = std::max(max_iso, wi.residual);
        sigma_lo = std::min(sigma_lo, wi.sigma);
        sigma_hi = std::max(sigma_hi, wi.sigma);
        pj["sigma"] = wi.sigma;
        pj["theta"] = wi.theta;
        pj["isotropy_residual"] = wi.residual;
      }
      all_iso = all_iso && iso;

      const RandersSplit rs = randers_split(m, x, cfg);
      max_quad = std::max(max_quad, rs.quadratic_residual);
      if (!rs.is_randers) {
        all_randers = false;
        if (randers_reason.empty()) randers_reason = rs.reason;
      }
      pj["randers"] = {{"is_randers", rs.is_randers},
                       {"quadratic_residual", rs.quadratic_residual},
                       {"linear_residual", rs.linear_residual},
                       {"reconstruction_error", rs.reconstruction_error},
                       {"beta_norm", rs.beta_norm}};
      if (!rs.is_randers) pj["randers"]["reason"] = rs.reason;
      points.push_back(std::move(pj));

      if (!opts.quiet) {
        out << pad(vec6(x), 34) << pad(fmt6(flag), 13) << pad(iso ? fmt6(wi.sigma) : "-", 13)
            << pad(iso ? fmt6(theta) : "-", 13) << pad(fmt6(rs.quadratic_residual), 13)
            << (rs.is_randers ? "yes" : "no") << "\n";
      }
    }

    std::string iso_verdict;
    const bool theta_nonzero = max_theta > kThetaNonzero;
    if (!all_scalar) {
      iso_verdict = "no (not of scalar flag curvature)";
    } else if (!all_iso) {
      iso_verdict = "no";
    } else if (theta_nonzero) {
      iso_verdict = "yes (θ≠0)";
    } else {
      double sigma = 0.5 * (sigma_lo + sigma_hi);
      if (std::abs(sigma) < 1e-10) sigma = 0.0;
      iso_verdict = "yes (θ=0, σ=" + fmt6(sigma) + ")";
    }
    const std::string randers_verdict = all_randers ? "yes" : "no (" + randers_reason + ")";

    out << "scalar flag curvature: " << (all_scalar ? "yes" : "no") << " (max residual "
        << fmt6(max_flag) << ")\n";
    out << "weakly isotropic: " << iso_verdict << "; Randers: " << randers_verdict << "\n";

    if (!opts.report_path.empty()) {
      json doc = report_header("detect", spec);
      doc["config"] = {{"grid", opts.grid}, {"seed", opts.seed}};
      doc["detection"] = {
          {"points", points},
          {"scalar_flag", all_scalar},
          {"max_scalar_flag_residual", max_flag},
          {"weakly_isotropic", all_scalar && all_iso},
          {"theta_nonzero", all_scalar && all_iso && theta_nonzero},
          {"max_isotropy_residual", max_iso},
          {"randers", all_randers},
          {"max_quadratic_residual", max_quad},
          {"verdict", "weakly isotropic: " + iso_verdict + "; Randers: " + randers_verdict}};
      doc["timing"] = {{"total_seconds", seconds_since(t0)}};
      write_json(opts.report_path, doc);
    }
    return static_cast<int>(kPass);
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finsler curvature inspection, identity verification and detection", "finsler"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  InspectOptions io;
  auto* inspect = app.add_subcommand("inspect", "Curvature summary at one tangent point");
  inspect->add_option("spec", io.spec_path, "Metric spec (JSON)")->required();
  inspect->add_option("--x", io.x, "Position, comma separated")->delimiter(',');
  inspect->add_option("--y", io.y, "Tangent vector, comma separated")->delimiter(',');
  inspect->add_option("--report", io.report_path, "Write a JSON report");
  inspect->add_flag("--quiet", io.quiet, "Suppress the summary");

  VerifyOptions vo;
  auto* verify = app.add_subcommand("verify", "Run identity checks on sampled tangent points");
  verify->add_option("spec", vo.spec_path, "Metric spec (JSON)")->required();
  verify->add_option("--checks", vo.checks, "'all' or a comma-separated list")->delimiter(',');
  verify->add_option("--points", vo.points, "Tangent points per check");
  verify->add_option("--directions", vo.directions, "Directions per sampled position");
  verify->add_option("--seed", vo.seed, "Sampling seed");
  verify->add_option("--tol", vo.tol, "Pass tolerance on the normalized residual");
  verify->add_option("--jet-order", vo.jet_order, "Jet order override (0: per check)");
  verify->add_option("--threads", vo.threads, "Worker threads");
  verify->add_option("--isotropy", vo.isotropy, "automatic, predicted or fitted");
  verify->add_option("--report", vo.report_path, "Write a JSON report");
  verify->add_option("--csv", vo.csv_path, "Write per-point residuals as CSV");
  verify->add_flag("--quiet", vo.quiet, "Suppress the table");

  DetectOptions dop;
  auto* detect = app.add_subcommand("detect", "Classify a metric over a grid of positions");
  detect->add_option("spec", dop.spec_path, "Metric spec (JSON)")->required();
  detect->add_option("--grid", dop.grid, "Grid points per axis");
  detect->add_option("--seed", dop.seed, "Direction seed");
  detect->add_option("--report", dop.report_path, "Write a JSON report");
  detect->add_flag("--quiet", dop.quiet, "Suppress the per-point table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kPass;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  if (inspect->parsed()) return cmd_inspect(io, out, err);
  if (verify->parsed()) return cmd_verify(vo, out, err);
  return cmd_detect(dop, out, err);
}

}  // namespace finsler::cli
