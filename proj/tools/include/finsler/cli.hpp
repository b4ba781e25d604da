#pragma once

// The `finsler` command line: inspect, verify and detect.
//
// Exit codes: 0 all checks pass, 1 at least one check failed, 2 usage or
// parse error, 3 domain or precondition error.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace finsler::cli {

inline constexpr const char* kReportSchema = "finsler-report/1";
inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kPass = 0, kFail = 1, kUsage = 2, kDomain = 3 };

struct InspectOptions {
  std::string spec_path;
  std::vector<double> x;
  std::vector<double> y;
  std::string report_path;
  bool quiet = false;
};

struct VerifyOptions {
  std::string spec_path;
  std::vector<std::string> checks{"all"};
  int points = 50;
  int directions = 5;
  std::uint64_t seed = 42;
  double tol = 1e-5;
  int jet_order = 0;
  int threads = 1;
  std::string isotropy = "automatic";
  std::string report_path;
  std::string csv_path;
  bool quiet = false;
};

struct DetectOptions {
  std::string spec_path;
  int grid = 2;
  std::uint64_t seed = 42;
  std::string report_path;
  bool quiet = false;
};

int cmd_inspect(const InspectOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err);
int cmd_detect(const DetectOptions& opts, std::ostream& out, std::ostream& err);

// Parses argv and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// The report without its "timing" member, which is the only part allowed to
// differ between identical runs.
nlohmann::json payload(const nlohmann::json& report);

}  // namespace finsler::cli
