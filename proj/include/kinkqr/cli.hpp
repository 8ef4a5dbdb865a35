#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kinkqr {

struct RunConfig {
  std::string command;  // fit, test-kink, ci, common-test, simulate, power
  std::string input;
  std::string taus = "0.3,0.4,0.5,0.6,0.7";
  std::optional<double> t_min;
  std::optional<double> t_max;
  int grid = 50;
  std::string corr = "exchangeable";
  std::optional<int> B;  // test-kink 300, ci boot 400, power 300
  std::string delta = "auto";
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: KINKQR_THREADS or hardware
  std::string format = "json";
  std::string output;    // empty: stdout
  std::string curves;    // fit: fitted-quantile CSV path
  std::string profile;   // fit: profile trace CSV path
  std::string method = "all";  // ci: wald, boot, qrs, all; simulate: table1, table2
  std::vector<int> cases{1};
  int N = 200;
  int reps = 200;
  std::string delta_beta = "0,0.1,0.2,0.3,0.4,0.5";
  std::string estimators = "lad,ls,cqr";
  int boot_reps = -1;
  bool independence_fallback = false;  // common-test without cross-level covariance
  bool progress = false;
};

// Executes one command. Results go to config.output (or `out`); failures are
// reported as {"error": {...}} on `out` with a nonzero return value.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace kinkqr
