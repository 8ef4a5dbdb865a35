#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kinkqr/covariance.hpp"
#include "kinkqr/dataset.hpp"
#include "kinkqr/intervals.hpp"
#include "kinkqr/kink_estimator.hpp"

namespace kinkqr {

struct McOptions {
  int reps = 200;
  std::vector<int> cases{1, 2, 3, 4};
  std::vector<int> Ns{200};
  std::uint64_t seed = 7;
  QuantileGrid cqr_taus{{0.3, 0.4, 0.5, 0.6, 0.7}};
  SearchSpec spec;
  CorrelationKind kind = CorrelationKind::Exchangeable;
  double alpha = 0.05;
  // Abort when a cell loses more than this fraction of replicates.
  double max_failure_rate = 0.05;
  bool progress = false;  // one line per finished replicate on stderr
};

// Seed of the simulated dataset for (case, N, replicate).
std::uint64_t replicate_seed(std::uint64_t seed, int case_id, int N, int rep);

struct EstimatorRow {
  int case_id = 1;
  int N = 200;
  std::string estimator;  // lad, ls, cqr
  double bias = 0.0;
  double sd = 0.0;
  double ese = 0.0;
  double mse = 0.0;
  double ecp = 0.0;
  double mean_seconds = 0.0;
  int reps = 0;
  int failures = 0;
  std::vector<double> t_hats;  // successful replicates, replicate order
  std::vector<double> ses;
};

struct CiRow {
  int case_id = 1;
  int N = 200;
  std::string method;  // wald, boot, qrs
  double ecp = 0.0;
  double eml = 0.0;
  double mean_seconds = 0.0;
  int reps = 0;
  int failures = 0;
};

struct PowerRow {
  int case_id = 1;
  int N = 200;
  double tau = 0.5;
  double delta_beta = 0.0;
  double power = 0.0;
  double mc_se = 0.0;
  int reps = 0;
  int failures = 0;
};

struct McReport {
  std::string kind;  // table1, table2, power
  int reps = 0;
  std::uint64_t seed = 0;
  std::vector<EstimatorRow> estimators;
  std::vector<CiRow> intervals;
  std::vector<PowerRow> power;
  std::vector<std::string> warnings;
};

// Bias, SD, ESE, MSE and Wald coverage of t_hat for lad (tau = 0.5), ls and
// cqr (options.cqr_taus).
McReport run_table1(const McOptions& options, const std::vector<std::string>& estimators = {"lad", "ls", "cqr"});

// Coverage, mean length and mean wall time of the interval methods for the
// cqr fit. The subject bootstrap runs only on the first `boot_reps`
// replicates of each cell (all when negative).
McReport run_table2(const McOptions& options, const std::vector<IntervalMethod>& methods, int B = 400,
                    int boot_reps = -1, const InversionOptions& inversion = {});

// Rejection rate of the bootstrap SLR test at level options.alpha.
McReport run_power(const McOptions& options, const std::vector<double>& delta_beta_grid,
                   const std::vector<double>& tau_grid, int B = 300);

// One row per cell; columns depend on the report kind.
void write_csv(std::ostream& out, const McReport& report);

}  // namespace kinkqr
