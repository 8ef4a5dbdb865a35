#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkqr/dataset.hpp"
#include "kinkqr/kink_estimator.hpp"

namespace kinkqr {

// Linear (no kink) fit on (1, x, z).
struct NullFit {
  double tau = 0.5;
  Eigen::VectorXd coefficients;  // (alpha, beta, gamma)
  Eigen::VectorXd residuals;
  double objective = 0.0;  // mean check loss
};

NullFit null_objective(const LongitudinalDataset& data, double tau, const SolverOptions& options = {});

struct SlrResult {
  double tau = 0.5;
  double statistic = 0.0;  // n (null loss - min over the grid of the kink loss)
  double p_value = -1.0;   // -1 until bootstrapped
  int B = 0;
  std::uint64_t seed = 0;
  NullFit null_fit;
  std::vector<double> t_grid;
  std::vector<double> profile;  // kink loss per grid point, NaN where the fit failed
  double t_hat = 0.0;           // grid minimiser
  Eigen::VectorXd eta_hat;
  std::vector<double> bootstrap_stats;
  int dropped_grid_points = 0;
  std::vector<std::string> warnings;

  // Per grid point residuals of the kink fit, kept for the bootstrap.
  std::vector<Eigen::VectorXd> grid_residuals;
};

// Single-level profile over the estimator grid and the null fit.
SlrResult slr_statistic(const LongitudinalDataset& data, double tau, const SearchSpec& spec = {});

// Blockwise wild bootstrap: one N(0,1) multiplier per subject and replicate;
// replicate b draws from stream b of `seed`.
void bootstrap_pvalue(const LongitudinalDataset& data, SlrResult& result, int B, std::uint64_t seed,
                      const SolverOptions& options = {});

SlrResult slr_test(const LongitudinalDataset& data, double tau, const SearchSpec& spec, int B, std::uint64_t seed);

}  // namespace kinkqr
