#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkqr/covariance.hpp"
#include "kinkqr/kink_estimator.hpp"
#include "kinkqr/rankscore.hpp"

namespace kinkqr {

enum class IntervalMethod { Wald, Boot, Qrs };

std::string to_string(IntervalMethod method);
IntervalMethod parse_interval_method(const std::string& text);

struct IntervalResult {
  IntervalMethod method = IntervalMethod::Wald;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
  double se = 0.0;     // wald
  double delta = 0.0;  // qrs step
  int steps_lower = 0;
  int steps_upper = 0;
  bool open_lower = false;  // qrs: no rejection before the search limit
  bool open_upper = false;
  bool degenerate = false;  // wald: zero standard error
  int B = 0;                // boot
  std::uint64_t seed = 0;
  int failed_replicates = 0;
  std::vector<std::string> warnings;

  double length() const { return upper - lower; }
};

struct InversionOptions {
  double delta = 0.0;  // <= 0 selects (x range) / 400
  int max_steps = 200;
  RankScoreOptions rank;  // alpha is taken from here
};

// Steps t_hat +- k delta until the rank score test first rejects; each bound
// is the last accepted point. Steps never leave the default search interval.
IntervalResult invert_ci(const LongitudinalDataset& data, const QuantileGrid& taus, double t_hat,
                         const InversionOptions& options = {});

// t_hat +- z_{alpha/2} SE(t_hat).
IntervalResult wald_ci(const KinkFit& fit, const CovarianceEstimate& covariance, double alpha = 0.05);

// Resamples subjects with replacement and takes type-7 (alpha/2, 1 - alpha/2)
// quantiles of the re-estimated kink locations.
IntervalResult subject_bootstrap_ci(const LongitudinalDataset& data, const QuantileGrid& taus, const SearchSpec& spec,
                                    int B, double alpha, std::uint64_t seed);

// Sample quantile, linear interpolation between order statistics (type 7).
double quantile_type7(std::vector<double> values, double p);

struct CommonalityResult {
  std::vector<double> t_hats;     // per-level single-quantile estimates
  Eigen::VectorXd contrasts;      // successive differences
  Eigen::MatrixXd covariance;     // joint covariance of the t_hats
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool cross_covariance = true;  // false: independence approximation
  std::vector<std::string> warnings;
};

// Wald test of equal kink locations across levels from K separate fits.
CommonalityResult commonality_wald_test(const LongitudinalDataset& data, const QuantileGrid& taus,
                                        const SearchSpec& spec = {},
                                        CorrelationKind kind = CorrelationKind::Exchangeable,
                                        bool cross_covariance = true);

}  // namespace kinkqr
