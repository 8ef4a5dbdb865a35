#pragma once

#include <Eigen/Dense>

#include "kinkqr/dataset.hpp"
#include "kinkqr/kink_estimator.hpp"

namespace kinkqr {

// Kink model fitted by least squares with the same grid-then-Brent profile
// over t; OLS inner step.
struct LsKinkFit {
  double t_hat = 0.0;
  Eigen::VectorXd coefficients;  // (alpha, beta1, beta2, gamma)
  double objective = 0.0;        // mean squared residual
  Eigen::MatrixXd covariance;    // cluster-robust (by subject) for (coefficients, t)
  double se_t = 0.0;
  SearchInterval search;
};

// Mean squared residual of the OLS fit at fixed t; coefficients written to `beta` when non-null.
double least_squares_profile(const LongitudinalDataset& data, double t, Eigen::VectorXd* beta = nullptr);

LsKinkFit estimate_least_squares(const LongitudinalDataset& data, const SearchSpec& spec = {});

}  // namespace kinkqr
