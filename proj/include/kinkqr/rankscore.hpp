#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkqr/covariance.hpp"
#include "kinkqr/dataset.hpp"
#include "kinkqr/qr_solver.hpp"

namespace kinkqr {

// Kink fit of every level with the kink held at t0 (jointly non-crossing).
struct RestrictedFit {
  double t0 = 0.0;
  std::vector<Eigen::VectorXd> coefficients;
  std::vector<Eigen::VectorXd> residuals;  // dataset row order
  double objective = 0.0;
};

RestrictedFit restricted_fit(const LongitudinalDataset& data, const QuantileGrid& taus, double t0,
                             const SolverOptions& options = {});

// b* = (I - M (M' W M)^-1 M' W) b with W = diag(weights); empty weights mean W = I.
Eigen::VectorXd projected_score(const RowMatrix& m, const Eigen::VectorXd& b, const Eigen::VectorXd& weights = {});

// Partial derivative of the level-k quantile in t: -beta1 1[x <= t0] - beta2 1[x > t0].
Eigen::VectorXd kink_derivative(const LongitudinalDataset& data, const Eigen::VectorXd& eta, double t0);

struct RankScoreOptions {
  CorrelationKind kind = CorrelationKind::Exchangeable;
  bool homoscedastic = false;  // W = I, no density estimates
  double alpha = 0.05;
  SolverOptions solver;
};

struct RankScoreResult {
  double t0 = 0.0;
  Eigen::VectorXd T;
  Eigen::MatrixXd Psi;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool reject = false;
  std::vector<Eigen::VectorXd> projected;  // b* per level
  std::vector<std::string> warnings;
};

// RS = T' Psi^-1 T with T_k = n^-1/2 sum b*_k psi_tau_k(u_k); chi-square(K) p-value.
RankScoreResult rank_score_statistic(const LongitudinalDataset& data, const QuantileGrid& taus, double t0,
                                     const RankScoreOptions& options = {});

}  // namespace kinkqr
