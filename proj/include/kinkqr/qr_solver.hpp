#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kinkqr/dataset.hpp"
#include "kinkqr/error.hpp"

namespace kinkqr {

// rho_tau(v) = v (tau - 1[v < 0]).
double check_loss(double v, double tau);

// psi_tau(v) = tau - 1[v <= 0]; note psi_tau(0) = tau - 1.
double psi(double v, double tau);

struct SolverOptions {
  double gap_tolerance = 1e-8;
  double feasibility_tolerance = 1e-9;
  int max_iterations = 200;
  // Fitted quantiles at adjacent levels may cross by at most this much.
  double crossing_tolerance = 1e-8;
  // Snap the interior point solution to the nearby basic (vertex) solution.
  bool purify = true;
};

struct QrFit {
  double tau = 0.5;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;  // basic observations carry exact zeros
  double objective = 0.0;     // mean check loss
  int zero_residuals = 0;
};

struct QrSolution {
  std::vector<QrFit> fits;
  double objective = 0.0;  // sum over levels of the mean check loss
  int iterations = 0;
  bool converged = true;
  bool degenerate = false;  // some level has more than p zero residuals
  bool joint = false;       // ordering constraints were binding, joint program solved
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& message, std::vector<Eigen::VectorXd> best)
      : Error(ErrorCode::NonConvergence, message), best_iterate_(std::move(best)) {}
  const std::vector<Eigen::VectorXd>& best_iterate() const { return best_iterate_; }

 private:
  std::vector<Eigen::VectorXd> best_iterate_;
};

// Minimises n^-1 sum rho_tau(y - design * beta). Requires n > p and a design
// of full column rank.
QrSolution fit_single(const RowMatrix& design, const Eigen::VectorXd& y, double tau,
                      const SolverOptions& options = {});

// Minimises the summed check loss over all levels subject to
// design_i * beta_{k+1} >= design_i * beta_k at every observed row. The
// levels are first fitted separately; the joint program is only solved when
// those separate fits cross. One level delegates to fit_single.
QrSolution fit_noncrossing(const RowMatrix& design, const Eigen::VectorXd& y, const QuantileGrid& taus,
                           const SolverOptions& options = {});

// Mean check loss of a coefficient vector.
double mean_check_loss(const RowMatrix& design, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                       double tau);

}  // namespace kinkqr
