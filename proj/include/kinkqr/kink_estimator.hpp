#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkqr/dataset.hpp"
#include "kinkqr/qr_solver.hpp"

namespace kinkqr {

// Candidate kink locations [M1 + eps, M2 - eps], intersected with the open
// interval between the 2nd and (n-1)th order statistics of the pooled x.
struct SearchSpec {
  std::optional<double> m1;       // default: min x
  std::optional<double> m2;       // default: max x
  std::optional<double> epsilon;  // default: 0.5% of the x range
  int grid_points = 50;
  bool refine = true;
  SolverOptions solver;
};

struct SearchInterval {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::string> warnings;
};

SearchInterval resolve_search(const LongitudinalDataset& data, const SearchSpec& spec);

// `points` equally spaced interior points lower + (i + 1) (upper - lower) / (points + 1).
std::vector<double> search_grid(const SearchInterval& interval, int points);

struct ProfilePoint {
  double t = 0.0;
  double objective = 0.0;  // NaN when the inner fit failed
};

struct KinkDiagnostics {
  int evaluations = 0;
  int failed_grid_points = 0;
  int solver_iterations = 0;
  bool degenerate_vertex = false;  // more than p zero residuals at t_hat
  bool joint_noncrossing = false;  // ordering constraints were binding at t_hat
  std::vector<std::string> warnings;
};

struct KinkFit {
  QuantileGrid taus;
  double t_hat = 0.0;
  // Per level (alpha, beta1, beta2, gamma).
  std::vector<Eigen::VectorXd> eta_hat;
  // Per level residuals in dataset row order.
  std::vector<Eigen::VectorXd> residuals;
  double objective = 0.0;
  SearchInterval search;
  std::vector<ProfilePoint> profile_trace;
  KinkDiagnostics diagnostics;
};

// theta = (eta_1, ..., eta_K, t), length K (q + 3) + 1.
Eigen::VectorXd pack_theta(const std::vector<Eigen::VectorXd>& eta, double t);
Eigen::VectorXd pack_theta(const KinkFit& fit);

// S_n(theta) = n^-1 sum_k sum_ij rho_tau_k(y_ij - X_ij(t)' eta_k).
double composite_objective(const LongitudinalDataset& data, const QuantileGrid& taus, const Eigen::VectorXd& theta);

struct ProfileValue {
  double t = 0.0;
  double objective = 0.0;
  QrSolution solution;
};

// Inner step: non-crossing fit of all levels on the kink design at fixed t.
ProfileValue profile_objective(const LongitudinalDataset& data, const QuantileGrid& taus, double t,
                               const SolverOptions& options = {});

// Coarse grid over the search interval, then Brent refinement inside the
// cell around the best grid point.
KinkFit estimate(const LongitudinalDataset& data, const QuantileGrid& taus, const SearchSpec& spec = {});

// "t,objective" rows of the profile trace.
void write_profile_csv(std::ostream& out, const KinkFit& fit);

}  // namespace kinkqr
