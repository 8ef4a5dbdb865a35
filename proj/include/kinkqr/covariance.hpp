#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkqr/dataset.hpp"
#include "kinkqr/kink_estimator.hpp"

namespace kinkqr {

// Delta_n = 1.57 n^{-1/3} (1.5 phi(z)^2 / (2 z^2 + 1))^{1/3}, z = Phi^{-1}(tau),
// clipped so that tau +- Delta_n stays inside (0.001, 0.999).
double hall_sheather_bandwidth(double tau, std::size_t n);

// f_hat_i = max{0, 2 Delta / (x_i' (b(tau + Delta) - b(tau - Delta)))} from two
// refits on the same design. Spacings <= 1e-10 give 0.
struct DensityEstimate {
  double tau = 0.5;
  double bandwidth = 0.0;
  Eigen::VectorXd f_hat;
  int zero_count = 0;
};

DensityEstimate difference_quotient_density(const RowMatrix& design, const Eigen::VectorXd& y, double tau,
                                            const SolverOptions& options = {});

// One estimate per level of the kink design at fixed t.
std::vector<DensityEstimate> estimate_density(const LongitudinalDataset& data, const QuantileGrid& taus, double t,
                                              const SolverOptions& options = {});
std::vector<DensityEstimate> estimate_density(const LongitudinalDataset& data, const KinkFit& fit,
                                              const SolverOptions& options = {});

// h_k(W; theta): zeros except block k = X(t) and the last entry
// -beta1 1[x <= t] - beta2 1[x > t].
Eigen::VectorXd score_carrier(double x, std::span<const double> z, const std::vector<Eigen::VectorXd>& eta, double t,
                              std::size_t k);

enum class CorrelationKind { Exchangeable, Ar1, Independence };

CorrelationKind parse_correlation(const std::string& text);
std::string to_string(CorrelationKind kind);

// Within-subject probabilities that residuals at levels k and l are both
// negative for two distinct observations of one subject. Exchangeable pools
// all pairs, ar1 keeps one estimate per lag |j - j'|.
class WorkingCorrelation {
 public:
  WorkingCorrelation() = default;
  WorkingCorrelation(CorrelationKind kind, std::vector<double> taus, std::vector<Eigen::MatrixXd> by_lag,
                     std::vector<std::string> warnings);

  CorrelationKind kind() const { return kind_; }
  // xi^{(k,l)} for observations `lag` apart (lag >= 1).
  double xi(std::size_t k, std::size_t l, std::size_t lag) const;
  double delta(std::size_t k, std::size_t lag) const { return xi(k, k, lag); }
  std::size_t max_lag() const { return by_lag_.size(); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  CorrelationKind kind_ = CorrelationKind::Independence;
  std::vector<double> taus_;
  std::vector<Eigen::MatrixXd> by_lag_;  // entry d-1 holds lag d; a single entry for exchangeable
  std::vector<std::string> warnings_;
};

// residuals[k] in dataset row order. ar1 falls back to exchangeable, with a
// warning, when some lag has fewer than 10 pairs.
WorkingCorrelation estimate_concordance(const LongitudinalDataset& data, const std::vector<Eigen::VectorXd>& residuals,
                                        const QuantileGrid& taus, CorrelationKind kind);

struct CovarianceEstimate {
  Eigen::MatrixXd lambda;  // positive definite orientation
  Eigen::MatrixXd h;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd se;  // sqrt(diag(sigma) / n)
  double zero_density_fraction = 0.0;
  std::vector<double> bandwidths;
  std::vector<std::string> warnings;

  double se_t() const { return se[se.size() - 1]; }
};

// Lambda_n = n^-1 sum_k sum_ij f_ijk h_k h_k'.
Eigen::MatrixXd assemble_lambda(const LongitudinalDataset& data, const std::vector<Eigen::VectorXd>& eta, double t,
                                const std::vector<DensityEstimate>& densities);

// H_n with same-observation terms (tau_k ^ tau_l - tau_k tau_l) and
// within-subject pair terms (xi_kl - tau_k tau_l).
Eigen::MatrixXd assemble_h(const LongitudinalDataset& data, const QuantileGrid& taus,
                           const std::vector<Eigen::VectorXd>& eta, double t, const WorkingCorrelation& correlation);

CovarianceEstimate assemble_sandwich(const LongitudinalDataset& data, const QuantileGrid& taus,
                                     const std::vector<Eigen::VectorXd>& eta, double t,
                                     const std::vector<DensityEstimate>& densities,
                                     const WorkingCorrelation& correlation);

// Densities and concordance from the fit, then the sandwich.
CovarianceEstimate assemble_sandwich(const LongitudinalDataset& data, const KinkFit& fit, CorrelationKind kind,
                                     const SolverOptions& options = {});

}  // namespace kinkqr
