#include "kinkqr/rankscore.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

namespace kinkqr {

RestrictedFit restricted_fit(const LongitudinalDataset& data, const QuantileGrid& taus, double t0,
                             const SolverOptions& options) {
  const auto solution = fit_noncrossing(kink_design_matrix(data, t0), data.y(), taus, options);
  RestrictedFit fit;
  fit.t0 = t0;
  fit.objective = solution.objective;
  for (const auto& f : solution.fits) {
    fit.coefficients.push_back(f.coefficients);
    fit.residuals.push_back(f.residuals);
  }
  return fit;
}

Eigen::VectorXd projected_score(const RowMatrix& m, const Eigen::VectorXd& b, const Eigen::VectorXd& weights) {
  if (b.size() != m.rows()) fail(ErrorCode::InvalidInput, "score length does not match the design");
  const bool weighted = weights.size() > 0;
  if (weighted && weights.size() != m.rows()) fail(ErrorCode::InvalidInput, "weight length does not match the design");
  Eigen::MatrixXd gram;
  Eigen::VectorXd rhs;
  if (weighted) {
    gram = m.transpose() * weights.asDiagonal() * m;
    rhs = m.transpose() * weights.cwiseProduct(b);
  } else {
    gram = m.transpose() * m;
    rhs = m.transpose() * b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0) || !(eig.eigenvalues().minCoeff() > 1e-12 * top)) {
    fail(ErrorCode::SingularDesign, "M' W M is singular in the score projection");
  }
  const Eigen::VectorXd coef = eig.eigenvectors() *
                               (eig.eigenvalues().cwiseInverse().asDiagonal() * (eig.eigenvectors().transpose() * rhs));
  return b - m * coef;
}

Eigen::VectorXd kink_derivative(const LongitudinalDataset& data, const Eigen::VectorXd& eta, double t0) {
  Eigen::VectorXd b(static_cast<Eigen::Index>(data.num_observations()));
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = data.x()[i] <= t0 ? -eta[1] : -eta[2];
  return b;
}

RankScoreResult rank_score_statistic(const LongitudinalDataset& data, const QuantileGrid& taus, double t0,
                                     const RankScoreOptions& options) {
  const auto fit = restricted_fit(data, taus, t0, options.solver);
  const RowMatrix m = kink_design_matrix(data, t0);
  const auto K = static_cast<Eigen::Index>(taus.size());
  const double n = static_cast<double>(data.num_observations());

  RankScoreResult result;
  result.t0 = t0;
  result.df = static_cast<int>(K);
  result.T.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    Eigen::VectorXd weights;
    if (!options.homoscedastic) {
      try {
        weights = difference_quotient_density(m, data.y(), taus[kk], options.solver).f_hat;
      } catch (const Error& e) {
        fail(ErrorCode::DensityEstimation, std::string("rank score density: ") + e.what());
      }
    }
    result.projected.push_back(projected_score(m, kink_derivative(data, fit.coefficients[kk], t0), weights));
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) s += result.projected[kk][i] * psi(fit.residuals[kk][i], taus[kk]);
    result.T[k] = s / std::sqrt(n);
  }

  const auto correlation = estimate_concordance(data, fit.residuals, taus, options.kind);
  result.warnings = correlation.warnings();
  result.Psi = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t i = 0; i < data.num_subjects(); ++i) {
    const auto b = static_cast<Eigen::Index>(data.subject_begin(i));
    const auto e = static_cast<Eigen::Index>(data.subject_end(i));
    for (Eigen::Index j = b; j < e; ++j) {
      for (Eigen::Index jj = b; jj < e; ++jj) {
        const auto lag = static_cast<std::size_t>(j > jj ? j - jj : jj - j);
        if (lag != 0 && correlation.kind() == CorrelationKind::Independence) continue;
        for (Eigen::Index k = 0; k < K; ++k) {
          const double tk = taus[static_cast<std::size_t>(k)];
          for (Eigen::Index l = 0; l < K; ++l) {
            const double tl = taus[static_cast<std::size_t>(l)];
            const double c = lag == 0 ? std::min(tk, tl) - tk * tl
                                      : correlation.xi(static_cast<std::size_t>(k), static_cast<std::size_t>(l), lag) -
                                            tk * tl;
            result.Psi(k, l) += c * result.projected[static_cast<std::size_t>(k)][j] *
                                result.projected[static_cast<std::size_t>(l)][jj];
          }
        }
      }
    }
  }
  result.Psi /= n;
  result.Psi = (0.5 * (result.Psi + result.Psi.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(result.Psi);
  if (!(eig.eigenvalues().minCoeff() >= 1e-10)) {
    fail(ErrorCode::NearSingular,
         "Psi has smallest eigenvalue below 1e-10; the score covariance must be positive definite");
  }
  const Eigen::VectorXd w = eig.eigenvectors().transpose() * result.T;
  result.statistic = (w.array().square() / eig.eigenvalues().array()).sum();
  const boost::math::chi_squared_distribution<double> chi(static_cast<double>(K));
  result.p_value = boost::math::cdf(boost::math::complement(chi, std::max(0.0, result.statistic)));
  result.reject = result.p_value < options.alpha;
  return result;
}

}  // namespace kinkqr
