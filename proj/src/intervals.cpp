#include "kinkqr/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "kinkqr/parallel.hpp"
#include "kinkqr/random.hpp"

namespace kinkqr {

std::string to_string(IntervalMethod method) {
  switch (method) {
    case IntervalMethod::Wald: return "wald";
    case IntervalMethod::Boot: return "boot";
    case IntervalMethod::Qrs: return "qrs";
  }
  return "wald";
}

IntervalMethod parse_interval_method(const std::string& text) {
  if (text == "wald") return IntervalMethod::Wald;
  if (text == "boot") return IntervalMethod::Boot;
  if (text == "qrs") return IntervalMethod::Qrs;
  fail(ErrorCode::InvalidInput, "unknown interval method '" + text + "'");
}

IntervalResult invert_ci(const LongitudinalDataset& data, const QuantileGrid& taus, double t_hat,
                         const InversionOptions& options) {
  if (options.max_steps < 1) fail(ErrorCode::InvalidInput, "max_steps must be positive");
  const auto interval = resolve_search(data, SearchSpec{});
  IntervalResult result;
  result.method = IntervalMethod::Qrs;
  result.estimate = t_hat;
  result.alpha = options.rank.alpha;
  result.delta = options.delta > 0.0 ? options.delta : (data.x_max() - data.x_min()) / 400.0;

  auto accepted = [&](double t0) {
    try {
      return !rank_score_statistic(data, taus, t0, options.rank).reject;
    } catch (const Error& e) {
      result.warnings.push_back("rank score test failed at t0 = " + format_shortest(t0) + ": " + e.what());
      return false;
    }
  };

  auto search = [&](double direction, int& steps, bool& open) {
    double last = t_hat;
    for (int k = 1; k <= options.max_steps; ++k) {
      const double t0 = t_hat + direction * k * result.delta;
      if (t0 <= interval.lower || t0 >= interval.upper) {
        open = true;
        result.warnings.push_back("inversion reached the edge of the search interval");
        return last;
      }
      if (!accepted(t0)) return last;
      last = t0;
      steps = k;
    }
    open = true;
    result.warnings.push_back("no rejection within max_steps; bound set to the search limit");
    return last;
  };

  result.upper = search(1.0, result.steps_upper, result.open_upper);
  result.lower = search(-1.0, result.steps_lower, result.open_lower);
  return result;
}

IntervalResult wald_ci(const KinkFit& fit, const CovarianceEstimate& covariance, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidInput, "alpha must lie in (0, 1)");
  IntervalResult result;
  result.method = IntervalMethod::Wald;
  result.estimate = fit.t_hat;
  result.alpha = alpha;
  result.se = covariance.se_t();
  const double z = boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), alpha / 2));
  result.lower = fit.t_hat - z * result.se;
  result.upper = fit.t_hat + z * result.se;
  if (result.se == 0.0) {
    result.degenerate = true;
    result.warnings.push_back("zero standard error; interval has zero width");
  }
  return result;
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) fail(ErrorCode::InvalidInput, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

IntervalResult subject_bootstrap_ci(const LongitudinalDataset& data, const QuantileGrid& taus, const SearchSpec& spec,
                                    int B, double alpha, std::uint64_t seed) {
  if (B < 100) fail(ErrorCode::InvalidInput, "the subject bootstrap needs B >= 100");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidInput, "alpha must lie in (0, 1)");
  const auto N = data.num_subjects();
  std::vector<double> draws(static_cast<std::size_t>(B), std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    auto rng = make_stream(seed, b);
    std::uniform_int_distribution<std::size_t> pick(0, N - 1);
    std::vector<std::size_t> idx(N);
    for (auto& i : idx) i = pick(rng);
    try {
      draws[b] = estimate(data.select_subjects(idx), taus, spec).t_hat;
    } catch (const Error&) {
    }
  });

  IntervalResult result;
  result.method = IntervalMethod::Boot;
  result.alpha = alpha;
  result.B = B;
  result.seed = seed;
  std::vector<double> ok;
  for (double d : draws) {
    if (std::isnan(d)) {
      ++result.failed_replicates;
    } else {
      ok.push_back(d);
    }
  }
  if (result.failed_replicates > 0.1 * B) {
    fail(ErrorCode::EstimationFailed,
         std::to_string(result.failed_replicates) + " of " + std::to_string(B) + " bootstrap replicates failed");
  }
  result.lower = quantile_type7(ok, alpha / 2);
  result.upper = quantile_type7(ok, 1.0 - alpha / 2);
  result.estimate = quantile_type7(ok, 0.5);
  return result;
}

namespace {

struct LevelFit {
  double tau = 0.5;
  double t = 0.0;
  Eigen::VectorXd eta;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd g;  // n x (p + 1): (X(t), b)
  Eigen::MatrixXd lambda_inv;
};

}  // namespace

CommonalityResult commonality_wald_test(const LongitudinalDataset& data, const QuantileGrid& taus,
                                        const SearchSpec& spec, CorrelationKind kind, bool cross_covariance) {
  const auto K = taus.size();
  if (K < 2) fail(ErrorCode::InvalidInput, "the commonality test needs at least two levels");
  const auto n = static_cast<Eigen::Index>(data.num_observations());
  const auto p = static_cast<Eigen::Index>(data.z_dim() + 3);

  std::vector<LevelFit> levels(K);
  parallel_for(K, [&](std::size_t k) {
    const QuantileGrid one({taus[k]});
    const auto fit = estimate(data, one, spec);
    auto& lf = levels[k];
    lf.tau = taus[k];
    lf.t = fit.t_hat;
    lf.eta = fit.eta_hat.front();
    lf.residuals = fit.residuals.front();
    const RowMatrix design = kink_design_matrix(data, lf.t);
    lf.g.resize(n, p + 1);
    lf.g.leftCols(p) = design;
    lf.g.col(p) = kink_derivative(data, lf.eta, lf.t);
    const auto f = difference_quotient_density(design, data.y(), lf.tau, spec.solver).f_hat;
    const Eigen::MatrixXd lambda = lf.g.transpose() * f.asDiagonal() * lf.g / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lambda);
    const double top = eig.eigenvalues().maxCoeff();
    const double bottom = eig.eigenvalues().minCoeff();
    if (!(bottom > 0.0) || top / bottom > 1e12) {
      fail(ErrorCode::NearSingular, "per-level Lambda is singular at tau = " + format_shortest(lf.tau));
    }
    lf.lambda_inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  });

  CommonalityResult result;
  result.cross_covariance = cross_covariance;
  std::vector<Eigen::VectorXd> residuals;
  for (const auto& lf : levels) {
    result.t_hats.push_back(lf.t);
    residuals.push_back(lf.residuals);
  }
  const auto correlation = estimate_concordance(data, residuals, taus, kind);
  result.warnings = correlation.warnings();

  const auto Ki = static_cast<Eigen::Index>(K);
  result.covariance = Eigen::MatrixXd::Zero(Ki, Ki);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = 0; l < K; ++l) {
      if (!cross_covariance && k != l) continue;
      const double tk = taus[k];
      const double tl = taus[l];
      Eigen::MatrixXd h = (std::min(tk, tl) - tk * tl) * levels[k].g.transpose() * levels[l].g;
      if (kind != CorrelationKind::Independence) {
        for (std::size_t i = 0; i < data.num_subjects(); ++i) {
          for (auto j = data.subject_begin(i); j < data.subject_end(i); ++j) {
            for (auto jj = data.subject_begin(i); jj < data.subject_end(i); ++jj) {
              if (j == jj) continue;
              const auto lag = j > jj ? j - jj : jj - j;
              const double c = correlation.xi(k, l, lag) - tk * tl;
              h += c * levels[k].g.row(static_cast<Eigen::Index>(j)).transpose() *
                   levels[l].g.row(static_cast<Eigen::Index>(jj));
            }
          }
        }
      }
      h /= static_cast<double>(n);
      const Eigen::MatrixXd cov = levels[k].lambda_inv * h * levels[l].lambda_inv / static_cast<double>(n);
      result.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = cov(p, p);
    }
  }
  result.covariance = (0.5 * (result.covariance + result.covariance.transpose())).eval();

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(Ki - 1, Ki);
  result.contrasts.resize(Ki - 1);
  for (Eigen::Index r = 0; r + 1 < Ki; ++r) {
    c(r, r) = -1.0;
    c(r, r + 1) = 1.0;
    result.contrasts[r] = result.t_hats[static_cast<std::size_t>(r + 1)] - result.t_hats[static_cast<std::size_t>(r)];
  }
  const Eigen::MatrixXd ccov = c * result.covariance * c.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ccov);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0) || !(eig.eigenvalues().minCoeff() > 1e-12 * top)) {
    fail(ErrorCode::NearSingular, "contrast covariance is singular");
  }
  const Eigen::VectorXd w = eig.eigenvectors().transpose() * result.contrasts;
  result.statistic = (w.array().square() / eig.eigenvalues().array()).sum();
  result.df = static_cast<int>(Ki - 1);
  const boost::math::chi_squared_distribution<double> chi(static_cast<double>(result.df));
  result.p_value = boost::math::cdf(boost::math::complement(chi, result.statistic));
  return result;
}

}  // namespace kinkqr
