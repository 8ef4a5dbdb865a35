#include "kinkqr/covariance.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

namespace kinkqr {

double hall_sheather_bandwidth(double tau, std::size_t n) {
  if (!(tau > 0.0 && tau < 1.0)) fail(ErrorCode::InvalidInput, "tau must lie in (0, 1)");
  if (n < 2) fail(ErrorCode::InvalidInput, "bandwidth needs n >= 2");
  const boost::math::normal_distribution<double> normal;
  const double z = boost::math::quantile(normal, tau);
  const double phi = boost::math::pdf(normal, z);
  double delta = 1.57 * std::cbrt(1.0 / static_cast<double>(n)) * std::cbrt(1.5 * phi * phi / (2.0 * z * z + 1.0));
  const double room = std::min(tau - 0.001, 0.999 - tau);
  if (delta >= room) delta = 0.99 * room;
  return delta;
}

DensityEstimate difference_quotient_density(const RowMatrix& design, const Eigen::VectorXd& y, double tau,
                                            const SolverOptions& options) {
  DensityEstimate d;
  d.tau = tau;
  d.bandwidth = hall_sheather_bandwidth(tau, static_cast<std::size_t>(design.rows()));
  Eigen::VectorXd spacing;
  try {
    const auto hi = fit_single(design, y, tau + d.bandwidth, options);
    const auto lo = fit_single(design, y, tau - d.bandwidth, options);
    spacing = design * (hi.fits.front().coefficients - lo.fits.front().coefficients);
  } catch (const Error& e) {
    fail(ErrorCode::DensityEstimation, std::string("density refit failed: ") + e.what());
  }
  d.f_hat.resize(spacing.size());
  for (Eigen::Index i = 0; i < spacing.size(); ++i) {
    if (spacing[i] > 1e-10) {
      d.f_hat[i] = 2.0 * d.bandwidth / spacing[i];
    } else {
      d.f_hat[i] = 0.0;
      ++d.zero_count;
    }
  }
  return d;
}

std::vector<DensityEstimate> estimate_density(const LongitudinalDataset& data, const QuantileGrid& taus, double t,
                                              const SolverOptions& options) {
  const RowMatrix design = kink_design_matrix(data, t);
  std::vector<DensityEstimate> out;
  for (double tau : taus) out.push_back(difference_quotient_density(design, data.y(), tau, options));
  return out;
}

std::vector<DensityEstimate> estimate_density(const LongitudinalDataset& data, const KinkFit& fit,
                                              const SolverOptions& options) {
  return estimate_density(data, fit.taus, fit.t_hat, options);
}

Eigen::VectorXd score_carrier(double x, std::span<const double> z, const std::vector<Eigen::VectorXd>& eta, double t,
                              std::size_t k) {
  if (k >= eta.size()) fail(ErrorCode::InvalidInput, "score carrier level out of range");
  const auto row = build_kink_design(x, z, t).values;
  const auto p = row.size();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(eta.size()) * p + 1);
  h.segment(static_cast<Eigen::Index>(k) * p, p) = row;
  h[h.size() - 1] = x <= t ? -eta[k][1] : -eta[k][2];
  return h;
}

CorrelationKind parse_correlation(const std::string& text) {
  if (text == "exchangeable") return CorrelationKind::Exchangeable;
  if (text == "ar1") return CorrelationKind::Ar1;
  if (text == "independence") return CorrelationKind::Independence;
  fail(ErrorCode::InvalidInput, "unknown correlation kind '" + text + "'");
}

std::string to_string(CorrelationKind kind) {
  switch (kind) {
    case CorrelationKind::Exchangeable: return "exchangeable";
    case CorrelationKind::Ar1: return "ar1";
    case CorrelationKind::Independence: return "independence";
  }
  return "independence";
}

WorkingCorrelation::WorkingCorrelation(CorrelationKind kind, std::vector<double> taus,
                                       std::vector<Eigen::MatrixXd> by_lag, std::vector<std::string> warnings)
    : kind_(kind), taus_(std::move(taus)), by_lag_(std::move(by_lag)), warnings_(std::move(warnings)) {}

double WorkingCorrelation::xi(std::size_t k, std::size_t l, std::size_t lag) const {
  if (kind_ == CorrelationKind::Independence || by_lag_.empty()) return taus_.at(k) * taus_.at(l);
  if (kind_ == CorrelationKind::Exchangeable) return by_lag_.front()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  const std::size_t d = std::clamp<std::size_t>(lag, 1, by_lag_.size());
  return by_lag_[d - 1](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
}

namespace {

double frechet_clip(double v, double a, double b) {
  return std::clamp(v, std::max(0.0, a + b - 1.0), std::min(a, b));
}

}  // namespace

WorkingCorrelation estimate_concordance(const LongitudinalDataset& data, const std::vector<Eigen::VectorXd>& residuals,
                                        const QuantileGrid& taus, CorrelationKind kind) {
  const auto levels = taus.size();
  if (residuals.size() != levels) fail(ErrorCode::InvalidInput, "one residual vector per level is required");
  for (const auto& r : residuals) {
    if (static_cast<std::size_t>(r.size()) != data.num_observations()) {
      fail(ErrorCode::InvalidInput, "residual length does not match the dataset");
    }
  }
  if (kind == CorrelationKind::Independence) return {kind, taus.values(), {}, {}};

  const auto K = static_cast<Eigen::Index>(levels);
  std::size_t max_size = 0;
  for (std::size_t i = 0; i < data.num_subjects(); ++i) max_size = std::max(max_size, data.subject_size(i));
  const std::size_t lags = max_size > 1 ? max_size - 1 : 0;

  // Ordered pairs (j, j') counted per lag |j - j'|.
  std::vector<Eigen::MatrixXd> hits(lags, Eigen::MatrixXd::Zero(K, K));
  std::vector<double> pairs(lags, 0.0);
  for (std::size_t i = 0; i < data.num_subjects(); ++i) {
    const auto b = data.subject_begin(i);
    const auto e = data.subject_end(i);
    for (std::size_t j = b; j < e; ++j) {
      for (std::size_t jj = b; jj < e; ++jj) {
        if (j == jj) continue;
        const std::size_t d = j > jj ? j - jj : jj - j;
        pairs[d - 1] += 1.0;
        for (Eigen::Index k = 0; k < K; ++k) {
          if (!(residuals[static_cast<std::size_t>(k)][static_cast<Eigen::Index>(j)] < 0.0)) continue;
          for (Eigen::Index l = 0; l < K; ++l) {
            if (residuals[static_cast<std::size_t>(l)][static_cast<Eigen::Index>(jj)] < 0.0) hits[d - 1](k, l) += 1.0;
          }
        }
      }
    }
  }

  std::vector<std::string> warnings;
  auto clip = [&](Eigen::MatrixXd m) {
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index l = 0; l < K; ++l) {
        m(k, l) = frechet_clip(m(k, l), taus[static_cast<std::size_t>(k)], taus[static_cast<std::size_t>(l)]);
      }
    }
    return m;
  };

  Eigen::MatrixXd pooled_hits = Eigen::MatrixXd::Zero(K, K);
  double pooled_pairs = 0.0;
  for (std::size_t d = 0; d < lags; ++d) {
    pooled_hits += hits[d];
    pooled_pairs += pairs[d];
  }
  Eigen::MatrixXd pooled(K, K);
  if (pooled_pairs > 0.0) {
    pooled = clip(pooled_hits / pooled_pairs);
  } else {
    warnings.push_back("no within-subject pairs; concordance set to independence");
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index l = 0; l < K; ++l) pooled(k, l) = taus[static_cast<std::size_t>(k)] * taus[static_cast<std::size_t>(l)];
    }
  }
  if (kind == CorrelationKind::Exchangeable) return {kind, taus.values(), {pooled}, std::move(warnings)};

  std::vector<Eigen::MatrixXd> by_lag;
  for (std::size_t d = 0; d < lags; ++d) {
    if (pairs[d] < 10.0) {
      warnings.push_back("fewer than 10 pairs at lag " + std::to_string(d + 1) + "; using the exchangeable estimate");
      by_lag.push_back(pooled);
    } else {
      by_lag.push_back(clip(hits[d] / pairs[d]));
    }
  }
  if (by_lag.empty()) by_lag.push_back(pooled);
  return {kind, taus.values(), std::move(by_lag), std::move(warnings)};
}

namespace {

// Compact carrier g_k = (X(t), b_k); h_k is g_k scattered into block k and
// the last slot. Sums of c g_k g_l' are accumulated in a K(p+1) square matrix
// and scattered once at the end.
struct CarrierTable {
  Eigen::Index p = 0;
  Eigen::Index levels = 0;
  RowMatrix design;      // n x p
  Eigen::MatrixXd slope;  // n x K, b_k per row

  CarrierTable(const LongitudinalDataset& data, const std::vector<Eigen::VectorXd>& eta, double t)
      : p(static_cast<Eigen::Index>(data.z_dim() + 3)),
        levels(static_cast<Eigen::Index>(eta.size())),
        design(kink_design_matrix(data, t)),
        slope(static_cast<Eigen::Index>(data.num_observations()), static_cast<Eigen::Index>(eta.size())) {
    for (const auto& e : eta) {
      if (e.size() != p) fail(ErrorCode::InvalidInput, "coefficient vector has the wrong length");
    }
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      for (Eigen::Index k = 0; k < levels; ++k) {
        slope(i, k) = data.x()[i] <= t ? -eta[static_cast<std::size_t>(k)][1] : -eta[static_cast<std::size_t>(k)][2];
      }
    }
  }

  Eigen::VectorXd g(Eigen::Index row, Eigen::Index k) const {
    Eigen::VectorXd v(p + 1);
    v.head(p) = design.row(row).transpose();
    v[p] = slope(row, k);
    return v;
  }

  Eigen::MatrixXd scatter(const Eigen::MatrixXd& compact) const {
    const Eigen::Index dim = levels * p + 1;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
    auto index = [&](Eigen::Index k, Eigen::Index a) { return a < p ? k * p + a : dim - 1; };
    for (Eigen::Index k = 0; k < levels; ++k) {
      for (Eigen::Index l = 0; l < levels; ++l) {
        for (Eigen::Index a = 0; a <= p; ++a) {
          for (Eigen::Index b = 0; b <= p; ++b) {
            out(index(k, a), index(l, b)) += compact(k * (p + 1) + a, l * (p + 1) + b);
          }
        }
      }
    }
    return out;
  }
};

}  // namespace

Eigen::MatrixXd assemble_lambda(const LongitudinalDataset& data, const std::vector<Eigen::VectorXd>& eta, double t,
                                const std::vector<DensityEstimate>& densities) {
  const CarrierTable table(data, eta, t);
  if (densities.size() != eta.size()) fail(ErrorCode::InvalidInput, "one density estimate per level is required");
  const Eigen::Index w = table.p + 1;
  Eigen::MatrixXd compact = Eigen::MatrixXd::Zero(table.levels * w, table.levels * w);
  for (Eigen::Index k = 0; k < table.levels; ++k) {
    const auto& f = densities[static_cast<std::size_t>(k)].f_hat;
    for (Eigen::Index i = 0; i < table.design.rows(); ++i) {
      const Eigen::VectorXd g = table.g(i, k);
      compact.block(k * w, k * w, w, w).noalias() += f[i] * g * g.transpose();
    }
  }
  return table.scatter(compact) / static_cast<double>(data.num_observations());
}

Eigen::MatrixXd assemble_h(const LongitudinalDataset& data, const QuantileGrid& taus,
                           const std::vector<Eigen::VectorXd>& eta, double t, const WorkingCorrelation& correlation) {
  const CarrierTable table(data, eta, t);
  const auto K = table.levels;
  const Eigen::Index w = table.p + 1;
  Eigen::MatrixXd compact = Eigen::MatrixXd::Zero(K * w, K * w);
  std::vector<Eigen::VectorXd> gs(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < data.num_subjects(); ++i) {
    const auto b = static_cast<Eigen::Index>(data.subject_begin(i));
    const auto e = static_cast<Eigen::Index>(data.subject_end(i));
    for (Eigen::Index j = b; j < e; ++j) {
      for (Eigen::Index k = 0; k < K; ++k) gs[static_cast<std::size_t>(k)] = table.g(j, k);
      for (Eigen::Index k = 0; k < K; ++k) {
        const double tk = taus[static_cast<std::size_t>(k)];
        for (Eigen::Index l = 0; l < K; ++l) {
          const double tl = taus[static_cast<std::size_t>(l)];
          const double c = std::min(tk, tl) - tk * tl;
          compact.block(k * w, l * w, w, w).noalias() +=
              c * gs[static_cast<std::size_t>(k)] * gs[static_cast<std::size_t>(l)].transpose();
        }
      }
      if (correlation.kind() == CorrelationKind::Independence) continue;
      for (Eigen::Index jj = b; jj < e; ++jj) {
        if (jj == j) continue;
        const auto lag = static_cast<std::size_t>(j > jj ? j - jj : jj - j);
        for (Eigen::Index l = 0; l < K; ++l) {
          const Eigen::VectorXd gl = table.g(jj, l);
          const double tl = taus[static_cast<std::size_t>(l)];
          for (Eigen::Index k = 0; k < K; ++k) {
            const double tk = taus[static_cast<std::size_t>(k)];
            const double c = correlation.xi(static_cast<std::size_t>(k), static_cast<std::size_t>(l), lag) - tk * tl;
            compact.block(k * w, l * w, w, w).noalias() += c * gs[static_cast<std::size_t>(k)] * gl.transpose();
          }
        }
      }
    }
  }
  Eigen::MatrixXd h = table.scatter(compact) / static_cast<double>(data.num_observations());
  return 0.5 * (h + h.transpose());
}

CovarianceEstimate assemble_sandwich(const LongitudinalDataset& data, const QuantileGrid& taus,
                                     const std::vector<Eigen::VectorXd>& eta, double t,
                                     const std::vector<DensityEstimate>& densities,
                                     const WorkingCorrelation& correlation) {
  CovarianceEstimate out;
  out.lambda = assemble_lambda(data, eta, t, densities);
  out.h = assemble_h(data, taus, eta, t, correlation);
  out.warnings = correlation.warnings();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.lambda);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  if (!(bottom > 0.0) || top / bottom > 1e12) {
    fail(ErrorCode::NearSingular,
         "estimated Lambda is singular or ill-conditioned; use more widely spaced quantile levels or more data");
  }
  const Eigen::MatrixXd inverse =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  out.sigma = inverse * out.h * inverse;
  out.sigma = (0.5 * (out.sigma + out.sigma.transpose())).eval();
  const double n = static_cast<double>(data.num_observations());
  out.se = (out.sigma.diagonal().array().max(0.0) / n).sqrt().matrix();

  int zeros = 0;
  for (const auto& d : densities) {
    zeros += d.zero_count;
    out.bandwidths.push_back(d.bandwidth);
  }
  out.zero_density_fraction = zeros / (n * static_cast<double>(densities.size()));
  if (out.zero_density_fraction >= 0.05) out.warnings.push_back("at least 5% of density estimates were clipped to zero");
  return out;
}

CovarianceEstimate assemble_sandwich(const LongitudinalDataset& data, const KinkFit& fit, CorrelationKind kind,
                                     const SolverOptions& options) {
  const auto densities = estimate_density(data, fit, options);
  const auto correlation = estimate_concordance(data, fit.residuals, fit.taus, kind);
  return assemble_sandwich(data, fit.taus, fit.eta_hat, fit.t_hat, densities, correlation);
}

}  // namespace kinkqr
