#include "kinkqr/least_squares_kink.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

namespace kinkqr {

double least_squares_profile(const LongitudinalDataset& data, double t, Eigen::VectorXd* beta) {
  const RowMatrix design = kink_design_matrix(data, t);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) fail(ErrorCode::SingularDesign, "least squares kink design is rank deficient");
  const Eigen::VectorXd b = qr.solve(data.y());
  if (beta) *beta = b;
  return (data.y() - design * b).squaredNorm() / static_cast<double>(design.rows());
}

LsKinkFit estimate_least_squares(const LongitudinalDataset& data, const SearchSpec& spec) {
  LsKinkFit fit;
  fit.search = resolve_search(data, spec);
  const auto grid = search_grid(fit.search, spec.grid_points);
  std::size_t best = grid.size();
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double v = std::numeric_limits<double>::infinity();
    try {
      v = least_squares_profile(data, grid[i]);
    } catch (const Error&) {
    }
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  if (best == grid.size()) fail(ErrorCode::EstimationFailed, "least squares profile failed on the whole grid");
  double t_hat = grid[best];
  if (spec.refine) {
    const double a = best > 0 ? grid[best - 1] : fit.search.lower;
    const double b = best + 1 < grid.size() ? grid[best + 1] : fit.search.upper;
    auto f = [&](double t) {
      try {
        return least_squares_profile(data, t);
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    std::uintmax_t max_iter = 100;
    const auto [t_ref, v_ref] =
        boost::math::tools::brent_find_minima(f, a, b, std::numeric_limits<double>::digits / 2, max_iter);
    if (v_ref < best_value) t_hat = t_ref;
  }
  fit.t_hat = t_hat;
  fit.objective = least_squares_profile(data, t_hat, &fit.coefficients);

  const RowMatrix design = kink_design_matrix(data, t_hat);
  const auto n = design.rows();
  const auto p = design.cols();
  Eigen::MatrixXd g(n, p + 1);
  g.leftCols(p) = design;
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, p) = data.x()[i] <= t_hat ? -fit.coefficients[1] : -fit.coefficients[2];
  }
  const Eigen::VectorXd e = data.y() - design * fit.coefficients;
  const Eigen::MatrixXd bread = g.transpose() * g;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p + 1, p + 1);
  for (std::size_t i = 0; i < data.num_subjects(); ++i) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(p + 1);
    for (auto j = data.subject_begin(i); j < data.subject_end(i); ++j) {
      s += e[static_cast<Eigen::Index>(j)] * g.row(static_cast<Eigen::Index>(j)).transpose();
    }
    meat += s * s.transpose();
  }
  const Eigen::MatrixXd inv = bread.ldlt().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
  fit.covariance = inv * meat * inv;
  fit.se_t = std::sqrt(std::max(0.0, fit.covariance(p, p)));
  return fit;
}

}  // namespace kinkqr
