#include "kinkqr/kink_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <boost/math/tools/minima.hpp>

#include "kinkqr/parallel.hpp"

namespace kinkqr {

SearchInterval resolve_search(const LongitudinalDataset& data, const SearchSpec& spec) {
  const auto n = data.num_observations();
  if (n < 4) fail(ErrorCode::InvalidInput, "kink search needs at least 4 observations");
  if (spec.grid_points < 16) fail(ErrorCode::InvalidInput, "grid_points must be at least 16");
  std::vector<double> xs(data.x().data(), data.x().data() + n);
  std::sort(xs.begin(), xs.end());
  const double m1 = spec.m1.value_or(xs.front());
  const double m2 = spec.m2.value_or(xs.back());
  if (!std::isfinite(m1) || !std::isfinite(m2) || !(m1 < m2)) fail(ErrorCode::InvalidInput, "search bounds must satisfy M1 < M2");
  const double eps = spec.epsilon.value_or(0.005 * (xs.back() - xs.front()));
  if (!(eps >= 0.0)) fail(ErrorCode::InvalidInput, "epsilon must be non-negative");

  SearchInterval interval;
  interval.lower = m1 + eps;
  interval.upper = m2 - eps;
  const double second = xs[1];
  const double penultimate = xs[n - 2];
  if (interval.lower <= second) {
    interval.lower = second;
    interval.warnings.push_back("search lower bound raised to the second smallest x");
  }
  if (interval.upper >= penultimate) {
    interval.upper = penultimate;
    interval.warnings.push_back("search upper bound lowered to the second largest x");
  }
  if (!(interval.lower < interval.upper)) fail(ErrorCode::InvalidInput, "empty kink search interval");
  return interval;
}

std::vector<double> search_grid(const SearchInterval& interval, int points) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step = (interval.upper - interval.lower) / (points + 1);
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = interval.lower + (i + 1) * step;
  return grid;
}

Eigen::VectorXd pack_theta(const std::vector<Eigen::VectorXd>& eta, double t) {
  Eigen::Index size = 1;
  for (const auto& e : eta) size += e.size();
  Eigen::VectorXd theta(size);
  Eigen::Index at = 0;
  for (const auto& e : eta) {
    theta.segment(at, e.size()) = e;
    at += e.size();
  }
  theta[at] = t;
  return theta;
}

Eigen::VectorXd pack_theta(const KinkFit& fit) { return pack_theta(fit.eta_hat, fit.t_hat); }

double composite_objective(const LongitudinalDataset& data, const QuantileGrid& taus, const Eigen::VectorXd& theta) {
  const auto p = static_cast<Eigen::Index>(data.z_dim() + 3);
  const auto levels = static_cast<Eigen::Index>(taus.size());
  if (theta.size() != levels * p + 1) fail(ErrorCode::InvalidInput, "theta has the wrong dimension");
  const double t = theta[theta.size() - 1];
  const RowMatrix design = kink_design_matrix(data, t);
  double total = 0.0;
  for (Eigen::Index k = 0; k < levels; ++k) {
    const Eigen::VectorXd fitted = design * theta.segment(k * p, p);
    for (Eigen::Index i = 0; i < fitted.size(); ++i) {
      total += check_loss(data.y()[i] - fitted[i], taus[static_cast<std::size_t>(k)]);
    }
  }
  return total / static_cast<double>(data.num_observations());
}

ProfileValue profile_objective(const LongitudinalDataset& data, const QuantileGrid& taus, double t,
                               const SolverOptions& options) {
  if (!std::isfinite(t)) fail(ErrorCode::InvalidInput, "kink location must be finite");
  ProfileValue value;
  value.t = t;
  try {
    value.solution = fit_noncrossing(kink_design_matrix(data, t), data.y(), taus, options);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " (at t = " + format_shortest(t) + ")");
  }
  value.objective = value.solution.objective;
  return value;
}

KinkFit estimate(const LongitudinalDataset& data, const QuantileGrid& taus, const SearchSpec& spec) {
  if (taus.size() == 0) fail(ErrorCode::InvalidInput, "at least one quantile level is required");
  KinkFit fit;
  fit.taus = taus;
  fit.search = resolve_search(data, spec);
  fit.diagnostics.warnings = fit.search.warnings;

  const auto grid = search_grid(fit.search, spec.grid_points);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values(grid.size(), nan);
  std::vector<int> iterations(grid.size(), 0);
  parallel_for(grid.size(), [&](std::size_t i) {
    try {
      const auto v = profile_objective(data, taus, grid[i], spec.solver);
      values[i] = v.objective;
      iterations[i] = v.solution.iterations;
    } catch (const Error&) {
    }
  });

  int failures = 0;
  std::size_t best = grid.size();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    fit.profile_trace.push_back({grid[i], values[i]});
    fit.diagnostics.solver_iterations += iterations[i];
    if (std::isnan(values[i])) {
      ++failures;
      continue;
    }
    if (values[i] < lo) {
      lo = values[i];
      best = i;
    }
    hi = std::max(hi, values[i]);
  }
  fit.diagnostics.failed_grid_points = failures;
  fit.diagnostics.evaluations = static_cast<int>(grid.size());
  if (failures > 0.2 * static_cast<double>(grid.size())) {
    fail(ErrorCode::EstimationFailed,
         "inner fit failed at " + std::to_string(failures) + " of " + std::to_string(grid.size()) + " grid points");
  }
  if (hi - lo < 1e-12) {
    fail(ErrorCode::DegenerateProfile, "profile objective is flat over the search grid; the data show no kink");
  }

  double t_hat = grid[best];
  double best_value = lo;
  if (spec.refine) {
    const double a = best > 0 ? grid[best - 1] : fit.search.lower;
    const double b = best + 1 < grid.size() ? grid[best + 1] : fit.search.upper;
    auto f = [&](double t) {
      ++fit.diagnostics.evaluations;
      try {
        const auto v = profile_objective(data, taus, t, spec.solver);
        fit.diagnostics.solver_iterations += v.solution.iterations;
        fit.profile_trace.push_back({t, v.objective});
        return v.objective;
      } catch (const Error&) {
        fit.profile_trace.push_back({t, nan});
        return std::numeric_limits<double>::infinity();
      }
    };
    std::uintmax_t max_iter = 100;
    const auto [t_ref, v_ref] =
        boost::math::tools::brent_find_minima(f, a, b, std::numeric_limits<double>::digits / 2, max_iter);
    if (v_ref < best_value) {
      t_hat = t_ref;
      best_value = v_ref;
    }
    std::stable_sort(fit.profile_trace.begin(), fit.profile_trace.end(),
                     [](const ProfilePoint& l, const ProfilePoint& r) { return l.t < r.t; });
  }

  const auto final_fit = profile_objective(data, taus, t_hat, spec.solver);
  fit.t_hat = t_hat;
  fit.objective = composite_objective(data, taus, [&] {
    std::vector<Eigen::VectorXd> eta;
    for (const auto& f : final_fit.solution.fits) eta.push_back(f.coefficients);
    return pack_theta(eta, t_hat);
  }());
  for (const auto& f : final_fit.solution.fits) {
    fit.eta_hat.push_back(f.coefficients);
    fit.residuals.push_back(f.residuals);
  }
  fit.diagnostics.degenerate_vertex = final_fit.solution.degenerate;
  fit.diagnostics.joint_noncrossing = final_fit.solution.joint;
  return fit;
}

void write_profile_csv(std::ostream& out, const KinkFit& fit) {
  out << "t,objective\n";
  for (const auto& point : fit.profile_trace) {
    out << format_shortest(point.t) << ',' << (std::isnan(point.objective) ? "nan" : format_shortest(point.objective))
        << '\n';
  }
}

}  // namespace kinkqr
