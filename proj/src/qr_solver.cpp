#include "kinkqr/qr_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "kinkqr/interior_point.hpp"

namespace kinkqr {

double check_loss(double v, double tau) {
  if (!std::isfinite(v) || !std::isfinite(tau)) fail(ErrorCode::InvalidInput, "non-finite check loss input");
  return v * (tau - (v < 0.0 ? 1.0 : 0.0));
}

double psi(double v, double tau) { return tau - (v <= 0.0 ? 1.0 : 0.0); }

double mean_check_loss(const RowMatrix& design, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                       double tau) {
  const Eigen::VectorXd r = y - design * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += check_loss(r[i], tau);
  return total / static_cast<double>(r.size());
}

namespace {

void check_problem(const RowMatrix& design, const Eigen::VectorXd& y) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (y.size() != n) fail(ErrorCode::InvalidInput, "response length does not match design rows");
  if (p == 0 || n <= p) fail(ErrorCode::InvalidInput, "quantile regression needs more rows than columns");
  if (!design.allFinite() || !y.allFinite()) fail(ErrorCode::InvalidInput, "non-finite design or response");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) fail(ErrorCode::SingularDesign, "design matrix is rank deficient");
}

double zero_tolerance(const Eigen::VectorXd& y) { return 1e-9 * (1.0 + y.cwiseAbs().maxCoeff()); }

void finish_fit(const RowMatrix& design, const Eigen::VectorXd& y, QrFit& fit) {
  fit.residuals = y - design * fit.coefficients;
  const double tol = zero_tolerance(y);
  fit.zero_residuals = 0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < fit.residuals.size(); ++i) {
    total += check_loss(fit.residuals[i], fit.tau);
    if (std::abs(fit.residuals[i]) <= tol) {
      fit.residuals[i] = 0.0;
      ++fit.zero_residuals;
    }
  }
  fit.objective = total / static_cast<double>(y.size());
}

// Replace an interior solution by the basic solution through the p rows with
// the smallest absolute residuals, when that vertex is at least as good.
void purify(const RowMatrix& design, const Eigen::VectorXd& y, QrFit& fit) {
  const auto n = design.rows();
  const auto p = design.cols();
  const Eigen::VectorXd r = y - design * fit.coefficients;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::partial_sort(order.begin(), order.begin() + std::min<Eigen::Index>(n, 4 * p), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return std::abs(r[a]) < std::abs(r[b]); });

  // Greedily pick rows that raise the rank.
  Eigen::MatrixXd basis(p, p);
  Eigen::VectorXd rhs(p);
  Eigen::Index chosen = 0;
  const auto limit = std::min<Eigen::Index>(n, 4 * p);
  for (Eigen::Index idx = 0; idx < limit && chosen < p; ++idx) {
    basis.row(chosen) = design.row(order[static_cast<std::size_t>(idx)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis.topRows(chosen + 1));
    lu.setThreshold(1e-10);
    if (lu.rank() == chosen + 1) {
      rhs[chosen] = y[order[static_cast<std::size_t>(idx)]];
      ++chosen;
    }
  }
  if (chosen < p) return;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
  const Eigen::VectorXd vertex = lu.solve(rhs);
  if (!vertex.allFinite()) return;
  double current = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) current += r[i] * (fit.tau - (r[i] < 0.0 ? 1.0 : 0.0));
  current /= static_cast<double>(n);
  const double candidate = mean_check_loss(design, y, vertex, fit.tau);
  if (candidate <= current + 1e-12 * (1.0 + current)) fit.coefficients = vertex;
}

lp::Options lp_options(const SolverOptions& options) {
  lp::Options o;
  o.gap_tolerance = options.gap_tolerance;
  o.feasibility_tolerance = options.feasibility_tolerance;
  o.max_iterations = options.max_iterations;
  return o;
}


// Rows sorted by (y, design row) so that solutions do not depend on the
// order in which observations arrive.
struct CanonicalRows {
  std::vector<Eigen::Index> order;
  RowMatrix design;
  Eigen::VectorXd y;
};

CanonicalRows canonicalize(const RowMatrix& design, const Eigen::VectorXd& y) {
  CanonicalRows c;
  const auto n = design.rows();
  const auto p = design.cols();
  c.order.resize(static_cast<std::size_t>(n));
  std::iota(c.order.begin(), c.order.end(), Eigen::Index{0});
  std::stable_sort(c.order.begin(), c.order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (y[a] != y[b]) return y[a] < y[b];
    for (Eigen::Index j = 0; j < p; ++j) {
      if (design(a, j) != design(b, j)) return design(a, j) < design(b, j);
    }
    return false;
  });
  c.design.resize(n, p);
  c.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c.design.row(i) = design.row(c.order[static_cast<std::size_t>(i)]);
    c.y[i] = y[c.order[static_cast<std::size_t>(i)]];
  }
  return c;
}

void restore_residuals(const CanonicalRows& c, QrSolution& solution) {
  for (auto& fit : solution.fits) {
    Eigen::VectorXd r(fit.residuals.size());
    for (std::size_t i = 0; i < c.order.size(); ++i) r[c.order[i]] = fit.residuals[static_cast<Eigen::Index>(i)];
    fit.residuals = std::move(r);
  }
}

QrSolution fit_single_sorted(const RowMatrix& design, const Eigen::VectorXd& y, double tau,
                             const SolverOptions& options) {
  const auto n = design.rows();
  const auto p = design.cols();

  lp::Problem problem{(1.0 - tau) * design.colwise().sum().transpose(), -y, Eigen::VectorXd::Ones(n),
                      Eigen::VectorXd::Constant(n, 1.0 - tau)};
  const auto result = lp::solve(lp::DenseRows(design), problem, lp_options(options));
  QrFit fit;
  fit.tau = tau;
  fit.coefficients = -result.multipliers;
  if (!result.converged) {
    throw NonConvergenceError("quantile regression did not converge in " + std::to_string(result.iterations) +
                                  " iterations",
                              {fit.coefficients});
  }
  if (options.purify) purify(design, y, fit);
  finish_fit(design, y, fit);

  QrSolution solution;
  solution.iterations = result.iterations;
  solution.objective = fit.objective;
  solution.degenerate = fit.zero_residuals > p;
  solution.fits.push_back(std::move(fit));
  return solution;
}

// Smallest design_i * (beta_{k+1} - beta_k) over rows and adjacent pairs.
double min_spacing(const RowMatrix& design, const std::vector<QrFit>& fits) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < fits.size(); ++k) {
    const Eigen::VectorXd diff = design * (fits[k + 1].coefficients - fits[k].coefficients);
    worst = std::min(worst, diff.minCoeff());
  }
  return worst;
}

bool has_intercept(const RowMatrix& design) { return (design.col(0).array() == 1.0).all(); }

QrSolution fit_noncrossing_sorted(const RowMatrix& design, const Eigen::VectorXd& y, const QuantileGrid& taus,
                                  const SolverOptions& options) {
  const auto levels = taus.size();
  QrSolution separate;
  for (double tau : taus) {
    auto s = fit_single_sorted(design, y, tau, options);
    separate.iterations += s.iterations;
    separate.degenerate = separate.degenerate || s.degenerate;
    separate.objective += s.objective;
    separate.fits.push_back(std::move(s.fits.front()));
  }
  if (min_spacing(design, separate.fits) >= -options.crossing_tolerance) return separate;

  const auto n = design.rows();
  const auto p = design.cols();
  const auto m = static_cast<Eigen::Index>(levels) * p;
  const auto constraints = static_cast<Eigen::Index>(levels - 1) * n;
  const auto cols = static_cast<Eigen::Index>(levels) * n + constraints;

  lp::SegmentMatrix a(static_cast<int>(m));
  lp::Problem problem{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(cols),
                      Eigen::VectorXd::Constant(cols, lp::kUnbounded), Eigen::VectorXd::Ones(cols)};
  a.reserve(static_cast<std::size_t>(cols), static_cast<std::size_t>((levels * n + 2 * constraints) * p));
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < levels; ++k) {
    const int start = static_cast<int>(static_cast<Eigen::Index>(k) * p);
    for (Eigen::Index i = 0; i < n; ++i, ++col) {
      a.add_column(start, std::span<const double>(design.row(i).data(), static_cast<std::size_t>(p)));
      problem.c[col] = -y[i];
      problem.upper[col] = 1.0;
      problem.start[col] = 1.0 - taus[k];
    }
    problem.b.segment(start, p) = (1.0 - taus[k]) * design.colwise().sum().transpose();
  }
  std::vector<double> pair(static_cast<std::size_t>(2 * p));
  for (std::size_t k = 0; k + 1 < levels; ++k) {
    const int start = static_cast<int>(static_cast<Eigen::Index>(k) * p);
    for (Eigen::Index i = 0; i < n; ++i, ++col) {
      for (Eigen::Index c = 0; c < p; ++c) {
        pair[static_cast<std::size_t>(c)] = -design(i, c);
        pair[static_cast<std::size_t>(p + c)] = design(i, c);
      }
      a.add_column(start, pair);
    }
  }

  auto lp_opts = lp_options(options);
  lp_opts.feasibility_tolerance = std::min(lp_opts.feasibility_tolerance, 1e-11);
  const auto result = lp::solve(a, problem, lp_opts);

  QrSolution joint;
  joint.joint = true;
  joint.iterations = separate.iterations + result.iterations;
  for (std::size_t k = 0; k < levels; ++k) {
    QrFit fit;
    fit.tau = taus[k];
    fit.coefficients = -result.multipliers.segment(static_cast<Eigen::Index>(k) * p, p);
    joint.fits.push_back(std::move(fit));
  }
  if (!result.converged) {
    std::vector<Eigen::VectorXd> best;
    for (const auto& f : joint.fits) best.push_back(f.coefficients);
    throw NonConvergenceError("non-crossing quantile regression did not converge in " +
                                  std::to_string(result.iterations) + " iterations",
                              std::move(best));
  }

  // Remove round-off level crossings by lifting the upper level's intercept.
  if (has_intercept(design)) {
    for (std::size_t k = 0; k + 1 < levels; ++k) {
      const Eigen::VectorXd diff = design * (joint.fits[k + 1].coefficients - joint.fits[k].coefficients);
      const double v = diff.minCoeff();
      if (v < 0.0 && v > -1e-6) joint.fits[k + 1].coefficients[0] -= v;
    }
  }
  if (min_spacing(design, joint.fits) < -options.crossing_tolerance) {
    fail(ErrorCode::Infeasible, "non-crossing constraints could not be satisfied");
  }

  for (auto& fit : joint.fits) {
    finish_fit(design, y, fit);
    joint.objective += fit.objective;
    joint.degenerate = joint.degenerate || fit.zero_residuals > p;
  }
  return joint;
}

}  // namespace

QrSolution fit_single(const RowMatrix& design, const Eigen::VectorXd& y, double tau, const SolverOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) fail(ErrorCode::InvalidInput, "tau must lie in (0, 1)");
  check_problem(design, y);
  const auto c = canonicalize(design, y);
  auto solution = fit_single_sorted(c.design, c.y, tau, options);
  restore_residuals(c, solution);
  return solution;
}

QrSolution fit_noncrossing(const RowMatrix& design, const Eigen::VectorXd& y, const QuantileGrid& taus,
                           const SolverOptions& options) {
  if (taus.size() == 1) return fit_single(design, y, taus[0], options);
  check_problem(design, y);
  const auto c = canonicalize(design, y);
  auto solution = fit_noncrossing_sorted(c.design, c.y, taus, options);
  restore_residuals(c, solution);
  return solution;
}

}  // namespace kinkqr
