#include "kinkqr/interior_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kinkqr/error.hpp"

namespace kinkqr::lp {

void SegmentMatrix::reserve(std::size_t cols, std::size_t nnz) {
  start_.reserve(cols);
  len_.reserve(cols);
  offset_.reserve(cols);
  values_.reserve(nnz);
}

void SegmentMatrix::add_column(int start, std::span<const double> values) {
  const int len = static_cast<int>(values.size());
  if (start < 0 || start + len > rows_) fail(ErrorCode::InvalidInput, "segment outside matrix rows");
  start_.push_back(start);
  len_.push_back(len);
  offset_.push_back(values_.size());
  values_.insert(values_.end(), values.begin(), values.end());
}

void SegmentMatrix::multiply_add(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
  for (std::size_t j = 0; j < cols(); ++j) {
    const double s = v[static_cast<Eigen::Index>(j)];
    if (s == 0.0) continue;
    const double* a = values(j);
    double* o = out.data() + start_[j];
    for (int r = 0; r < len_[j]; ++r) o[r] += s * a[r];
  }
}

void SegmentMatrix::transpose_multiply(const Eigen::VectorXd& y, Eigen::VectorXd& out) const {
  out.resize(static_cast<Eigen::Index>(cols()));
  for (std::size_t j = 0; j < cols(); ++j) {
    const double* a = values(j);
    const double* yy = y.data() + start_[j];
    double acc = 0.0;
    for (int r = 0; r < len_[j]; ++r) acc += a[r] * yy[r];
    out[static_cast<Eigen::Index>(j)] = acc;
  }
}

void SegmentMatrix::weighted_gram(const Eigen::VectorXd& theta, Eigen::MatrixXd& out) const {
  out.setZero(rows_, rows_);
  for (std::size_t j = 0; j < cols(); ++j) {
    const double w = theta[static_cast<Eigen::Index>(j)];
    const double* a = values(j);
    const int s = start_[j];
    const int len = len_[j];
    for (int c = 0; c < len; ++c) {
      const double wc = w * a[c];
      double* col = out.data() + static_cast<Eigen::Index>(s + c) * rows_ + s;
      for (int r = c; r < len; ++r) col[r] += wc * a[r];
    }
  }
}

void DenseRows::weighted_gram(const Eigen::VectorXd& theta, Eigen::MatrixXd& out) const {
  const Eigen::Index p = d_.cols();
  out.setZero(p, p);
  double* o = out.data();
  for (Eigen::Index i = 0; i < d_.rows(); ++i) {
    const double* a = d_.data() + i * p;
    const double w = theta[i];
    for (Eigen::Index c = 0; c < p; ++c) {
      const double wc = w * a[c];
      double* col = o + c * p;
      for (Eigen::Index r = c; r < p; ++r) col[r] += wc * a[r];
    }
  }
}

namespace {

// Largest alpha keeping v + alpha * dv >= 0.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (dv[j] < 0.0) alpha = std::min(alpha, -v[j] / dv[j]);
  }
  return alpha;
}

// Upper-bound slacks s and their duals w are carried for every column; for
// one-sided columns mask = 0 pins w = 0, ds = 0, so they drop out.
template <class Matrix>
Result solve_impl(const Matrix& a, const Problem& problem, const Options& options) {
  const Eigen::Index n = static_cast<Eigen::Index>(a.cols());
  const Eigen::Index m = a.rows();
  if (problem.b.size() != m || problem.c.size() != n || problem.upper.size() != n ||
      problem.start.size() != n) {
    fail(ErrorCode::InvalidInput, "interior point problem has inconsistent dimensions");
  }

  Eigen::ArrayXd mask(n);
  for (Eigen::Index j = 0; j < n; ++j) mask[j] = std::isfinite(problem.upper[j]) ? 1.0 : 0.0;

  Eigen::VectorXd x = problem.start;
  Eigen::VectorXd s = (mask > 0.0).select(problem.upper.array() - x.array(), 1.0).matrix();

  // Dual start: least-squares fit of c on the columns, split into z, w.
  Eigen::MatrixXd normal;
  a.weighted_gram(Eigen::VectorXd::Ones(n), normal);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  a.multiply_add(problem.c, rhs);
  Eigen::VectorXd y = normal.selfadjointView<Eigen::Lower>().ldlt().solve(rhs);
  Eigen::VectorXd aty;
  a.transpose_multiply(y, aty);
  const Eigen::ArrayXd r0 = (problem.c - aty).array();
  const double shift = 0.1 * (1.0 + r0.abs().mean());
  Eigen::VectorXd z = (r0.max(0.0) + shift).matrix();
  Eigen::VectorXd w = (mask * ((-r0).max(0.0) + shift)).matrix();

  const double b_scale = 1.0 + problem.b.cwiseAbs().maxCoeff();
  const double c_scale = 1.0 + problem.c.cwiseAbs().maxCoeff();
  const double pairs = static_cast<double>(n) + mask.sum();

  Result result;
  Eigen::VectorXd rb(m), rc(n), theta(n), rho(n), dy(m), dx(n), ds(n), dz(n), dw(n);
  Eigen::VectorXd dx_aff(n), ds_aff(n), dz_aff(n), dw_aff(n), rxz(n), rsw(n), tmp(n);

  auto direction = [&](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    rho.array() = rc.array() - rxz.array() / x.array() + rsw.array() / s.array();
    rhs = rb;
    tmp = theta.cwiseProduct(rho);
    a.multiply_add(tmp, rhs);
    dy = llt.solve(rhs);
    a.transpose_multiply(dy, dx);
    dx.array() = theta.array() * (dx.array() - rho.array());
    dz.array() = (rxz.array() - z.array() * dx.array()) / x.array();
    ds.array() = -mask * dx.array();
    dw.array() = mask * (rsw.array() + w.array() * dx.array()) / s.array();
  };

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    rb = problem.b;
    tmp = -x;
    a.multiply_add(tmp, rb);  // b - A x
    a.transpose_multiply(y, aty);
    rc = problem.c - aty - z + w;

    const double gap = x.dot(z) + s.dot(w);
    const double primal_obj = problem.c.dot(x);
    result.iterations = iter;
    result.gap = gap;
    result.primal_residual = rb.cwiseAbs().maxCoeff() / b_scale;
    result.dual_residual = rc.cwiseAbs().maxCoeff() / c_scale;
    if (result.primal_residual <= options.feasibility_tolerance &&
        result.dual_residual <= options.feasibility_tolerance &&
        gap <= options.gap_tolerance * (1.0 + std::abs(primal_obj))) {
      result.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;

    theta.array() = 1.0 / (z.array() / x.array() + w.array() / s.array());
    a.weighted_gram(theta, normal);
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success) {
      normal.diagonal().array() += 1e-12 * (1.0 + normal.diagonal().cwiseAbs().maxCoeff());
      llt.compute(normal);
      if (llt.info() != Eigen::Success) break;
    }

    // Affine scaling predictor.
    rxz = -x.cwiseProduct(z);
    rsw = -s.cwiseProduct(w);
    direction(llt);
    double ap = std::min(1.0, std::min(max_step(x, dx), max_step(s, ds)));
    double ad = std::min(1.0, std::min(max_step(z, dz), max_step(w, dw)));
    const double mu = gap / pairs;
    const double mu_aff = ((x + ap * dx).dot(z + ad * dz) + (s + ap * ds).dot(w + ad * dw)) / pairs;
    const double sigma = std::pow(mu_aff / mu, 3.0);
    dx_aff = dx;
    ds_aff = ds;
    dz_aff = dz;
    dw_aff = dw;

    // Centering corrector.
    rxz.array() = sigma * mu - x.array() * z.array() - dx_aff.array() * dz_aff.array();
    rsw.array() = mask * (sigma * mu - s.array() * w.array() - ds_aff.array() * dw_aff.array());
    direction(llt);
    ap = std::min(1.0, 0.99995 * std::min(max_step(x, dx), max_step(s, ds)));
    ad = std::min(1.0, 0.99995 * std::min(max_step(z, dz), max_step(w, dw)));
    x += ap * dx;
    s += ap * ds;
    y += ad * dy;
    z += ad * dz;
    w += ad * dw;
  }

  result.x = std::move(x);
  result.multipliers = std::move(y);
  return result;
}

}  // namespace

Result solve(const SegmentMatrix& a, const Problem& problem, const Options& options) {
  return solve_impl(a, problem, options);
}

Result solve(const DenseRows& a, const Problem& problem, const Options& options) {
  return solve_impl(a, problem, options);
}

}  // namespace kinkqr::lp
