#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace kinkqr::lp {

// Sparse equality matrix whose every column is one contiguous segment of the
// row space. Quantile regression designs (segment = one coefficient block)
// and adjacent-level ordering constraints (segment = two neighbouring blocks)
// both have this shape, which keeps the normal equations cheap to form.
class SegmentMatrix {
 public:
  explicit SegmentMatrix(int rows = 0) : rows_(rows) {}

  void reserve(std::size_t cols, std::size_t nnz);
  void add_column(int start, std::span<const double> values);

  int rows() const { return rows_; }
  std::size_t cols() const { return start_.size(); }
  int start(std::size_t j) const { return start_[j]; }
  int length(std::size_t j) const { return len_[j]; }
  const double* values(std::size_t j) const { return values_.data() + offset_[j]; }

  // out += A * v
  void multiply_add(const Eigen::VectorXd& v, Eigen::VectorXd& out) const;
  // out = A^T y
  void transpose_multiply(const Eigen::VectorXd& y, Eigen::VectorXd& out) const;
  // A diag(theta) A^T, lower triangle filled
  void weighted_gram(const Eigen::VectorXd& theta, Eigen::MatrixXd& out) const;

 private:
  int rows_ = 0;
  std::vector<int> start_;
  std::vector<int> len_;
  std::vector<std::size_t> offset_;
  std::vector<double> values_;
};

// Equality matrix A = D^T for a dense row-major D (one LP column per row of D).
class DenseRows {
 public:
  explicit DenseRows(const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& d) : d_(d) {}

  int rows() const { return static_cast<int>(d_.cols()); }
  std::size_t cols() const { return static_cast<std::size_t>(d_.rows()); }

  void multiply_add(const Eigen::VectorXd& v, Eigen::VectorXd& out) const { out.noalias() += d_.transpose() * v; }
  void transpose_multiply(const Eigen::VectorXd& y, Eigen::VectorXd& out) const { out.noalias() = d_ * y; }
  // Lower triangle only.
  void weighted_gram(const Eigen::VectorXd& theta, Eigen::MatrixXd& out) const;

 private:
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& d_;
};

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// min c'x  s.t.  A x = b,  0 <= x <= upper  (upper may be kUnbounded).
struct Problem {
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd upper;
  Eigen::VectorXd start;  // strictly inside the bounds
};

struct Options {
  double gap_tolerance = 1e-8;
  double feasibility_tolerance = 1e-9;
  int max_iterations = 200;
};

struct Result {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // y in the dual  max b'y - upper'w,  A'y + z - w = c
  int iterations = 0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool converged = false;
};

// Mehrotra predictor-corrector primal-dual interior point method.
Result solve(const SegmentMatrix& a, const Problem& problem, const Options& options = {});
Result solve(const DenseRows& a, const Problem& problem, const Options& options = {});

}  // namespace kinkqr::lp
