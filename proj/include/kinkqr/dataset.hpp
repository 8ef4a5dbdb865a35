#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kinkqr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Observation {
  double y = 0.0;
  double x = 0.0;
  std::vector<double> z;
};

struct Subject {
  std::string id;
  std::vector<Observation> observations;
};

struct ValidationIssue {
  std::string message;
  std::string subject_id;  // empty for dataset-level problems
  long row = -1;           // 0-based row within the subject, -1 if not row specific
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationIssue> issues;
  std::size_t q = 0;
  std::size_t num_subjects = 0;
  std::size_t num_observations = 0;
  std::vector<std::size_t> subject_sizes;
  double x_min = 0.0;
  double x_max = 0.0;

  // First issue as "message (subject s, row r)"; empty when ok.
  std::string summary() const;
};

ValidationReport validate(std::span<const Subject> subjects);

// Repeated-measures data: N subjects, subject i observed n_i times, each
// observation carrying a response y, a threshold covariate x and a length-q
// covariate vector z. Immutable once built; rows are stored pooled in subject
// order so that subject i owns rows [subject_begin(i), subject_end(i)).
class LongitudinalDataset {
 public:
  LongitudinalDataset() = default;

  // Throws Error(InvalidInput) with the validation summary if invalid.
  explicit LongitudinalDataset(std::span<const Subject> subjects);

  std::size_t num_subjects() const { return ids_.size(); }
  std::size_t num_observations() const { return y_.size(); }
  std::size_t z_dim() const { return q_; }

  const std::string& subject_id(std::size_t i) const { return ids_[i]; }
  std::size_t subject_begin(std::size_t i) const { return offsets_[i]; }
  std::size_t subject_end(std::size_t i) const { return offsets_[i + 1]; }
  std::size_t subject_size(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  // Subject index of every pooled row.
  const std::vector<std::size_t>& row_subject() const { return row_subject_; }

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& x() const { return x_; }
  const RowMatrix& z() const { return z_; }

  double x_min() const;
  double x_max() const;

  std::vector<Subject> to_subjects() const;

  // New dataset made of the listed subjects (repeats allowed). Repeated
  // subjects get distinct ids "<id>#<k>" so that they stay separate clusters.
  LongitudinalDataset select_subjects(std::span<const std::size_t> indices) const;

  // Copy with every x shifted by `offset`.
  LongitudinalDataset shift_x(double offset) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> row_subject_;
  Eigen::VectorXd y_;
  Eigen::VectorXd x_;
  RowMatrix z_;
  std::size_t q_ = 0;
};

// Ordered quantile levels tau_1 < ... < tau_K, each in [0.01, 0.99].
class QuantileGrid {
 public:
  QuantileGrid() = default;
  explicit QuantileGrid(std::vector<double> taus);

  std::size_t size() const { return taus_.size(); }
  double operator[](std::size_t k) const { return taus_[k]; }
  const std::vector<double>& values() const { return taus_; }
  auto begin() const { return taus_.begin(); }
  auto end() const { return taus_.end(); }

  // Parses "0.3,0.4,0.5".
  static QuantileGrid parse(const std::string& text);

 private:
  std::vector<double> taus_;
};

// (1, (x - t) 1[x <= t], (x - t) 1[x > t], z). Ties x == t fall in the left
// regime, so both kink carriers are zero there.
struct KinkDesignRow {
  Eigen::VectorXd values;
};

// (1, x, z).
struct NullDesignRow {
  Eigen::VectorXd values;
};

KinkDesignRow build_kink_design(double x, std::span<const double> z, double t);
NullDesignRow build_null_design(double x, std::span<const double> z);

// Pooled n x (q+3) kink design at t, rows in dataset order.
RowMatrix kink_design_matrix(const LongitudinalDataset& data, double t);
// Pooled n x (q+2) null design.
RowMatrix null_design_matrix(const LongitudinalDataset& data);

// CSV with header `subject,y,x,z1,...,zq`. Rows of a subject need not be
// contiguous; subjects are ordered by first appearance.
LongitudinalDataset read_csv(std::istream& in);
LongitudinalDataset read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const LongitudinalDataset& data);

// Shortest decimal text that parses back to exactly `value`.
std::string format_shortest(double value);

}  // namespace kinkqr
