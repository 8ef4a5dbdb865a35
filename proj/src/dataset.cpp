#include "kinkqr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "kinkqr/error.hpp"

namespace kinkqr {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::InvalidInput, std::string("non-finite ") + what);
}

}  // namespace

std::string ValidationReport::summary() const {
  if (issues.empty()) return {};
  const auto& first = issues.front();
  std::string s = first.message;
  if (!first.subject_id.empty()) {
    s += " (subject " + first.subject_id;
    if (first.row >= 0) s += ", row " + std::to_string(first.row);
    s += ")";
  }
  if (issues.size() > 1) s += " and " + std::to_string(issues.size() - 1) + " more issue(s)";
  return s;
}

ValidationReport validate(std::span<const Subject> subjects) {
  ValidationReport report;
  auto add = [&](std::string msg, std::string id = {}, long row = -1) {
    report.ok = false;
    report.issues.push_back({std::move(msg), std::move(id), row});
  };

  if (subjects.empty()) {
    add("no subjects");
    return report;
  }
  report.num_subjects = subjects.size();
  if (subjects.size() < 2) add("fewer than 2 subjects");

  bool have_q = false;
  report.x_min = std::numeric_limits<double>::infinity();
  report.x_max = -std::numeric_limits<double>::infinity();
  for (const auto& s : subjects) {
    report.subject_sizes.push_back(s.observations.size());
    report.num_observations += s.observations.size();
    if (s.observations.empty()) add("empty subject", s.id);
    for (std::size_t j = 0; j < s.observations.size(); ++j) {
      const auto& o = s.observations[j];
      if (!have_q) {
        report.q = o.z.size();
        have_q = true;
      } else if (o.z.size() != report.q) {
        add("inconsistent z dimension", s.id, static_cast<long>(j));
      }
      if (!std::isfinite(o.y) || !std::isfinite(o.x) || !all_finite(o.z)) {
        add("non-finite value", s.id, static_cast<long>(j));
      } else {
        report.x_min = std::min(report.x_min, o.x);
        report.x_max = std::max(report.x_max, o.x);
      }
    }
  }
  if (report.num_observations == 0) {
    report.x_min = report.x_max = 0.0;
  }
  return report;
}

LongitudinalDataset::LongitudinalDataset(std::span<const Subject> subjects) {
  const auto report = validate(subjects);
  if (!report.ok) fail(ErrorCode::InvalidInput, report.summary());

  q_ = report.q;
  const auto n = report.num_observations;
  y_.resize(static_cast<Eigen::Index>(n));
  x_.resize(static_cast<Eigen::Index>(n));
  z_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q_));
  row_subject_.reserve(n);
  ids_.reserve(subjects.size());

  Eigen::Index row = 0;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    ids_.push_back(subjects[i].id);
    for (const auto& o : subjects[i].observations) {
      y_[row] = o.y;
      x_[row] = o.x;
      for (std::size_t c = 0; c < q_; ++c) z_(row, static_cast<Eigen::Index>(c)) = o.z[c];
      row_subject_.push_back(i);
      ++row;
    }
    offsets_.push_back(static_cast<std::size_t>(row));
  }
}

double LongitudinalDataset::x_min() const { return x_.size() ? x_.minCoeff() : 0.0; }
double LongitudinalDataset::x_max() const { return x_.size() ? x_.maxCoeff() : 0.0; }

std::vector<Subject> LongitudinalDataset::to_subjects() const {
  std::vector<Subject> out(num_subjects());
  for (std::size_t i = 0; i < num_subjects(); ++i) {
    out[i].id = ids_[i];
    for (auto r = subject_begin(i); r < subject_end(i); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      Observation o{y_[row], x_[row], std::vector<double>(q_)};
      for (std::size_t c = 0; c < q_; ++c) o.z[c] = z_(row, static_cast<Eigen::Index>(c));
      out[i].observations.push_back(std::move(o));
    }
  }
  return out;
}

LongitudinalDataset LongitudinalDataset::select_subjects(std::span<const std::size_t> indices) const {
  auto all = to_subjects();
  std::vector<Subject> picked;
  picked.reserve(indices.size());
  std::vector<int> seen(num_subjects(), 0);
  for (auto idx : indices) {
    if (idx >= num_subjects()) fail(ErrorCode::InvalidInput, "subject index out of range");
    Subject s = all[idx];
    if (seen[idx]++ > 0) s.id += "#" + std::to_string(seen[idx] - 1);
    picked.push_back(std::move(s));
  }
  return LongitudinalDataset(picked);
}

LongitudinalDataset LongitudinalDataset::shift_x(double offset) const {
  LongitudinalDataset copy = *this;
  copy.x_.array() += offset;
  return copy;
}

QuantileGrid::QuantileGrid(std::vector<double> taus) : taus_(std::move(taus)) {
  if (taus_.empty()) fail(ErrorCode::InvalidInput, "quantile grid is empty");
  for (std::size_t k = 0; k < taus_.size(); ++k) {
    const double tau = taus_[k];
    if (!std::isfinite(tau) || tau < 0.01 || tau > 0.99)
      fail(ErrorCode::InvalidInput, "quantile level outside [0.01, 0.99]: " + format_shortest(tau));
    if (k > 0 && !(tau > taus_[k - 1]))
      fail(ErrorCode::InvalidInput, "quantile levels must be strictly increasing");
  }
}

QuantileGrid QuantileGrid::parse(const std::string& text) {
  std::vector<double> taus;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto* first = item.data();
    const auto* last = item.data() + item.size();
    while (first < last && *first == ' ') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
      fail(ErrorCode::InvalidInput, "cannot parse quantile level '" + item + "'");
    taus.push_back(v);
  }
  return QuantileGrid(std::move(taus));
}

KinkDesignRow build_kink_design(double x, std::span<const double> z, double t) {
  require_finite(x, "x");
  require_finite(t, "t");
  if (!all_finite(z)) fail(ErrorCode::InvalidInput, "non-finite z");
  KinkDesignRow row;
  row.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(z.size() + 3));
  row.values[0] = 1.0;
  if (x <= t) {
    row.values[1] = x - t;
  } else {
    row.values[2] = x - t;
  }
  for (std::size_t c = 0; c < z.size(); ++c) row.values[static_cast<Eigen::Index>(c + 3)] = z[c];
  return row;
}

NullDesignRow build_null_design(double x, std::span<const double> z) {
  require_finite(x, "x");
  if (!all_finite(z)) fail(ErrorCode::InvalidInput, "non-finite z");
  NullDesignRow row;
  row.values.resize(static_cast<Eigen::Index>(z.size() + 2));
  row.values[0] = 1.0;
  row.values[1] = x;
  for (std::size_t c = 0; c < z.size(); ++c) row.values[static_cast<Eigen::Index>(c + 2)] = z[c];
  return row;
}

RowMatrix kink_design_matrix(const LongitudinalDataset& data, double t) {
  require_finite(t, "t");
  const auto n = static_cast<Eigen::Index>(data.num_observations());
  const auto q = static_cast<Eigen::Index>(data.z_dim());
  RowMatrix m = RowMatrix::Zero(n, q + 3);
  const auto& x = data.x();
  for (Eigen::Index r = 0; r < n; ++r) {
    m(r, 0) = 1.0;
    if (x[r] <= t) {
      m(r, 1) = x[r] - t;
    } else {
      m(r, 2) = x[r] - t;
    }
  }
  if (q > 0) m.rightCols(q) = data.z();
  return m;
}

RowMatrix null_design_matrix(const LongitudinalDataset& data) {
  const auto n = static_cast<Eigen::Index>(data.num_observations());
  const auto q = static_cast<Eigen::Index>(data.z_dim());
  RowMatrix m(n, q + 2);
  m.col(0).setOnes();
  m.col(1) = data.x();
  if (q > 0) m.rightCols(q) = data.z();
  return m;
}

std::string format_shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& field, std::size_t line_no, const std::string& column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": cannot parse " + column +
                                    " value '" + field + "'");
  }
  return v;
}

}  // namespace

LongitudinalDataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, "line 1: missing header");
  ++line_no;
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "subject" || header[1] != "y" || header[2] != "x") {
    fail(ErrorCode::ParseError, "line 1: header must start with subject,y,x");
  }
  const std::size_t q = header.size() - 3;

  std::vector<Subject> subjects;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                      std::to_string(header.size()) + " fields, got " +
                                      std::to_string(fields.size()));
    }
    Observation o;
    o.y = parse_number(fields[1], line_no, "y");
    o.x = parse_number(fields[2], line_no, "x");
    o.z.resize(q);
    for (std::size_t c = 0; c < q; ++c) o.z[c] = parse_number(fields[c + 3], line_no, header[c + 3]);
    auto [it, inserted] = index.try_emplace(fields[0], subjects.size());
    if (inserted) subjects.push_back(Subject{fields[0], {}});
    subjects[it->second].observations.push_back(std::move(o));
  }
  return LongitudinalDataset(subjects);
}

LongitudinalDataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open " + path);
  return read_csv(in);
}

void write_csv(std::ostream& out, const LongitudinalDataset& data) {
  out << "subject,y,x";
  for (std::size_t c = 0; c < data.z_dim(); ++c) out << ",z" << (c + 1);
  out << '\n';
  for (std::size_t i = 0; i < data.num_subjects(); ++i) {
    for (auto r = data.subject_begin(i); r < data.subject_end(i); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      out << data.subject_id(i) << ',' << format_shortest(data.y()[row]) << ','
          << format_shortest(data.x()[row]);
      for (std::size_t c = 0; c < data.z_dim(); ++c)
        out << ',' << format_shortest(data.z()(row, static_cast<Eigen::Index>(c)));
      out << '\n';
    }
  }
}

}  // namespace kinkqr
