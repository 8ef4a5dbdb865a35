#include "kinkqr/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace kinkqr {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

double round_number(double value) {
  if (!std::isfinite(value)) return value;
  return std::strtod(format_number(value).c_str(), nullptr);
}

nlohmann::json number(double value) {
  if (!std::isfinite(value)) return nullptr;
  return round_number(value);
}

nlohmann::json to_json(const Eigen::VectorXd& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
  return out;
}

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  auto data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(number(m(r, c)));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

nlohmann::json to_json(const KinkFit& fit) {
  auto levels = nlohmann::json::array();
  for (std::size_t k = 0; k < fit.taus.size(); ++k) {
    const auto& e = fit.eta_hat[k];
    nlohmann::json level = {{"tau", number(fit.taus[k])},
                            {"alpha", number(e[0])},
                            {"beta1", number(e[1])},
                            {"beta2", number(e[2])},
                            {"gamma", to_json(Eigen::VectorXd(e.tail(e.size() - 3)))}};
    levels.push_back(level);
  }
  return {{"t_hat", number(fit.t_hat)},
          {"objective", number(fit.objective)},
          {"search_interval", {number(fit.search.lower), number(fit.search.upper)}},
          {"levels", levels},
          {"diagnostics",
           {{"evaluations", fit.diagnostics.evaluations},
            {"failed_grid_points", fit.diagnostics.failed_grid_points},
            {"solver_iterations", fit.diagnostics.solver_iterations},
            {"degenerate_vertex", fit.diagnostics.degenerate_vertex},
            {"joint_noncrossing", fit.diagnostics.joint_noncrossing},
            {"warnings", fit.diagnostics.warnings}}}};
}

nlohmann::json to_json(const CovarianceEstimate& cov) {
  auto bw = nlohmann::json::array();
  for (double b : cov.bandwidths) bw.push_back(number(b));
  return {{"se", to_json(cov.se)},
          {"se_t", number(cov.se_t())},
          {"lambda", to_json(cov.lambda)},
          {"h", to_json(cov.h)},
          {"sigma", to_json(cov.sigma)},
          {"bandwidths", bw},
          {"zero_density_fraction", number(cov.zero_density_fraction)},
          {"warnings", cov.warnings}};
}

nlohmann::json to_json(const SlrResult& r, bool include_bootstrap) {
  nlohmann::json out = {{"tau", number(r.tau)},
                        {"statistic", number(r.statistic)},
                        {"p_value", r.p_value < 0 ? nlohmann::json(nullptr) : number(r.p_value)},
                        {"B", r.B},
                        {"seed", r.seed},
                        {"grid", {{"points", r.t_grid.size()},
                                  {"lower", number(r.t_grid.empty() ? NAN : r.t_grid.front())},
                                  {"upper", number(r.t_grid.empty() ? NAN : r.t_grid.back())},
                                  {"dropped", r.dropped_grid_points}}},
                        {"null_fit", {{"coefficients", to_json(r.null_fit.coefficients)},
                                      {"objective", number(r.null_fit.objective)}}},
                        {"alt_fit", {{"t", number(r.t_hat)}, {"coefficients", to_json(r.eta_hat)}}},
                        {"warnings", r.warnings}};
  if (include_bootstrap) {
    auto stats = nlohmann::json::array();
    for (double s : r.bootstrap_stats) stats.push_back(number(s));
    out["bootstrap_stats"] = stats;
  }
  return out;
}

nlohmann::json to_json(const RankScoreResult& r) {
  return {{"t0", number(r.t0)},     {"T", to_json(r.T)},        {"Psi", to_json(r.Psi)},
          {"statistic", number(r.statistic)}, {"df", r.df}, {"p_value", number(r.p_value)},
          {"reject", r.reject},     {"warnings", r.warnings}};
}

nlohmann::json to_json(const IntervalResult& r) {
  nlohmann::json meta;
  switch (r.method) {
    case IntervalMethod::Wald: meta = {{"se", number(r.se)}, {"degenerate", r.degenerate}}; break;
    case IntervalMethod::Qrs:
      meta = {{"delta", number(r.delta)},
              {"steps_lower", r.steps_lower},
              {"steps_upper", r.steps_upper},
              {"open_lower", r.open_lower},
              {"open_upper", r.open_upper}};
      break;
    case IntervalMethod::Boot:
      meta = {{"B", r.B}, {"seed", r.seed}, {"failed_replicates", r.failed_replicates}};
      break;
  }
  return {{"method", to_string(r.method)}, {"estimate", number(r.estimate)}, {"lower", number(r.lower)},
          {"upper", number(r.upper)},      {"alpha", number(r.alpha)},       {"meta", meta},
          {"warnings", r.warnings}};
}

nlohmann::json to_json(const CommonalityResult& r) {
  auto t = nlohmann::json::array();
  for (double v : r.t_hats) t.push_back(number(v));
  return {{"t_hats", t},
          {"contrasts", to_json(r.contrasts)},
          {"covariance", to_json(r.covariance)},
          {"statistic", number(r.statistic)},
          {"df", r.df},
          {"p_value", number(r.p_value)},
          {"cross_covariance", r.cross_covariance},
          {"warnings", r.warnings}};
}

nlohmann::json to_json(const McReport& report) {
  auto rows = nlohmann::json::array();
  for (const auto& r : report.estimators) {
    rows.push_back({{"case", r.case_id}, {"N", r.N}, {"estimator", r.estimator}, {"bias", number(r.bias)},
                    {"sd", number(r.sd)}, {"ese", number(r.ese)}, {"mse", number(r.mse)}, {"ecp", number(r.ecp)},
                    {"mean_seconds", number(r.mean_seconds)}, {"reps", r.reps}, {"failures", r.failures}});
  }
  for (const auto& r : report.intervals) {
    rows.push_back({{"case", r.case_id}, {"N", r.N}, {"method", r.method}, {"ecp", number(r.ecp)},
                    {"eml", number(r.eml)}, {"mean_seconds", number(r.mean_seconds)}, {"reps", r.reps},
                    {"failures", r.failures}});
  }
  for (const auto& r : report.power) {
    rows.push_back({{"case", r.case_id}, {"N", r.N}, {"tau", number(r.tau)}, {"delta_beta", number(r.delta_beta)},
                    {"power", number(r.power)}, {"mc_se", number(r.mc_se)}, {"reps", r.reps},
                    {"failures", r.failures}});
  }
  return {{"kind", report.kind}, {"reps", report.reps}, {"seed", report.seed}, {"rows", rows},
          {"warnings", report.warnings}};
}

namespace {

void flatten(const nlohmann::json& node, const std::string& path, std::ostringstream& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) flatten(*it, path.empty() ? it.key() : path + "." + it.key(), out);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) flatten(node[i], path + "." + std::to_string(i), out);
  } else {
    out << path << ',';
    if (node.is_number_float()) {
      out << format_number(node.get<double>());
    } else if (node.is_string()) {
      const auto s = node.get<std::string>();
      if (s.find_first_of(",\"\n") == std::string::npos) {
        out << s;
      } else {
        out << '"';
        for (char c : s) {
          if (c == '"') out << '"';
          out << c;
        }
        out << '"';
      }
    } else {
      out << node.dump();
    }
    out << '\n';
  }
}

}  // namespace

std::string flatten_to_csv(const nlohmann::json& doc) {
  std::ostringstream out;
  out << "key,value\n";
  flatten(doc, "", out);
  return out.str();
}

}  // namespace kinkqr
