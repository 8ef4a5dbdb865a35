#include "kinkqr/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "kinkqr/covariance.hpp"
#include "kinkqr/dataset.hpp"
#include "kinkqr/dgp.hpp"
#include "kinkqr/intervals.hpp"
#include "kinkqr/kink_estimator.hpp"
#include "kinkqr/monte_carlo.hpp"
#include "kinkqr/parallel.hpp"
#include "kinkqr/rankscore.hpp"
#include "kinkqr/report.hpp"
#include "kinkqr/slr_test.hpp"

namespace kinkqr {

namespace {

using nlohmann::json;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidInput, "cannot parse number '" + item + "'");
    }
  }
  return out;
}

SearchSpec search_spec(const RunConfig& c) {
  SearchSpec spec;
  spec.m1 = c.t_min;
  spec.m2 = c.t_max;
  spec.grid_points = c.grid;
  return spec;
}

json provenance(const RunConfig& c) {
  json config = {{"command", c.command}, {"taus", c.taus},     {"grid", c.grid},   {"corr", c.corr},
                 {"delta", c.delta},     {"alpha", c.alpha},   {"seed", c.seed},   {"format", c.format},
                 {"method", c.method}};
  if (!c.input.empty()) config["input"] = c.input;
  if (c.t_min) config["t_min"] = number(*c.t_min);
  if (c.t_max) config["t_max"] = number(*c.t_max);
  if (c.B) config["B"] = *c.B;
  if (c.command == "simulate" || c.command == "power") {
    config["cases"] = c.cases;
    config["N"] = c.N;
    config["reps"] = c.reps;
    if (c.command == "power") config["delta_beta"] = c.delta_beta;
    if (c.command == "simulate") {
      config["estimators"] = c.estimators;
      config["boot_reps"] = c.boot_reps;
    }
  }
  return {{"tool", "kinkqr"}, {"version", KINKQR_VERSION}, {"seed", c.seed}, {"config", config}};
}

void check_config(const RunConfig& c) {
  if (!(c.alpha > 0.0 && c.alpha <= 0.5)) fail(ErrorCode::InvalidInput, "alpha must lie in (0, 0.5]");
  if (c.B && *c.B < 100) fail(ErrorCode::InvalidInput, "B must be at least 100");
  if (c.format != "json" && c.format != "csv") fail(ErrorCode::InvalidInput, "format must be json or csv");
  if (c.threads < 0) fail(ErrorCode::InvalidInput, "threads must be non-negative");
}

LongitudinalDataset load(const RunConfig& c) {
  if (c.input.empty()) fail(ErrorCode::InvalidInput, "--input is required for " + c.command);
  return read_csv_file(c.input);
}

// Fitted quantile curves over an x grid with z held at its sample mean.
void write_curves(const std::string& path, const LongitudinalDataset& data, const KinkFit& fit) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::InvalidInput, "cannot write " + path);
  const Eigen::VectorXd zbar = data.z_dim() > 0 ? Eigen::VectorXd(data.z().colwise().mean().transpose())
                                                : Eigen::VectorXd(0);
  f << "x";
  for (double tau : fit.taus) f << ",q" << format_number(tau);
  f << '\n';
  const int points = 201;
  for (int i = 0; i < points; ++i) {
    const double x = data.x_min() + (data.x_max() - data.x_min()) * i / (points - 1);
    const auto row = build_kink_design(x, std::span<const double>(zbar.data(), static_cast<std::size_t>(zbar.size())),
                                       fit.t_hat)
                         .values;
    f << format_number(x);
    for (const auto& eta : fit.eta_hat) f << ',' << format_number(row.dot(eta));
    f << '\n';
  }
}

json command_fit(const RunConfig& c, const LongitudinalDataset& data) {
  const auto taus = QuantileGrid::parse(c.taus);
  const auto fit = estimate(data, taus, search_spec(c));
  json out = {{"fit", to_json(fit)}};
  try {
    const auto cov = assemble_sandwich(data, fit, parse_correlation(c.corr));
    out["covariance"] = to_json(cov);
    out["wald_ci"] = to_json(wald_ci(fit, cov, c.alpha));
  } catch (const Error& e) {
    out["covariance"] = {{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}};
  }
  std::string curves = c.curves;
  if (curves.empty() && !c.output.empty()) curves = c.output + ".curves.csv";
  if (!curves.empty()) {
    write_curves(curves, data, fit);
    out["curves_csv"] = curves;
  }
  if (!c.profile.empty()) {
    std::ofstream f(c.profile);
    if (!f) fail(ErrorCode::InvalidInput, "cannot write " + c.profile);
    write_profile_csv(f, fit);
    out["profile_csv"] = c.profile;
  }
  return out;
}

json command_test_kink(const RunConfig& c, const LongitudinalDataset& data) {
  const auto taus = QuantileGrid::parse(c.taus);
  const int B = c.B.value_or(300);
  auto tests = json::array();
  for (std::size_t k = 0; k < taus.size(); ++k) {
    if (c.progress) std::cerr << "slr test tau = " << format_number(taus[k]) << "\n";
    const auto r = slr_test(data, taus[k], search_spec(c), B, c.seed + k);
    auto j = to_json(r);
    j["reject"] = r.p_value < c.alpha;
    tests.push_back(j);
  }
  return {{"slr_tests", tests}};
}

json command_ci(const RunConfig& c, const LongitudinalDataset& data) {
  const auto taus = QuantileGrid::parse(c.taus);
  const auto spec = search_spec(c);
  const auto kind = parse_correlation(c.corr);
  const auto fit = estimate(data, taus, spec);
  const bool all = c.method == "all";
  if (!all) parse_interval_method(c.method);
  auto intervals = json::array();
  if (all || c.method == "wald") {
    intervals.push_back(to_json(wald_ci(fit, assemble_sandwich(data, fit, kind), c.alpha)));
  }
  if (all || c.method == "qrs") {
    InversionOptions inv;
    inv.delta = c.delta == "auto" ? 0.0 : parse_list(c.delta).at(0);
    if (c.delta != "auto" && !(inv.delta > 0.0)) fail(ErrorCode::InvalidInput, "delta must be positive");
    inv.rank.alpha = c.alpha;
    inv.rank.kind = kind;
    intervals.push_back(to_json(invert_ci(data, taus, fit.t_hat, inv)));
  }
  if (all || c.method == "boot") {
    if (c.progress) std::cerr << "subject bootstrap\n";
    intervals.push_back(to_json(subject_bootstrap_ci(data, taus, spec, c.B.value_or(400), c.alpha, c.seed)));
  }
  return {{"t_hat", number(fit.t_hat)}, {"intervals", intervals}};
}

json command_common(const RunConfig& c, const LongitudinalDataset& data) {
  const auto taus = QuantileGrid::parse(c.taus);
  const auto r = commonality_wald_test(data, taus, search_spec(c), parse_correlation(c.corr), !c.independence_fallback);
  auto j = to_json(r);
  j["reject"] = r.p_value < c.alpha;
  return {{"commonality_test", j}};
}

McOptions mc_options(const RunConfig& c) {
  McOptions o;
  o.reps = c.reps;
  o.cases = c.cases;
  o.Ns = {c.N};
  o.seed = c.seed;
  o.cqr_taus = QuantileGrid::parse(c.taus);
  o.spec = search_spec(c);
  o.kind = parse_correlation(c.corr);
  o.alpha = c.alpha;
  o.progress = c.progress;
  return o;
}

McReport command_simulate(const RunConfig& c) {
  const auto o = mc_options(c);
  if (c.method == "table2") {
    InversionOptions inv;
    if (c.delta != "auto") inv.delta = parse_list(c.delta).at(0);
    return run_table2(o, {IntervalMethod::Wald, IntervalMethod::Boot, IntervalMethod::Qrs}, c.B.value_or(400),
                      c.boot_reps, inv);
  }
  if (c.method != "table1" && c.method != "all") fail(ErrorCode::InvalidInput, "simulate --method must be table1 or table2");
  std::vector<std::string> est;
  std::stringstream ss(c.estimators);
  std::string e;
  while (std::getline(ss, e, ',')) est.push_back(e);
  return run_table1(o, est);
}

McReport command_power(const RunConfig& c) {
  auto o = mc_options(c);
  const auto taus = parse_list(c.taus);
  return run_power(o, parse_list(c.delta_beta), taus, c.B.value_or(300));
}

void emit(const RunConfig& c, const std::string& text, std::ostream& out) {
  if (c.output.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.output);
  if (!f) fail(ErrorCode::InvalidInput, "cannot write " + c.output);
  f << text;
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    check_config(config);
    if (config.threads > 0) set_thread_count(config.threads);
    const auto header = provenance(config);
    const auto& cmd = config.command;
    if (cmd == "generate") {
      if (config.cases.size() != 1) fail(ErrorCode::InvalidInput, "generate takes a single --case");
      DgpSpec spec{config.cases.front(), config.N, std::nullopt, config.seed};
      if (!config.delta_beta.empty() && config.delta_beta != "default") spec.delta_beta = parse_list(config.delta_beta).at(0);
      std::ostringstream text;
      write_csv(text, generate(spec));
      emit(config, text.str(), out);
      return 0;
    }
    if (cmd == "simulate" || cmd == "power") {
      const auto report = cmd == "simulate" ? command_simulate(config) : command_power(config);
      if (config.format == "csv") {
        std::ostringstream text;
        text << "# " << header.dump() << '\n';
        write_csv(text, report);
        emit(config, text.str(), out);
      } else {
        json doc = {{"provenance", header}, {"report", to_json(report)}};
        emit(config, doc.dump(2) + "\n", out);
      }
      return 0;
    }
    const auto data = load(config);
    json body;
    if (cmd == "fit") {
      body = command_fit(config, data);
    } else if (cmd == "test-kink") {
      body = command_test_kink(config, data);
    } else if (cmd == "ci") {
      body = command_ci(config, data);
    } else if (cmd == "common-test") {
      body = command_common(config, data);
    } else {
      fail(ErrorCode::InvalidInput, "unknown command '" + cmd + "'");
    }
    json doc = {{"provenance", header}, {"result", body}};
    emit(config, config.format == "csv" ? flatten_to_csv(doc) : doc.dump(2) + "\n", out);
    return 0;
  } catch (const Error& e) {
    json doc = {{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}};
    out << doc.dump() << '\n';
    err << "kinkqr: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    json doc = {{"error", {{"code", "internal"}, {"message", e.what()}}}};
    out << doc.dump() << '\n';
    err << "kinkqr: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace kinkqr
