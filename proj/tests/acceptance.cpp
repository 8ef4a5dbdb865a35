// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion;
// `--only N` runs a single criterion. KINKQR_LONG=1 runs the subject
// bootstrap on every replicate of criterion 4 instead of one per case.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kinkqr/covariance.hpp"
#include "kinkqr/dgp.hpp"
#include "kinkqr/intervals.hpp"
#include "kinkqr/kink_estimator.hpp"
#include "kinkqr/monte_carlo.hpp"
#include "kinkqr/qr_solver.hpp"
#include "kinkqr/rankscore.hpp"
#include "kinkqr/slr_test.hpp"

using namespace kinkqr;

namespace {

constexpr std::uint64_t kSeed = 7;
constexpr int kReps = 200;
constexpr int kN = 200;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    detail << "    [" << (ok ? "ok" : "FAIL") << "] " << what << "\n";
    pass = pass && ok;
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

bool long_mode() {
  const char* v = std::getenv("KINKQR_LONG");
  return v != nullptr && std::string(v) == "1";
}

McOptions mc(std::vector<int> cases) {
  McOptions o;
  o.reps = kReps;
  o.cases = std::move(cases);
  o.Ns = {kN};
  o.seed = kSeed;
  return o;
}

const EstimatorRow& row_of(const McReport& r, const std::string& estimator) {
  for (const auto& row : r.estimators)
    if (row.estimator == estimator) return row;
  throw std::runtime_error("missing estimator row " + estimator);
}

const CiRow& ci_row(const McReport& r, int case_id, const std::string& method) {
  for (const auto& row : r.intervals)
    if (row.case_id == case_id && row.method == method) return row;
  throw std::runtime_error("missing interval row " + method);
}

// Case 1, N = 200, composite estimator over 0.3..0.7.
void table1_case1(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto report = run_table1(mc({1}), {"cqr"});
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  const auto& r = row_of(report, "cqr");
  o.detail << "    bias " << fmt(r.bias, 5) << "  sd " << fmt(r.sd) << "  ese " << fmt(r.ese) << "  mse " << fmt(r.mse)
           << "  wald ecp " << fmt(r.ecp, 3) << "  failures " << r.failures << "  minutes " << fmt(minutes, 2) << "\n";
  o.check(std::abs(r.bias) <= 0.02, "|bias| <= 0.02");
  o.check(r.sd >= 0.08 && r.sd <= 0.13, "sd in [0.08, 0.13]");
  o.check(std::abs(r.sd - r.ese) <= 0.03, "|sd - ese| <= 0.03");
  o.check(r.ecp >= 0.87 && r.ecp <= 0.96, "wald ecp in [0.87, 0.96]");
  o.check(minutes <= 10.0, "runtime <= 10 minutes");
}

// Case 4 (t3 noise): composite quantile estimator beats least squares in MSE.
void robustness_case4(Outcome& o) {
  const auto report = run_table1(mc({4}), {"ls", "cqr"});
  const auto& ls = row_of(report, "ls");
  const auto& cqr = row_of(report, "cqr");
  o.detail << "    mse cqr " << fmt(cqr.mse) << "  mse ls " << fmt(ls.mse) << "  failures " << cqr.failures << "/"
           << ls.failures << "\n";
  o.check(cqr.mse < ls.mse, "mse(cqr) < mse(ls)");
}

// Bootstrap SLR test: size at no kink, power at the largest slope change.
void slr_size_power(Outcome& o) {
  const std::vector<double> delta_beta{0.0, 0.25, 0.5};
  const std::vector<double> taus{0.1, 0.5};
  const auto report = run_power(mc({1}), delta_beta, taus, 300);
  auto cell = [&](double tau, double d) -> const PowerRow& {
    for (const auto& r : report.power)
      if (r.tau == tau && r.delta_beta == d) return r;
    throw std::runtime_error("missing power cell");
  };
  for (double tau : taus) {
    o.detail << "    tau " << tau << ":";
    for (double d : delta_beta) o.detail << "  db=" << d << " " << fmt(cell(tau, d).power, 3);
    o.detail << "\n";
  }
  const double size = cell(0.5, 0.0).power;
  o.check(size >= 0.01 && size <= 0.10, "size at tau 0.5, delta_beta 0 in [0.01, 0.10]");
  o.check(cell(0.5, 0.5).power >= 0.9, "power at tau 0.5, delta_beta 0.5 >= 0.9");
  bool ordered = true;
  for (double d : delta_beta) {
    const auto& mid = cell(0.5, d);
    const auto& tail = cell(0.1, d);
    ordered = ordered && mid.power >= tail.power - 2.0 * tail.mc_se;
  }
  o.check(ordered, "power(tau 0.5) >= power(tau 0.1) - 2 MC-SE at every delta_beta");
}

// Interval comparison in cases 1 and 2.
void interval_comparison(Outcome& o) {
  const int boot_reps = long_mode() ? -1 : 1;
  const auto report = run_table2(mc({1, 2}), {IntervalMethod::Wald, IntervalMethod::Qrs, IntervalMethod::Boot}, 400,
                                 boot_reps);
  for (int c : {1, 2}) {
    const auto& wald = ci_row(report, c, "wald");
    const auto& qrs = ci_row(report, c, "qrs");
    const auto& boot = ci_row(report, c, "boot");
    o.detail << "    case " << c << ": qrs ecp " << fmt(qrs.ecp, 3) << " eml " << fmt(qrs.eml) << " sec "
             << fmt(qrs.mean_seconds, 2) << " | wald ecp " << fmt(wald.ecp, 3) << " eml " << fmt(wald.eml) << " | boot ecp "
             << fmt(boot.ecp, 3) << " eml " << fmt(boot.eml) << " sec " << fmt(boot.mean_seconds, 2) << " (" << boot.reps
             << " reps)\n";
    o.check(qrs.ecp >= wald.ecp, "case " + std::to_string(c) + ": ecp(qrs) >= ecp(wald)");
    o.check(qrs.eml > wald.eml, "case " + std::to_string(c) + ": eml(qrs) > eml(wald)");
    o.check(qrs.mean_seconds < boot.mean_seconds / 5.0, "case " + std::to_string(c) + ": time(qrs) < time(boot) / 5");
  }
}

// Rank score test at the true kink.
void rank_score_calibration(Outcome& o) {
  const QuantileGrid taus({0.3, 0.4, 0.5, 0.6, 0.7});
  int rejections = 0, failures = 0;
  for (int r = 0; r < kReps; ++r) {
    const auto data = generate({1, kN, std::nullopt, replicate_seed(kSeed, 1, kN, r)});
    try {
      rejections += rank_score_statistic(data, taus, kTrueKink).reject ? 1 : 0;
    } catch (const Error&) {
      ++failures;
    }
  }
  const double rate = static_cast<double>(rejections) / (kReps - failures);
  o.detail << "    rejection rate " << fmt(rate, 3) << "  failures " << failures << "\n";
  o.check(rate >= 0.02 && rate <= 0.09, "rejection rate at alpha 0.05 in [0.02, 0.09]");
}

// Basic-solution enumeration of min sum rho_tau(y - d b) for p <= 3.
double enumerate_bases(const RowMatrix& d, const Eigen::VectorXd& y, double tau) {
  const Eigen::Index n = d.rows(), p = d.cols();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
  std::function<void(Eigen::Index, Eigen::Index)> rec = [&](Eigen::Index from, Eigen::Index depth) {
    if (depth == p) {
      Eigen::MatrixXd m(p, p);
      Eigen::VectorXd rhs(p);
      for (Eigen::Index a = 0; a < p; ++a) {
        m.row(a) = d.row(idx[static_cast<std::size_t>(a)]);
        rhs[a] = y[idx[static_cast<std::size_t>(a)]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
      if (lu.rank() < p) return;
      const Eigen::VectorXd b = lu.solve(rhs);
      double loss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) loss += check_loss(y[i] - d.row(i).dot(b), tau);
      best = std::min(best, loss / static_cast<double>(n));
      return;
    }
    for (Eigen::Index i = from; i < n; ++i) {
      idx[static_cast<std::size_t>(depth)] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

LongitudinalDataset small_kink(int subjects, int per_subject, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> g;
  std::vector<Subject> out;
  for (int i = 0; i < subjects; ++i) {
    Subject s{"s" + std::to_string(i), {}};
    for (int j = 0; j < per_subject; ++j) {
      const double x = u(rng);
      s.observations.push_back({2.0 + (x <= 5.0 ? x - 5.0 : -(x - 5.0)) + 0.3 * g(rng), x, {}});
    }
    out.push_back(std::move(s));
  }
  return LongitudinalDataset(out);
}

// Solver and profile search against brute force on small instances.
void oracle_equivalence(Outcome& o) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(12, 30);
  std::uniform_int_distribution<int> width(1, 3);
  std::uniform_real_distribution<double> level(0.1, 0.9);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const int n = size(rng), p = width(rng);
    RowMatrix d(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      d(i, 0) = 1.0;
      for (int c = 1; c < p; ++c) d(i, c) = 2.0 * g(rng);
      y[i] = 0.5 + d.row(i).sum() + g(rng);
    }
    const double tau = level(rng);
    const double lp = fit_single(d, y, tau).objective;
    worst = std::max(worst, std::abs(lp - enumerate_bases(d, y, tau)));
  }
  o.detail << "    max |objective difference| over 10 LPs " << worst << "\n";
  o.check(worst <= 1e-6, "fit_single matches basis enumeration within 1e-6");

  const QuantileGrid median({0.5});
  double worst_gap = 0.0;
  bool within = true;
  for (int inst = 0; inst < 10; ++inst) {
    const auto data = small_kink(6, 5, rng);
    const auto fit = estimate(data, median);
    SearchSpec dense;
    dense.grid_points = 2001;
    dense.refine = false;
    const auto grid = search_grid(resolve_search(data, dense), 2001);
    double best_t = grid.front(), best = std::numeric_limits<double>::infinity();
    for (double t : grid) {
      const double v = profile_objective(data, median, t).objective;
      if (v < best) {
        best = v;
        best_t = t;
      }
    }
    const double spacing = grid[1] - grid[0];
    const double gap = std::abs(fit.t_hat - best_t);
    worst_gap = std::max(worst_gap, gap / spacing);
    within = within && (gap <= spacing || fit.objective <= best + 1e-12);
  }
  o.detail << "    max |t_hat - dense argmin| in grid spacings " << fmt(worst_gap, 3) << "\n";
  o.check(within, "profile minimiser within one spacing of the 2001-point grid (or strictly better)");
}

// Structural properties on random instances.
void property_suite(Outcome& o) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 10.0);

  bool subgradient = true;
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 50 + inst * 10;
    RowMatrix d(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      d.row(i) << 1.0, u(rng), g(rng);
      y[i] = 1.0 + 0.3 * d(i, 1) + d(i, 2) + (0.5 + 0.2 * d(i, 1)) * g(rng);
    }
    const double tau = 0.05 + 0.045 * inst;
    const auto fit = fit_single(d, y, tau).fits[0];
    Eigen::Vector3d s = Eigen::Vector3d::Zero(), slack = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i) {
      if (fit.residuals[i] == 0.0)
        slack += d.row(i).transpose().cwiseAbs();
      else
        s += psi(fit.residuals[i], tau) * d.row(i).transpose();
    }
    subgradient = subgradient && ((s.cwiseAbs() - slack).array() <= 1e-8).all();
  }
  o.check(subgradient, "subgradient optimality bound on 20 random fits");

  bool ordered = true;
  int joint = 0;
  const QuantileGrid close({0.45, 0.5, 0.55});
  for (int inst = 0; inst < 30; ++inst) {
    RowMatrix d(20, 3);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
      d.row(i) << 1.0, u(rng), u(rng);
      y[i] = 1.0 + 0.5 * d(i, 1) - 0.3 * d(i, 2) + (0.2 + 0.4 * d(i, 1)) * g(rng);
    }
    const auto sol = fit_noncrossing(d, y, close);
    joint += sol.joint ? 1 : 0;
    for (std::size_t k = 0; k + 1 < close.size(); ++k)
      ordered = ordered && (d * (sol.fits[k + 1].coefficients - sol.fits[k].coefficients)).minCoeff() >= -1e-8;
  }
  o.detail << "    joint non-crossing programs solved: " << joint << " of 30\n";
  o.check(ordered, "non-crossing ordering at every observed row");

  const QuantileGrid five({0.3, 0.4, 0.5, 0.6, 0.7});
  const auto data = generate({1, 100, std::nullopt, 5});
  RankScoreOptions homo;
  homo.homoscedastic = true;
  const RowMatrix m = kink_design_matrix(data, kTrueKink);
  double plain = 0.0;
  for (const auto& b : rank_score_statistic(data, five, kTrueKink, homo).projected)
    plain = std::max(plain, (m.transpose() * b).cwiseAbs().maxCoeff());
  double weighted = 0.0;
  const auto rs = rank_score_statistic(data, five, kTrueKink);
  for (std::size_t k = 0; k < five.size(); ++k) {
    const auto f = difference_quotient_density(m, data.y(), five[k]).f_hat;
    weighted = std::max(weighted, (m.transpose() * f.cwiseProduct(rs.projected[k])).cwiseAbs().maxCoeff());
  }
  o.detail << "    projection residual: identity weights " << plain << ", density weights " << weighted << "\n";
  o.check(plain <= 1e-8 && weighted <= 1e-8, "projection orthogonality within 1e-8");

  bool clipped = true;
  const QuantileGrid levels({0.1, 0.5, 0.9});
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<Eigen::VectorXd> r(3, Eigen::VectorXd(500));
    const double share = 0.1 * (inst % 10);
    for (std::size_t i = 0; i < data.num_subjects(); ++i) {
      const double common = g(rng);
      for (auto j = data.subject_begin(i); j < data.subject_end(i); ++j)
        for (int k = 0; k < 3; ++k) r[k][static_cast<Eigen::Index>(j)] = share * common + (1.0 - share) * g(rng) + (inst - 10) * 0.1;
    }
    for (auto kind : {CorrelationKind::Exchangeable, CorrelationKind::Ar1}) {
      const auto w = estimate_concordance(data, r, levels, kind);
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l)
          for (std::size_t lag = 1; lag <= 4; ++lag) {
            const double v = w.xi(k, l, lag);
            clipped = clipped && v >= std::max(0.0, levels[k] + levels[l] - 1.0) && v <= std::min(levels[k], levels[l]);
          }
    }
  }
  o.check(clipped, "concordance estimates inside the Frechet bounds");

  const auto small = generate({1, 60, 0.0, 8});
  const auto a = slr_test(small, 0.5, {}, 100, 42);
  const auto b = slr_test(small, 0.5, {}, 100, 42);
  o.check(a.p_value == b.p_value && a.bootstrap_stats == b.bootstrap_stats, "SLR p-value identical under a fixed seed");

  DgpSpec exact{1, 60, std::nullopt, 9};
  exact.noiseless = true;
  const auto fit = estimate(generate(exact), five);
  o.detail << "    noiseless |t_hat - 5| " << std::abs(fit.t_hat - kTrueKink) << "\n";
  o.check(std::abs(fit.t_hat - kTrueKink) <= 1e-6, "noiseless kink recovered within 1e-6");
}

struct Criterion {
  int id;
  std::string name;
  void (*body)(Outcome&);
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  const std::vector<Criterion> criteria{
      {1, "Case 1 composite estimator: bias, SD, ESE and Wald coverage", table1_case1},
      {2, "Case 4 robustness: MSE(CQR) < MSE(LS)", robustness_case4},
      {3, "SLR test size and power", slr_size_power},
      {4, "Interval comparison: QRS vs Wald vs bootstrap", interval_comparison},
      {5, "Rank score calibration at the true kink", rank_score_calibration},
      {6, "Oracle equivalence on small instances", oracle_equivalence},
      {7, "Property suite", property_suite},
  };
  bool all = true;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "C" << c.id << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << fmt(secs, 1) << " s)\n"
              << o.detail.str() << std::flush;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
