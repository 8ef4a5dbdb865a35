#include "kinkqr/monte_carlo.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "kinkqr/dgp.hpp"
#include "kinkqr/least_squares_kink.hpp"
#include "kinkqr/parallel.hpp"
#include "kinkqr/random.hpp"
#include "kinkqr/report.hpp"
#include "kinkqr/slr_test.hpp"

namespace kinkqr {

std::uint64_t replicate_seed(std::uint64_t seed, int case_id, int N, int rep) {
  const auto cell = derive_seed(seed, static_cast<std::uint64_t>(case_id) * 1000003ULL + static_cast<std::uint64_t>(N));
  return derive_seed(cell, static_cast<std::uint64_t>(rep));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double z_value(double alpha) {
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), alpha / 2));
}

void check_failures(int failures, int reps, double limit, const std::string& what) {
  if (failures > limit * reps) {
    fail(ErrorCode::EstimationFailed, what + ": " + std::to_string(failures) + " of " + std::to_string(reps) +
                                          " replicates failed");
  }
}

class Progress {
 public:
  Progress(bool on, std::string label, int total) : on_(on), label_(std::move(label)), total_(total) {}
  void tick() {
    if (!on_) return;
    std::lock_guard<std::mutex> lock(mutex_);
    ++done_;
    std::cerr << label_ << ": " << done_ << "/" << total_ << "\n";
  }

 private:
  bool on_;
  std::string label_;
  int total_;
  int done_ = 0;
  std::mutex mutex_;
};

struct RepEstimate {
  bool ok = false;
  double t = 0.0;
  double se = 0.0;
  double seconds = 0.0;
};

EstimatorRow summarize(int case_id, int N, const std::string& name, const std::vector<RepEstimate>& reps,
                       double alpha) {
  EstimatorRow row;
  row.case_id = case_id;
  row.N = N;
  row.estimator = name;
  row.reps = static_cast<int>(reps.size());
  const double z = z_value(alpha);
  double covered = 0.0;
  double secs = 0.0;
  for (const auto& r : reps) {
    if (!r.ok) {
      ++row.failures;
      continue;
    }
    row.t_hats.push_back(r.t);
    row.ses.push_back(r.se);
    secs += r.seconds;
    if (std::abs(r.t - kTrueKink) <= z * r.se) covered += 1.0;
  }
  const double m = static_cast<double>(row.t_hats.size());
  if (m == 0) return row;
  double sum = 0.0;
  double sq = 0.0;
  for (double t : row.t_hats) {
    sum += t - kTrueKink;
    sq += (t - kTrueKink) * (t - kTrueKink);
  }
  row.bias = sum / m;
  row.mse = sq / m;
  const double mean_t = std::accumulate(row.t_hats.begin(), row.t_hats.end(), 0.0) / m;
  double var = 0.0;
  for (double t : row.t_hats) var += (t - mean_t) * (t - mean_t);
  row.sd = m > 1 ? std::sqrt(var / (m - 1)) : 0.0;
  row.ese = std::accumulate(row.ses.begin(), row.ses.end(), 0.0) / m;
  row.ecp = covered / m;
  row.mean_seconds = secs / m;
  return row;
}

}  // namespace

McReport run_table1(const McOptions& options, const std::vector<std::string>& estimators) {
  if (options.reps < 1) fail(ErrorCode::InvalidInput, "reps must be positive");
  for (const auto& e : estimators) {
    if (e != "lad" && e != "ls" && e != "cqr") fail(ErrorCode::InvalidInput, "unknown estimator '" + e + "'");
  }
  McReport report;
  report.kind = "table1";
  report.reps = options.reps;
  report.seed = options.seed;
  const QuantileGrid lad_tau({0.5});
  for (int case_id : options.cases) {
    for (int N : options.Ns) {
      const auto reps = static_cast<std::size_t>(options.reps);
      std::vector<std::vector<RepEstimate>> results(estimators.size(), std::vector<RepEstimate>(reps));
      Progress progress(options.progress, "table1 case " + std::to_string(case_id) + " N " + std::to_string(N),
                        options.reps);
      parallel_for(reps, [&](std::size_t r) {
        const auto data = generate({case_id, N, std::nullopt, replicate_seed(options.seed, case_id, N, static_cast<int>(r))});
        for (std::size_t e = 0; e < estimators.size(); ++e) {
          auto& out = results[e][r];
          const auto start = Clock::now();
          try {
            if (estimators[e] == "ls") {
              const auto fit = estimate_least_squares(data, options.spec);
              out.t = fit.t_hat;
              out.se = fit.se_t;
            } else {
              const auto& taus = estimators[e] == "lad" ? lad_tau : options.cqr_taus;
              const auto fit = estimate(data, taus, options.spec);
              out.t = fit.t_hat;
              out.se = assemble_sandwich(data, fit, options.kind, options.spec.solver).se_t();
            }
            out.ok = std::isfinite(out.t) && std::isfinite(out.se);
          } catch (const Error&) {
            out.ok = false;
          }
          out.seconds = seconds_since(start);
        }
        progress.tick();
      });
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        auto row = summarize(case_id, N, estimators[e], results[e], options.alpha);
        check_failures(row.failures, row.reps, options.max_failure_rate,
                       estimators[e] + " case " + std::to_string(case_id));
        report.estimators.push_back(std::move(row));
      }
    }
  }
  return report;
}

McReport run_table2(const McOptions& options, const std::vector<IntervalMethod>& methods, int B, int boot_reps,
                    const InversionOptions& inversion) {
  if (options.reps < 1) fail(ErrorCode::InvalidInput, "reps must be positive");
  McReport report;
  report.kind = "table2";
  report.reps = options.reps;
  report.seed = options.seed;
  struct Outcome {
    bool attempted = false;
    bool ok = false;
    double lower = 0.0;
    double upper = 0.0;
    double seconds = 0.0;
  };
  for (int case_id : options.cases) {
    for (int N : options.Ns) {
      const auto reps = static_cast<std::size_t>(options.reps);
      std::vector<std::vector<Outcome>> results(methods.size(), std::vector<Outcome>(reps));
      Progress progress(options.progress, "table2 case " + std::to_string(case_id) + " N " + std::to_string(N),
                        options.reps);
      parallel_for(reps, [&](std::size_t r) {
        const auto seed = replicate_seed(options.seed, case_id, N, static_cast<int>(r));
        const auto data = generate({case_id, N, std::nullopt, seed});
        const auto start = Clock::now();
        KinkFit fit;
        try {
          fit = estimate(data, options.cqr_taus, options.spec);
        } catch (const Error&) {
          for (auto& m : results) m[r].attempted = true;
          progress.tick();
          return;
        }
        const double fit_seconds = seconds_since(start);
        for (std::size_t m = 0; m < methods.size(); ++m) {
          auto& out = results[m][r];
          if (methods[m] == IntervalMethod::Boot && boot_reps >= 0 && r >= static_cast<std::size_t>(boot_reps)) continue;
          out.attempted = true;
          const auto t0 = Clock::now();
          try {
            IntervalResult ci;
            switch (methods[m]) {
              case IntervalMethod::Wald:
                ci = wald_ci(fit, assemble_sandwich(data, fit, options.kind, options.spec.solver), options.alpha);
                break;
              case IntervalMethod::Qrs: {
                auto inv = inversion;
                inv.rank.alpha = options.alpha;
                inv.rank.kind = options.kind;
                ci = invert_ci(data, options.cqr_taus, fit.t_hat, inv);
                break;
              }
              case IntervalMethod::Boot:
                ci = subject_bootstrap_ci(data, options.cqr_taus, options.spec, B, options.alpha, derive_seed(seed, 99));
                break;
            }
            out.lower = ci.lower;
            out.upper = ci.upper;
            out.ok = std::isfinite(ci.lower) && std::isfinite(ci.upper);
          } catch (const Error&) {
            out.ok = false;
          }
          out.seconds = fit_seconds + seconds_since(t0);
        }
        progress.tick();
      });
      for (std::size_t m = 0; m < methods.size(); ++m) {
        CiRow row;
        row.case_id = case_id;
        row.N = N;
        row.method = to_string(methods[m]);
        double covered = 0.0;
        double length = 0.0;
        double secs = 0.0;
        int used = 0;
        for (const auto& o : results[m]) {
          if (!o.attempted) continue;
          ++row.reps;
          if (!o.ok) {
            ++row.failures;
            continue;
          }
          ++used;
          if (o.lower <= kTrueKink && kTrueKink <= o.upper) covered += 1.0;
          length += o.upper - o.lower;
          secs += o.seconds;
        }
        if (used > 0) {
          row.ecp = covered / used;
          row.eml = length / used;
          row.mean_seconds = secs / used;
        }
        check_failures(row.failures, row.reps, options.max_failure_rate, row.method + " case " + std::to_string(case_id));
        report.intervals.push_back(row);
      }
    }
  }
  return report;
}

McReport run_power(const McOptions& options, const std::vector<double>& delta_beta_grid,
                   const std::vector<double>& tau_grid, int B) {
  if (options.reps < 1) fail(ErrorCode::InvalidInput, "reps must be positive");
  McReport report;
  report.kind = "power";
  report.reps = options.reps;
  report.seed = options.seed;
  for (int case_id : options.cases) {
    for (int N : options.Ns) {
      for (std::size_t d = 0; d < delta_beta_grid.size(); ++d) {
        const double db = delta_beta_grid[d];
        const auto reps = static_cast<std::size_t>(options.reps);
        // 1 reject, 0 accept, -1 failed
        std::vector<std::vector<int>> outcome(tau_grid.size(), std::vector<int>(reps, -1));
        Progress progress(options.progress, "power case " + std::to_string(case_id) + " delta_beta " + format_number(db),
                          options.reps);
        parallel_for(reps, [&](std::size_t r) {
          const auto seed = derive_seed(replicate_seed(options.seed, case_id, N, static_cast<int>(r)), d + 1);
          const auto data = generate({case_id, N, db, seed});
          for (std::size_t k = 0; k < tau_grid.size(); ++k) {
            try {
              const auto res = slr_test(data, tau_grid[k], options.spec, B, derive_seed(seed, 1000 + k));
              outcome[k][r] = res.p_value < options.alpha ? 1 : 0;
            } catch (const Error&) {
            }
          }
          progress.tick();
        });
        for (std::size_t k = 0; k < tau_grid.size(); ++k) {
          PowerRow row;
          row.case_id = case_id;
          row.N = N;
          row.tau = tau_grid[k];
          row.delta_beta = db;
          row.reps = options.reps;
          int rejections = 0;
          for (int o : outcome[k]) {
            if (o < 0) ++row.failures;
            if (o == 1) ++rejections;
          }
          const int used = row.reps - row.failures;
          if (used > 0) {
            row.power = static_cast<double>(rejections) / used;
            row.mc_se = std::sqrt(row.power * (1.0 - row.power) / used);
          }
          check_failures(row.failures, row.reps, options.max_failure_rate, "power case " + std::to_string(case_id));
          report.power.push_back(row);
        }
      }
    }
  }
  return report;
}

void write_csv(std::ostream& out, const McReport& report) {
  if (report.kind == "table1") {
    out << "case,N,estimator,bias,sd,ese,mse,ecp,mean_seconds,reps,failures\n";
    for (const auto& r : report.estimators) {
      out << r.case_id << ',' << r.N << ',' << r.estimator << ',' << format_number(r.bias) << ',' << format_number(r.sd)
          << ',' << format_number(r.ese) << ',' << format_number(r.mse) << ',' << format_number(r.ecp) << ','
          << format_number(r.mean_seconds) << ',' << r.reps << ',' << r.failures << '\n';
    }
  } else if (report.kind == "table2") {
    out << "case,N,method,ecp,eml,mean_seconds,reps,failures\n";
    for (const auto& r : report.intervals) {
      out << r.case_id << ',' << r.N << ',' << r.method << ',' << format_number(r.ecp) << ',' << format_number(r.eml)
          << ',' << format_number(r.mean_seconds) << ',' << r.reps << ',' << r.failures << '\n';
    }
  } else {
    out << "case,N,tau,delta_beta,power,mc_se,reps,failures\n";
    for (const auto& r : report.power) {
      out << r.case_id << ',' << r.N << ',' << format_number(r.tau) << ',' << format_number(r.delta_beta) << ','
          << format_number(r.power) << ',' << format_number(r.mc_se) << ',' << r.reps << ',' << r.failures << '\n';
    }
  }
}

}  // namespace kinkqr
