#include <iostream>

#include <CLI11.hpp>

#include "kinkqr/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kinkqr: common kink point estimation and inference for longitudinal quantile regression"};
  app.require_subcommand(1);
  kinkqr::RunConfig config;

  auto common_flags = [&](CLI::App* sub) {
    sub->add_option("--taus", config.taus, "comma separated quantile levels");
    sub->add_option("--t-min", config.t_min, "lower end M1 of the kink search range");
    sub->add_option("--t-max", config.t_max, "upper end M2 of the kink search range");
    sub->add_option("--grid", config.grid, "coarse grid points for the kink search");
    sub->add_option("--corr", config.corr, "working correlation")->check(CLI::IsMember({"exchangeable", "ar1", "independence"}));
    sub->add_option("--B", config.B, "bootstrap replicates");
    sub->add_option("--delta", config.delta, "rank score inversion step, or auto");
    sub->add_option("--alpha", config.alpha, "significance level");
    sub->add_option("--seed", config.seed, "random seed");
    sub->add_option("--threads", config.threads, "worker threads (default KINKQR_THREADS or all cores)");
    sub->add_option("--format", config.format, "output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--output", config.output, "output file (default stdout)");
    sub->add_flag("--progress", config.progress, "report progress on stderr");
  };
  auto data_flags = [&](CLI::App* sub) { sub->add_option("--input", config.input, "CSV with header subject,y,x,z1,...")->required(); };
  auto sim_flags = [&](CLI::App* sub) {
    sub->add_option("--case", config.cases, "simulation case(s) 1-4")->delimiter(',');
    sub->add_option("--N", config.N, "subjects per dataset");
    sub->add_option("--reps", config.reps, "Monte Carlo replicates");
  };

  auto* fit = app.add_subcommand("fit", "estimate the common kink point");
  common_flags(fit);
  data_flags(fit);
  fit->add_option("--curves", config.curves, "fitted quantile curve CSV");
  fit->add_option("--profile", config.profile, "profile objective CSV");

  auto* test = app.add_subcommand("test-kink", "bootstrap SLR test of kink existence at each level");
  common_flags(test);
  data_flags(test);

  auto* ci = app.add_subcommand("ci", "confidence intervals for the kink point");
  common_flags(ci);
  data_flags(ci);
  ci->add_option("--method", config.method, "wald, boot, qrs or all")->check(CLI::IsMember({"wald", "boot", "qrs", "all"}));

  auto* common = app.add_subcommand("common-test", "Wald test that all levels share one kink point");
  common_flags(common);
  data_flags(common);
  common->add_flag("--independence-fallback", config.independence_fallback, "ignore cross-level covariance");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study of estimators (table1) or intervals (table2)");
  common_flags(simulate);
  sim_flags(simulate);
  simulate->add_option("--method", config.method, "table1 or table2")->check(CLI::IsMember({"table1", "table2"}));
  simulate->add_option("--estimators", config.estimators, "table1 estimators: lad,ls,cqr");
  simulate->add_option("--boot-reps", config.boot_reps, "table2: replicates that also run the subject bootstrap");

  auto* power = app.add_subcommand("power", "SLR test rejection rates over kink sizes");
  common_flags(power);
  sim_flags(power);
  power->add_option("--delta-beta", config.delta_beta, "comma separated slope changes");

  auto* gen = app.add_subcommand("generate", "write one simulated dataset as CSV");
  gen->add_option("--case", config.cases, "simulation case 1-4");
  gen->add_option("--N", config.N, "subjects");
  gen->add_option("--seed", config.seed, "random seed");
  gen->add_option("--delta-beta", config.delta_beta, "slope change (default: slopes 1 and -1)");
  gen->add_option("--output", config.output, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);
  if (gen->parsed() && !gen->count("--delta-beta")) config.delta_beta = "default";
  for (auto* sub : {fit, test, ci, common, simulate, power, gen}) {
    if (sub->parsed()) config.command = sub->get_name();
  }
  if (config.command == "simulate" && config.method == "all") config.method = "table1";
  if (config.command == "power" && !power->count("--taus")) config.taus = "0.1,0.3,0.5,0.7,0.9";
  return kinkqr::run(config, std::cout, std::cerr);
}
