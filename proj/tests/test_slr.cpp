#include <gtest/gtest.h>

#include <cmath>

#include "kinkqr/dgp.hpp"
#include "kinkqr/slr_test.hpp"
#include "test_helpers.hpp"

using namespace kinkqr;

namespace {

SearchSpec grid_through_five() {
  // Grid points 0.2, 0.3, ..., 5.1; 5.0 is the 49th.
  SearchSpec spec;
  spec.m1 = 0.1;
  spec.m2 = 5.2;
  spec.epsilon = 0.0;
  return spec;
}

}  // namespace

TEST(NullFit, MatchesLinearQuantileRegression) {
  const auto data = fixtures::make_dataset(30, 4, 1, fixtures::kink_mean);
  const auto fit = null_objective(data, 0.3);
  const auto direct = fit_single(null_design_matrix(data), data.y(), 0.3);
  EXPECT_EQ(fit.coefficients, direct.fits[0].coefficients);
  EXPECT_EQ(fit.objective, direct.objective);
  EXPECT_EQ(fit.coefficients.size(), 3);
}

TEST(SlrStatistic, NonNegativeByNesting) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto data = fixtures::make_dataset(30, 4, seed, [](double x, double z) { return 1.0 + 0.5 * x + 0.1 * z; });
    const auto r = slr_statistic(data, 0.5);
    EXPECT_GE(r.statistic, -1e-8);
    EXPECT_EQ(r.t_grid.size(), 50u);
    for (double v : r.profile) EXPECT_LE(v, r.null_fit.objective + 1e-10);
  }
}

TEST(SlrStatistic, NoiselessKinkOnGridGivesFullNullLoss) {
  const auto data = fixtures::make_dataset(40, 5, 2, fixtures::kink_mean, 0.0);
  const auto r = slr_statistic(data, 0.5, grid_through_five());
  EXPECT_NEAR(r.t_hat, 5.0, 1e-9);
  const double n = static_cast<double>(data.num_observations());
  EXPECT_NEAR(r.statistic, n * r.null_fit.objective, 1e-6);
  EXPECT_GT(r.statistic, 0.0);
}

TEST(SlrBootstrap, DeterministicAndOnLattice) {
  const auto data = generate({1, 60, 0.0, 3});
  auto a = slr_test(data, 0.5, {}, 120, 99);
  auto b = slr_test(data, 0.5, {}, 120, 99);
  EXPECT_EQ(a.p_value, b.p_value);
  EXPECT_EQ(a.bootstrap_stats, b.bootstrap_stats);
  EXPECT_GE(a.p_value, 0.0);
  EXPECT_LE(a.p_value, 1.0);
  const double scaled = a.p_value * 120.0;
  EXPECT_NEAR(scaled, std::round(scaled), 1e-9);
  EXPECT_EQ(a.B, 120);

  auto c = slr_test(data, 0.5, {}, 120, 100);
  EXPECT_NE(a.bootstrap_stats, c.bootstrap_stats);
}

TEST(SlrBootstrap, StrongKinkIsDetected) {
  const auto data = generate({1, 100, 1.0, 4});
  const auto r = slr_test(data, 0.5, {}, 100, 1);
  EXPECT_EQ(r.p_value, 0.0);
  EXPECT_NEAR(r.t_hat, 5.0, 0.5);
}

TEST(SlrBootstrap, RejectsTooFewReplicates) {
  const auto data = generate({1, 40, 0.0, 5});
  auto r = slr_statistic(data, 0.5);
  EXPECT_THROW(bootstrap_pvalue(data, r, 99, 1), Error);
}

TEST(NullFit, RecoversCommonSlope) {
  const auto data = generate({1, 400, 0.0, 6});
  const auto fit = null_objective(data, 0.5);
  EXPECT_NEAR(fit.coefficients[1], 1.0, 0.05);
  EXPECT_NEAR(fit.coefficients[2], -0.2, 0.05);
}

TEST(NullFit, TenRowInstance) {
  std::vector<Subject> s;
  for (int i = 0; i < 5; ++i)
    s.push_back({"s" + std::to_string(i), {{1.0 + i, 0.5 * i, {1.0 * (i % 2)}}, {2.0 - 0.3 * i, 3.0 - i, {0.5}}}});
  const LongitudinalDataset data(s);
  RowMatrix d(10, 3);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 5; ++i) {
    d.row(2 * i) << 1.0, 0.5 * i, 1.0 * (i % 2);
    y[2 * i] = 1.0 + i;
    d.row(2 * i + 1) << 1.0, 3.0 - i, 0.5;
    y[2 * i + 1] = 2.0 - 0.3 * i;
  }
  EXPECT_NEAR(null_objective(data, 0.4).objective, fit_single(d, y, 0.4).objective, 1e-12);
}
