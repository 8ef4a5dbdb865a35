#include <gtest/gtest.h>

#include <cmath>

#include "kinkqr/dgp.hpp"
#include "kinkqr/intervals.hpp"
#include "kinkqr/kink_estimator.hpp"
#include "kinkqr/rankscore.hpp"
#include "test_helpers.hpp"

using namespace kinkqr;

namespace {

const QuantileGrid kFive({0.3, 0.4, 0.5, 0.6, 0.7});

}  // namespace

TEST(ProjectedScore, WeightedOrthogonality) {
  const auto data = fixtures::make_dataset(40, 5, 1, fixtures::kink_mean);
  const RowMatrix m = kink_design_matrix(data, 4.5);
  Eigen::VectorXd b(200), w(200);
  for (int i = 0; i < 200; ++i) {
    b[i] = std::sin(0.3 * i) + data.x()[i];
    w[i] = 0.5 + std::abs(std::cos(1.7 * i));
  }
  const auto weighted = projected_score(m, b, w);
  EXPECT_LE((m.transpose() * w.cwiseProduct(weighted)).cwiseAbs().maxCoeff(), 1e-8);
  const auto plain = projected_score(m, b);
  EXPECT_LE((m.transpose() * plain).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ProjectedScore, ConstantScoreIsAnnihilated) {
  const auto data = fixtures::make_dataset(10, 3, 2, fixtures::kink_mean);
  const RowMatrix m = kink_design_matrix(data, 5.0);
  EXPECT_LE(projected_score(m, Eigen::VectorXd::Constant(30, 2.5)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ProjectedScore, MatchesHatMatrix) {
  RowMatrix m(6, 2);
  m << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4, 1, 5;
  const Eigen::VectorXd b = (Eigen::VectorXd(6) << 1, -2, 0.5, 3, 0, 1).finished();
  // Hat matrix written out from the normal equations.
  Eigen::Matrix2d gram;
  gram << 6, 15, 15, 55;
  const Eigen::MatrixXd md = m;
  const Eigen::MatrixXd hat = md * gram.inverse() * md.transpose();
  const Eigen::VectorXd expected = b - hat * b;
  EXPECT_LE((projected_score(m, b) - expected).cwiseAbs().maxCoeff(), 1e-12);

  RowMatrix collinear(4, 2);
  collinear << 1, 2, 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(projected_score(collinear, Eigen::VectorXd::Ones(4)), Error);
}

TEST(RankScore, SingleLevelIsSquaredStandardisedScore) {
  const auto data = generate({1, 100, std::nullopt, 3});
  const auto r = rank_score_statistic(data, QuantileGrid({0.5}), 5.0);
  ASSERT_EQ(r.T.size(), 1);
  EXPECT_NEAR(r.statistic, r.T[0] * r.T[0] / r.Psi(0, 0), 1e-10);
  EXPECT_EQ(r.df, 1);
}

TEST(RankScore, HomoscedasticScoreIsOrthogonalToDesign) {
  const auto data = generate({1, 100, std::nullopt, 4});
  RankScoreOptions opts;
  opts.homoscedastic = true;
  const auto r = rank_score_statistic(data, kFive, 5.0, opts);
  const RowMatrix m = kink_design_matrix(data, 5.0);
  for (const auto& b : r.projected) EXPECT_LE((m.transpose() * b).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(r.df, 5);
  EXPECT_GE(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
}

TEST(RankScore, FarFromTruthRejects) {
  const auto data = generate({1, 200, std::nullopt, 5});
  EXPECT_TRUE(rank_score_statistic(data, kFive, 3.0).reject);
}

TEST(RestrictedFit, AtEstimateMatchesProfile) {
  const auto data = generate({1, 100, std::nullopt, 6});
  const auto fit = estimate(data, kFive);
  const auto r = restricted_fit(data, kFive, fit.t_hat);
  EXPECT_NEAR(r.objective, fit.objective, 1e-9);
}

// The acceptance set of the rank score test need not be an interval, so a
// finer step can stop earlier. Coarse points are fine points, hence the fine
// walk never passes the first coarse rejection.
TEST(InvertCi, ContainsEstimateAndNestsUnderFinerStep) {
  const auto data = generate({1, 100, std::nullopt, 7});
  const auto fit = estimate(data, kFive);
  InversionOptions coarse;
  coarse.delta = 0.05;
  const auto a = invert_ci(data, kFive, fit.t_hat, coarse);
  EXPECT_LE(a.lower, fit.t_hat);
  EXPECT_GE(a.upper, fit.t_hat);
  EXPECT_EQ(a.method, IntervalMethod::Qrs);
  InversionOptions fine;
  fine.delta = 0.025;
  const auto b = invert_ci(data, kFive, fit.t_hat, fine);
  EXPECT_LE(b.upper, a.upper + fine.delta + 1e-12);
  EXPECT_GE(b.lower, a.lower - fine.delta - 1e-12);
  EXPECT_LE(b.lower, fit.t_hat);
  EXPECT_GE(b.upper, fit.t_hat);
}

TEST(WaldCi, HalfWidthIsNormalQuantileTimesSe) {
  KinkFit fit;
  fit.t_hat = 5.0;
  CovarianceEstimate cov;
  cov.se = Eigen::VectorXd::Constant(3, 0.2);
  const auto ci = wald_ci(fit, cov, 0.05);
  EXPECT_NEAR(ci.upper - 5.0, 1.959963984540 * 0.2, 1e-10);
  EXPECT_NEAR(5.0 - ci.lower, 1.959963984540 * 0.2, 1e-10);
  cov.se[2] = 0.0;
  EXPECT_TRUE(wald_ci(fit, cov).degenerate);
}

TEST(Quantile, Type7) {
  EXPECT_DOUBLE_EQ(quantile_type7({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_type7({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_type7({1, 2, 3, 4}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_type7({10, 20, 30, 40, 50}, 0.1), 14.0);
}

TEST(BootstrapCi, DeterministicUnderSeed) {
  const auto data = generate({1, 40, std::nullopt, 8});
  SearchSpec spec;
  spec.grid_points = 16;
  const QuantileGrid taus({0.5});
  const auto a = subject_bootstrap_ci(data, taus, spec, 100, 0.1, 3);
  const auto b = subject_bootstrap_ci(data, taus, spec, 100, 0.1, 3);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_LE(a.lower, a.upper);
  EXPECT_EQ(a.B, 100);
}

TEST(Commonality, CommonKinkIsNotRejectedAndShapesAgree) {
  const auto data = generate({1, 200, std::nullopt, 9});
  const QuantileGrid taus({0.3, 0.5, 0.7});
  const auto r = commonality_wald_test(data, taus);
  EXPECT_EQ(r.df, 2);
  EXPECT_EQ(r.t_hats.size(), 3u);
  EXPECT_EQ(r.contrasts.size(), 2);
  EXPECT_NEAR(r.contrasts[0], r.t_hats[1] - r.t_hats[0], 1e-15);
  EXPECT_GT(r.p_value, 0.001);
  EXPECT_LE((r.covariance - r.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(commonality_wald_test(data, QuantileGrid({0.5})), Error);
}

TEST(RestrictedFit, NoiselessTruthHasZeroResiduals) {
  DgpSpec spec{1, 30, std::nullopt, 10};
  spec.noiseless = true;
  const auto r = restricted_fit(generate(spec), kFive, 5.0);
  for (const auto& res : r.residuals) EXPECT_LE(res.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(RestrictedFit, MatchesProfileInnerFit) {
  const auto data = fixtures::make_dataset(4, 3, 11, fixtures::kink_mean);
  const auto r = restricted_fit(data, QuantileGrid({0.5}), 4.0);
  const auto p = profile_objective(data, QuantileGrid({0.5}), 4.0);
  EXPECT_EQ(r.coefficients[0], p.solution.fits[0].coefficients);
  EXPECT_EQ(r.objective, p.objective);
}
