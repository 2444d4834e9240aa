#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "auxtrial/optimize.hpp"
#include "auxtrial/utility.hpp"

using namespace auxtrial;

namespace {

TestDecision decisions(std::initializer_list<bool> r) {
  TestDecision d;
  int k = 0;
  for (bool x : r) d.push_back({k++, x, 0.5, 0.025, 0.01, false});
  return d;
}

SequentialOutcome outcome(int stage, bool rejected, int n) {
  SequentialOutcome o;
  o.stop_stage = stage;
  o.rejected = rejected;
  o.n_used = n;
  o.stopped_for = rejected ? StopReason::efficacy : StopReason::futility;
  return o;
}

}  // namespace

TEST(MultitestUtility, Examples) {
  UtilitySpec u;
  u.lambda = {0.5};
  const std::vector<double> both{0.1, 0.2}, one{0.1, 0.0};
  EXPECT_DOUBLE_EQ(utility_multitest(decisions({true, true}), both, u), 2.0);
  EXPECT_DOUBLE_EQ(utility_multitest(decisions({true, true}), one, u), 0.5);
  EXPECT_DOUBLE_EQ(utility_multitest(decisions({false, false}), one, u), 0.0);
  EXPECT_DOUBLE_EQ(utility_multitest(decisions({false, true}), one, u), -0.5);
}

TEST(MultitestUtility, EqualGroupPenaltiesMatchScalar) {
  UtilitySpec scalar, vec;
  scalar.lambda = {0.7};
  vec.lambda = {0.7, 0.7, 0.7};
  const std::vector<double> gamma{0.0, -0.1, 0.2};
  for (int mask = 0; mask < 8; ++mask) {
    const auto d = decisions({(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0});
    EXPECT_DOUBLE_EQ(utility_multitest(d, gamma, scalar), utility_multitest(d, gamma, vec));
  }
  vec.lambda = {0.7, 2.0, 0.7};
  EXPECT_DOUBLE_EQ(utility_multitest(decisions({false, true, false}), gamma, vec), -2.0);
}

TEST(SequentialUtility, Examples) {
  UtilitySpec u;
  u.kind = UtilityKind::sequential;
  EXPECT_NEAR(utility_sequential(outcome(1, true, 100), 0.1, u), 1.0 - 100 * 5e-5, 1e-15);
  EXPECT_NEAR(utility_sequential(outcome(1, true, 100), 0.1, u), 0.995, 1e-12);
  EXPECT_NEAR(utility_sequential(outcome(1, false, 100), 0.1, u), -0.005, 1e-12);
  EXPECT_NEAR(utility_sequential(outcome(1, false, 100), -0.1, u), -0.005, 1e-12);
  EXPECT_NEAR(utility_sequential(outcome(2, true, 200), 0.1, u), 0.49, 1e-12);
  EXPECT_NEAR(utility_sequential(outcome(2, true, 200), 0.0, u), -0.01, 1e-12);
  EXPECT_THROW(utility_sequential(outcome(3, true, 300), 0.1, u), InvalidArgument);
}

TEST(SpecValidation, NegativePenalties) {
  UtilitySpec u;
  u.lambda = {-1.0};
  EXPECT_THROW(u.validate(), InvalidArgument);
  u = {};
  u.per_patient_cost = -1.0;
  EXPECT_THROW(u.validate(), InvalidArgument);
}

TEST(McEstimate, FailuresAndWarning) {
  std::vector<std::optional<double>> v(200, 1.0);
  v[3].reset();
  auto e = mc_estimate(v);
  EXPECT_EQ(e.failures, 1);
  EXPECT_EQ(e.replicates, 199);
  EXPECT_FALSE(e.failure_warning());
  v[4].reset();
  v[5].reset();
  EXPECT_TRUE(mc_estimate(v).failure_warning());
}

TEST(ExpectedUtility, StandardErrorScaling) {
  const auto h = PriorHyperparams::standard(2);
  const std::vector<double> prev{0.6, 0.4};
  WeightedBonfConfig c;
  c.beta = {4.45};
  UtilitySpec u;
  std::vector<double> se;
  for (int r : {400, 1600, 6400}) {
    const auto reps = multitest_prior_replicates(h, 200, prev, r, 31);
    se.push_back(mc_estimate(multitest_utilities(reps, TestMethod::auxiliary_augmented, c, u)).se);
  }
  EXPECT_NEAR(se[0] / se[1], 2.0, 0.4);
  EXPECT_NEAR(se[1] / se[2], 2.0, 0.4);
}

TEST(ExpectedUtility, CommonRandomNumbersReduceVariance) {
  const auto h = PriorHyperparams::standard(2);
  const std::vector<double> prev{0.6, 0.4};
  UtilitySpec u;
  WeightedBonfConfig a, b;
  a.beta = {4.45};
  b.beta = {0.0};
  const auto r1 = multitest_prior_replicates(h, 200, prev, 4000, 1);
  const auto r2 = multitest_prior_replicates(h, 200, prev, 4000, 2);
  const auto ua = multitest_utilities(r1, TestMethod::auxiliary_augmented, a, u);
  const auto ub_same = multitest_utilities(r1, TestMethod::auxiliary_augmented, b, u);
  const auto ub_other = multitest_utilities(r2, TestMethod::auxiliary_augmented, b, u);
  std::vector<double> paired, indep;
  for (std::size_t i = 0; i < ua.size(); ++i) {
    paired.push_back(ua[i] - ub_same[i]);
    indep.push_back(ua[i] - ub_other[i]);
  }
  EXPECT_LT(sample_sd(paired), sample_sd(indep));
}

TEST(ExpectedUtility, WeightedBeatsBonferroni) {
  const auto h = PriorHyperparams::standard(2);
  const std::vector<double> prev{0.6, 0.4};
  UtilitySpec u;
  WeightedBonfConfig a, b;
  a.beta = {4.45};
  b.beta = {0.0};
  const auto reps = multitest_prior_replicates(h, 200, prev, 5000, 20240601);
  const auto ua = multitest_utilities(reps, TestMethod::auxiliary_augmented, a, u);
  const auto ub = multitest_utilities(reps, TestMethod::auxiliary_augmented, b, u);
  const auto ea = mc_estimate(ua), eb = mc_estimate(ub);
  EXPECT_GT(ea.estimate - eb.estimate, 2.0 * std::sqrt(ea.se * ea.se + eb.se * eb.se));
  const auto again = mc_estimate(multitest_utilities(multitest_prior_replicates(h, 200, prev, 5000, 20240601),
                                                     TestMethod::auxiliary_augmented, a, u));
  EXPECT_EQ(again.estimate, ea.estimate);
}

TEST(ExpectedUtility, HeavyPenaltyMakesRejectionUnattractive) {
  const auto h = PriorHyperparams::standard(2);
  const std::vector<double> prev{0.6, 0.4};
  UtilitySpec u;
  u.lambda = {100.0};
  WeightedBonfConfig c;
  c.alpha = 0.5;  // near-certain rejection
  c.beta = {0.0};
  const auto e = mc_estimate(multitest_utilities(multitest_prior_replicates(h, 200, prev, 1000, 4),
                                                 TestMethod::auxiliary_augmented, c, u));
  EXPECT_LT(e.estimate, 0.0 + 2 * e.se);
}

TEST(ExpectedUtility, SequentialIdentityWithUnitRewards) {
  const auto h = PriorHyperparams::standard(1);
  GroupSeqConfig cfg;
  cfg.sampler.draws = 200;
  cfg.sampler.burn_in = 100;
  UtilitySpec u;
  u.kind = UtilityKind::sequential;
  u.stage_rewards = {1.0, 1.0};
  u.per_patient_cost = 0.0;
  const auto reps = sequential_prior_replicates(h, 200, 120, 6);
  const auto traces = sequential_traces(reps, cfg, h, 2);
  const auto util = sequential_utilities(reps, traces, cfg.beta_f, cfg.order, u);
  double hits = 0.0, total = 0.0;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    ASSERT_TRUE(traces[i].has_value());
    const auto o = decide_from_trace(*traces[i], cfg.beta_f, cfg.order);
    hits += (o.rejected && reps[i].gamma > 0.0);
    total += *util[i];
  }
  EXPECT_NEAR(total / reps.size(), hits / reps.size(), 1e-12);
}

// ---------------------------------------------------------------------------

TEST(Loess, ReproducesPolynomials) {
  std::vector<double> x, lin, quad;
  for (int i = 0; i <= 40; ++i) {
    x.push_back(i * 0.5);
    lin.push_back(3.0 - 0.2 * x.back());
    quad.push_back(1.0 + x.back() - 0.05 * x.back() * x.back());
  }
  const auto a = loess_smooth(x, lin, {0.4, 1});
  const auto b = loess_smooth(x, quad, {0.4, 2});
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(a[i], lin[i], 1e-9);
    EXPECT_NEAR(b[i], quad[i], 1e-9);
  }
}

TEST(Loess, SmoothsNoise) {
  Rng rng = make_rng(2);
  std::vector<double> x, y, truth;
  for (int i = 0; i <= 80; ++i) {
    x.push_back(i / 4.0);
    truth.push_back(-(x.back() - 8.0) * (x.back() - 8.0) / 20.0);
    y.push_back(truth.back() + 0.3 * standard_normal(rng));
  }
  const auto s = loess_smooth(x, y);
  double raw_err = 0, sm_err = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    raw_err += std::pow(y[i] - truth[i], 2);
    sm_err += std::pow(s[i] - truth[i], 2);
  }
  EXPECT_LT(sm_err, raw_err / 4);
}

TEST(GridSearch, ArgmaxOfSmoothedCurve) {
  const Bounds b{{0.0}, {10.0}};
  const auto pts = grid_points(b, {21});
  ASSERT_EQ(pts.size(), 21u);
  EXPECT_DOUBLE_EQ(pts.back()[0], 10.0);
  const UtilityObjective f = [](const std::vector<double>& p) {
    McEstimate e;
    e.estimate = -(p[0] - 4.0) * (p[0] - 4.0) + 0.1 * std::sin(37.0 * p[0]);
    e.se = 0.01;
    return e;
  };
  const auto c = grid_search(pts, f);
  EXPECT_EQ(c.smoothed[c.argmax], *std::max_element(c.smoothed.begin(), c.smoothed.end()));
  EXPECT_NEAR(c.best_params[0], 4.0, 0.5);
  EXPECT_NEAR(c.combined_se(0, 1), std::sqrt(2.0) * 0.01, 1e-15);
}

TEST(GridSearch, TwoDimensionalProduct) {
  const auto pts = grid_points({{0.0, 0.0}, {1.0, 2.0}}, {3, 5});
  EXPECT_EQ(pts.size(), 15u);
  EXPECT_THROW(grid_points({{1.0}, {0.0}}, {3}), BoundsEmpty);
  EXPECT_THROW(grid_search({}, {}), BoundsEmpty);
}

TEST(Annealing, RecoversQuadraticMaximum) {
  const Bounds b{{-5.0, 0.0}, {5.0, 10.0}};
  const UtilityObjective f = [](const std::vector<double>& p) {
    McEstimate e;
    e.estimate = -std::pow(p[0] - 1.3, 2) - 0.5 * std::pow(p[1] - 7.2, 2);
    return e;
  };
  AnnealingOptions opt;
  opt.restarts = 2;
  const auto c = anneal(b, f, 11, opt);
  EXPECT_NEAR(c.best_params[0], 1.3, 0.25);
  EXPECT_NEAR(c.best_params[1], 7.2, 0.35);
  EXPECT_EQ(c.params.size(), static_cast<std::size_t>(opt.pilot + 2 * opt.epochs * opt.moves_per_epoch));
  const auto again = anneal(b, f, 11, opt);
  EXPECT_EQ(again.best_params, c.best_params);
  EXPECT_THROW(anneal({{1.0}, {0.0}}, f, 1), BoundsEmpty);
}
