#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "auxtrial/numerics.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/trial_data.hpp"

using namespace auxtrial;

namespace {

// upper tail of N(0,1) in 50-digit arithmetic
double precise_sf(double z) {
  using big = boost::multiprecision::cpp_bin_float_50;
  const big x = big(z) / boost::multiprecision::sqrt(big(2));
  return static_cast<double>(boost::math::erfc(x) / 2);
}

TrialDataset two_arm(int n0, int x0, int n1, int x1, int s0 = 0, int s1 = 0) {
  TrialDataset d;
  long order = 0;
  for (int i = 0; i < n0; ++i) d.patients.push_back({0, 0, i < x0 ? 1 : 0, i < s0 ? 1 : 0, order++, true});
  for (int i = 0; i < n1; ++i) d.patients.push_back({0, 1, i < x1 ? 1 : 0, i < s1 ? 1 : 0, order++, true});
  return d;
}

}  // namespace

TEST(NormalCdf, MatchesHighPrecisionTail) {
  for (double z : {-6.0, -3.1, -1.0, 0.0, 0.3, 1.6449, 2.4494897, 4.0, 7.5}) {
    const double ref = precise_sf(z);
    EXPECT_NEAR(norm_sf(z) / ref, 1.0, 1e-12) << z;
    EXPECT_NEAR(norm_cdf(z), 1.0 - ref, 1e-15) << z;
  }
  EXPECT_NEAR(norm_quantile(0.95), 1.6448536269514722, 1e-12);
}

TEST(Summaries, DifferenceInProportionsExample) {
  const auto s = compute_summaries(two_arm(60, 12, 60, 24)).front();
  ASSERT_TRUE(s.ok());
  EXPECT_EQ(s.n0, 60);
  EXPECT_EQ(s.n1, 60);
  EXPECT_NEAR(s.ybar_diff, 0.2, 1e-12);
  EXPECT_NEAR(s.var_hat, 0.4 / 60.0, 1e-12);
  EXPECT_NEAR(s.z, 0.2 / std::sqrt(0.4 / 60.0), 1e-10);
  EXPECT_NEAR(s.z, 2.4495, 1e-4);
  EXPECT_NEAR(s.pvalue, precise_sf(0.2 / std::sqrt(0.4 / 60.0)), 1e-14);
  EXPECT_NEAR(s.pvalue, 0.00715, 1e-5);
}

TEST(Summaries, SymmetricNull) {
  const auto s = compute_summaries(two_arm(60, 12, 60, 12)).front();
  EXPECT_DOUBLE_EQ(s.z, 0.0);
  EXPECT_DOUBLE_EQ(s.pvalue, 0.5);
}

TEST(Summaries, DegenerateVarianceUsesContinuityCorrection) {
  const auto s = compute_summaries(two_arm(10, 0, 10, 0)).front();
  const double p = 0.5 / 11.0;
  EXPECT_NEAR(s.var_hat, 2 * p * (1 - p) / 10.0, 1e-15);
  EXPECT_GT(s.var_hat, 0.0);
  EXPECT_DOUBLE_EQ(s.pvalue, 0.5);
}

TEST(Summaries, EmptyArmIsReportedPerGroup) {
  TrialDataset d = two_arm(5, 1, 5, 2);
  d.k_count = 2;
  d.patients.push_back({1, 0, 1, 1, 100, true});
  const auto s = compute_summaries(d);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_TRUE(s[0].ok());
  EXPECT_FALSE(s[1].ok());
  EXPECT_DOUBLE_EQ(s[1].pvalue, 1.0);
}

TEST(Summaries, AuxiliaryDifferenceUsesAllPatients) {
  TrialDataset d = two_arm(10, 2, 10, 4, 3, 7);
  d.patients[0].primary_observed = false;
  const auto s = compute_summaries(d).front();
  EXPECT_EQ(s.n0, 9);
  EXPECT_EQ(s.ns0, 10);
  EXPECT_NEAR(s.sbar_diff, 0.4, 1e-12);
}

TEST(Summaries, PermutationInvariant) {
  Rng rng = make_rng(7);
  TrialDataset d;
  d.k_count = 3;
  for (long i = 0; i < 300; ++i) {
    d.patients.push_back({static_cast<int>(i % 3), bernoulli(rng, 0.5), bernoulli(rng, 0.3), bernoulli(rng, 0.6), i, true});
  }
  const auto a = compute_summaries(d);
  std::shuffle(d.patients.begin(), d.patients.end(), rng);
  const auto b = compute_summaries(d);
  for (int k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(a[k].z, b[k].z);
    EXPECT_DOUBLE_EQ(a[k].sbar_diff, b[k].sbar_diff);
    EXPECT_DOUBLE_EQ(a[k].cov_sy, b[k].cov_sy);
  }
}

TEST(Summaries, PvalueRecomputedFromZ) {
  Rng rng = make_rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const int n0 = 5 + static_cast<int>(uniform01(rng) * 80), n1 = 5 + static_cast<int>(uniform01(rng) * 80);
    const auto s = compute_summaries(two_arm(n0, binomial(rng, n0, 0.3), n1, binomial(rng, n1, 0.4))).front();
    EXPECT_NEAR(s.pvalue, 1.0 - norm_cdf(s.z), 1e-12);
  }
}

TEST(Summaries, NullPvaluesAreNearlyUniform) {
  std::vector<double> pv;
  const int reps = 20000;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = make_rng(derive_seed(99, rep));
    pv.push_back(compute_summaries(two_arm(100, binomial(rng, 100, 0.2), 100, binomial(rng, 100, 0.2))).front().pvalue);
  }
  // binomial data: the p-values are discrete, so compare tail rates
  for (double a : {0.01, 0.025, 0.05, 0.1, 0.25, 0.5}) {
    const double rate = std::count_if(pv.begin(), pv.end(), [a](double p) { return p <= a; }) / double(reps);
    EXPECT_NEAR(rate, a, 0.15 * a + 3.0 * std::sqrt(a * (1 - a) / reps)) << "a = " << a;
  }
}

TEST(Stage, RestrictionShapes) {
  Rng rng = make_rng(3);
  TrialDataset d;
  for (long i = 0; i < 200; ++i) d.patients.push_back({0, bernoulli(rng, 0.5), bernoulli(rng, 0.3), bernoulli(rng, 0.5), i, true});
  const auto a = restrict_to_stage(d, 100, 100);
  EXPECT_EQ(a.size(), 100u);
  EXPECT_EQ(a.primary_observed_count(), 100);
  const auto b = restrict_to_stage(d, 100, 140);
  EXPECT_EQ(b.size(), 140u);
  EXPECT_EQ(b.primary_observed_count(), 100);
  const auto c = restrict_to_stage(d, 200, 200);
  ASSERT_EQ(c.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(c.patients[i].primary, d.patients[i].primary);
    EXPECT_EQ(c.patients[i].enroll_order, d.patients[i].enroll_order);
    EXPECT_TRUE(c.patients[i].primary_observed);
  }
  EXPECT_THROW(restrict_to_stage(d, 120, 100), BadStage);
  EXPECT_THROW(restrict_to_stage(d, 100, 300), BadStage);
}

TEST(Stage, NestedRestrictionEqualsDirect) {
  Rng rng = make_rng(5);
  TrialDataset d;
  for (long i = 0; i < 200; ++i) d.patients.push_back({0, bernoulli(rng, 0.5), bernoulli(rng, 0.3), bernoulli(rng, 0.5), 199 - i, true});
  const auto nested = restrict_to_stage(restrict_to_stage(d, 150, 180), 60, 90);
  const auto direct = restrict_to_stage(d, 60, 90);
  ASSERT_EQ(nested.size(), direct.size());
  for (std::size_t i = 0; i < nested.size(); ++i) {
    EXPECT_EQ(nested.patients[i].enroll_order, direct.patients[i].enroll_order);
    EXPECT_EQ(nested.patients[i].primary_observed, direct.patients[i].primary_observed);
  }
}

TEST(Dataset, ValidationRejectsBadRecords) {
  TrialDataset d = two_arm(2, 1, 2, 1);
  EXPECT_NO_THROW(d.validate());
  d.patients[1].enroll_order = d.patients[0].enroll_order;
  EXPECT_THROW(d.validate(), InvalidArgument);
  d = two_arm(2, 1, 2, 1);
  d.patients[0].arm = 2;
  EXPECT_THROW(d.validate(), InvalidArgument);
  d = two_arm(2, 1, 2, 1);
  d.patients[0].group = 1;
  EXPECT_THROW(d.validate(), InvalidArgument);
}

TEST(Dataset, CsvRoundTrip) {
  TrialDataset d = two_arm(4, 1, 5, 3, 2, 2);
  d.patients[2].primary_observed = false;
  std::stringstream ss;
  write_dataset_csv(ss, d);
  EXPECT_EQ(ss.str().substr(0, std::string(kDatasetCsvHeader).size()), kDatasetCsvHeader);
  const auto back = read_dataset_csv(ss);
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.patients[i].arm, d.patients[i].arm);
    EXPECT_EQ(back.patients[i].primary, d.patients[i].primary);
    EXPECT_EQ(back.patients[i].auxiliary, d.patients[i].auxiliary);
    EXPECT_EQ(back.patients[i].primary_observed, d.patients[i].primary_observed);
  }
  std::stringstream bad("group,arm,primary,auxiliary,enroll_order,primary_observed\n0,0,1\n");
  EXPECT_THROW(read_dataset_csv(bad), InvalidArgument);
}

TEST(Dataset, SwapOutcomes) {
  const auto d = two_arm(3, 1, 3, 2, 3, 0);
  const auto s = swap_outcomes(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(s.patients[i].primary, d.patients[i].auxiliary);
    EXPECT_EQ(s.patients[i].auxiliary, d.patients[i].primary);
  }
}
