// Acceptance run: one PASS/FAIL line per criterion, then a summary. Exits 0
// once every criterion has been evaluated, whatever the verdicts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "auxtrial/auxtrial.hpp"
#include "posterior_oracle.hpp"

using namespace auxtrial;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Check {
  bool ok = true;
  std::string detail;

  void near(const std::string& what, double got, double want, double tol) {
    const bool pass = std::abs(got - want) <= tol;
    ok = ok && pass;
    add(fmt("%s %.6g (target %.6g +/- %.3g)%s", what.c_str(), got, want, tol, pass ? "" : " MISS"));
  }
  void at_most(const std::string& what, double got, double bound) {
    const bool pass = got <= bound;
    ok = ok && pass;
    add(fmt("%s %.4f (<= %.4f)%s", what.c_str(), got, bound, pass ? "" : " MISS"));
  }
  void at_least(const std::string& what, double got, double bound) {
    const bool pass = got > bound;
    ok = ok && pass;
    add(fmt("%s %.4f (> %.4f)%s", what.c_str(), got, bound, pass ? "" : " MISS"));
  }
  void within(const std::string& what, double got, double lo, double hi) {
    const bool pass = got >= lo && got <= hi;
    ok = ok && pass;
    add(fmt("%s %.4g (in [%g, %g])%s", what.c_str(), got, lo, hi, pass ? "" : " MISS"));
  }
  void note(const std::string& s) { add(s); }

 private:
  void add(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

struct Report {
  int passed = 0, failed = 0;

  void run(const std::string& id, const std::string& title, const std::function<Check()>& body) {
    const auto t0 = Clock::now();
    Check c;
    try {
      c = body();
    } catch (const std::exception& e) {
      c.ok = false;
      c.note(std::string("exception: ") + e.what());
    }
    (c.ok ? passed : failed) += 1;
    std::printf("%s [%s] %s: %s (%.1f s)\n", c.ok ? "PASS" : "FAIL", id.c_str(), title.c_str(), c.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
};

const OcRow& find_row(const OperatingCharacteristics& oc, const std::string& scenario, const std::string& method) {
  for (const auto& r : oc.rows) {
    if (r.scenario == scenario && r.method == method) return r;
  }
  throw std::runtime_error("missing row " + scenario + " / " + method);
}

ExperimentConfig multitest_config(const std::string& preset, std::vector<int> configurations, std::vector<double> ors,
                                  double beta, std::vector<std::string> methods) {
  json j{{"mode", "multitest-sim"}, {"seed", 20240601}};
  for (int c : configurations) {
    for (double r : ors) j["scenarios"].push_back({{"preset", preset}, {"configuration", c}, {"odds_ratio", r}});
  }
  j["multitest"] = {{"beta", {beta}}, {"methods", methods}};
  return parse_config(j);
}

std::string scen(int configuration, double r) { return fmt("scenario%d R=%g", configuration, r); }

const double kR[] = {1.0, 2.0, 10.0};

}  // namespace

int main(int argc, char** argv) {
  testing::InitGoogleTest(&argc, argv);
  const int workers = 0;
  Report rep;
  std::printf("auxtrial %s acceptance run\n", kVersion);

  rep.run("1", "Stylized two-outcome example", [] {
    Check c;
    const auto t0 = Clock::now();
    const auto rows = enumerate_stylized_example();
    const double elapsed = seconds_since(t0);
    auto utility = [&](const std::string& name) {
      for (const auto& r : rows) {
        if (r.name == name) return r.expected_utility;
      }
      throw std::runtime_error("no decision " + name);
    };
    c.near("U(Y)", utility("Y"), 0.37375, 1e-10);
    c.near("U(YS)", utility("Y*S"), 0.49875, 1e-10);
    c.near("U(Y(1-S))", utility("Y*(1-S)"), -0.125, 1e-10);
    c.near("U(0)", utility("0"), 0.0, 1e-10);
    int level = 0;
    for (const auto& r : rows) level += r.level_alpha;
    c.near("level-alpha count", level, 4, 0);
    c.at_most("seconds", elapsed, 1.0);
    return c;
  });

  const int mt_reps = 20000;
  OperatingCharacteristics k2;
  {
    const auto cfg = multitest_config("two-group", {2, 3, 4}, {1, 2, 10}, 4.45,
                                      {"auxiliary-augmented", "bonferroni", "holm", "auxiliary-only"});
    k2 = simulate_multitest(cfg, 20240601, mt_reps, workers);
  }

  rep.run("2", "K=2 scenario 2 FWER and H01 rejection", [&] {
    Check c;
    const double fwer[] = {0.052, 0.053, 0.058}, aa[] = {0.039, 0.036, 0.041}, bf[] = {0.029, 0.025, 0.028};
    for (int i = 0; i < 3; ++i) {
      const auto& a = find_row(k2, scen(2, kR[i]), "Auxiliary-Augmented");
      const auto& b = find_row(k2, scen(2, kR[i]), "Bonferroni");
      c.near(fmt("R=%g AA FWER", kR[i]), a.fwer, fwer[i], 0.012);
      c.near(fmt("R=%g AA H01", kR[i]), a.rejection[0], aa[i], 0.012);
      c.near(fmt("R=%g Bonf H01", kR[i]), b.rejection[0], bf[i], 0.012);
    }
    return c;
  });

  rep.run("3", "K=2 scenario 2 Auxiliary-Only FWER", [&] {
    Check c;
    const double want[] = {0.825, 0.825, 0.830};
    for (int i = 0; i < 3; ++i) {
      c.near(fmt("R=%g", kR[i]), find_row(k2, scen(2, kR[i]), "Auxiliary-Only").fwer, want[i], 0.02);
    }
    return c;
  });

  rep.run("4", "K=2 scenario 4 gain over Bonferroni", [&] {
    Check c;
    for (double r : kR) {
      const double gain = find_row(k2, scen(4, r), "Auxiliary-Augmented").rejection[0] -
                          find_row(k2, scen(4, r), "Bonferroni").rejection[0];
      c.near(fmt("R=%g H01 gain", r), gain, 0.07, 0.025);
    }
    return c;
  });

  rep.run("5", "K=6 suite, beta 11.4", [&] {
    Check c;
    const auto cfg = multitest_config("six-group", {4, 5}, {1}, 11.4, {"auxiliary-augmented", "holm"});
    const auto oc = simulate_multitest(cfg, 20240602, mt_reps, workers);
    c.near("s4 AA H01", find_row(oc, scen(4, 1), "Auxiliary-Augmented").rejection[0], 0.799, 0.02);
    c.near("s4 Holm H01", find_row(oc, scen(4, 1), "Holm").rejection[0], 0.631, 0.02);
    c.near("s5 AA H01", find_row(oc, scen(5, 1), "Auxiliary-Augmented").rejection[0], 0.276, 0.025);
    c.near("s5 Holm H01", find_row(oc, scen(5, 1), "Holm").rejection[0], 0.633, 0.02);
    return c;
  });

  rep.run("6", "Bootstrap calibration", [&] {
    Check c;
    const auto cfg = multitest_config("six-group", {1}, {15, 20, 50, 100}, 11.4,
                                      {"auxiliary-augmented", "auxiliary-augmented-b"});
    const auto oc = simulate_multitest(cfg, 20240603, 1000, workers);
    for (double r : {15.0, 20.0, 50.0, 100.0}) {
      const auto& b = find_row(oc, scen(1, r), "Auxiliary-Augmented-B");
      c.at_most(fmt("R=%g calibrated FWER", r), b.fwer, 0.05 + 3 * b.fwer_se);
    }
    c.at_least("R=100 uncalibrated FWER", find_row(oc, scen(1, 100), "Auxiliary-Augmented").fwer, 0.05);
    // power cost on the same simulated trials
    const auto pc = simulate_multitest(multitest_config("two-group", {3, 4}, {1, 10}, 4.45,
                                                        {"auxiliary-augmented", "auxiliary-augmented-b"}),
                                       20240608, 4000, workers);
    for (int s : {3, 4}) {
      for (double r : {1.0, 10.0}) {
        const double cost = find_row(pc, scen(s, r), "Auxiliary-Augmented").rejection[0] -
                            find_row(pc, scen(s, r), "Auxiliary-Augmented-B").rejection[0];
        c.at_most(fmt("K=2 s%d R=%g power cost", s, r), cost, r == 1.0 ? 0.01 : 0.04);
      }
    }
    return c;
  });

  rep.run("7", "Prior-predictive summaries", [] {
    Check c;
    const std::vector<double> prev{0.6, 0.4};
    const auto r = prior_predictive_report(PriorHyperparams::standard(2), 200, prev, 5000, 20240501);
    c.near("P(Y=1|SOC)", r.row("Proportion Y=1 (SOC)").mean, 0.238, 0.01);
    c.near("P(S=1|SOC)", r.row("Proportion S=1 (SOC)").mean, 0.349, 0.01);
    c.near("Y-S correlation", r.row("Correlation between Y and S").mean, 0.138, 0.02);
    c.near("TE correlation", r.te_correlation, 0.29, 0.04);
    return c;
  });

  rep.run("8", "Utility optimization, K=2", [&] {
    Check c;
    for (double lambda : {0.5, 1.0}) {
      json j{{"mode", "optimize"}, {"seed", 20240604}, {"replicates", 5000},
             {"utility", {{"lambda", lambda}}},
             {"optimize", {{"engine", "multitest"}, {"lower", {0.0}}, {"upper", {20.0}}, {"points", {81}}}}};
      const auto cfg = parse_config(j);
      const auto curve = run_optimize(cfg, 20240604, 5000, workers);
      if (lambda == 0.5) {
        c.within("lambda 0.5 argmax", curve.best_params[0], 3.0, 6.0);
        // the grid starts at beta = 0
        c.at_least("U(argmax) - U(0) in combined se", (curve.raw[curve.argmax] - curve.raw[0]) /
                                                           curve.combined_se(curve.argmax, 0), 2.0);
      } else {
        c.within("lambda 1.0 argmax", curve.best_params[0], 2.7, 4.7);
      }
    }
    return c;
  });

  rep.run("9", "Boundary computation", [] {
    Check c;
    c.near("T=1 threshold", boundary_thresholds({200}, 2.0, 0.05).thresholds[0], 1.6449, 1e-4);
    const auto b = boundary_thresholds({100, 200}, 2.0, 0.05);
    c.near("T=2 first threshold", b.thresholds[0], 1.7926, 1e-4);
    // second threshold: bisection on a 2-D Simpson quadrature of the crossing probability
    boost::math::normal nd;
    const double z1 = b.thresholds[0], rho = std::sqrt(0.5);
    auto cross2 = [&](double z2) {
      const int n = 4000;
      const double lo = -9.0, h = (z1 - lo) / n;
      double acc = 0.0;
      for (int i = 0; i <= n; ++i) {
        const double x = lo + h * i;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * boost::math::pdf(nd, x) * boost::math::cdf(complement(nd, (z2 - rho * x) / rho));
      }
      return acc * h / 3.0;
    };
    const double target = 0.05 - boost::math::cdf(complement(nd, z1));
    double lo = 1.0, hi = 4.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cross2(mid) > target ? lo : hi) = mid;
    }
    c.near("T=2 second threshold vs quadrature", b.thresholds[1], 0.5 * (lo + hi), 1e-4);
    // stratified Gaussian draws of Z1 (two independent halves of 5e5 strata);
    // the second-look crossing is integrated analytically given Z1
    Rng rng = make_rng(20240605);
    const int strata = 500000;
    double half[2];
    for (double& h : half) {
      double sum = 0.0;
      for (int i = 0; i < strata; ++i) {
        const double x = boost::math::quantile(nd, std::max(1e-300, (i + uniform01(rng)) / strata));
        sum += x > z1 ? 1.0 : boost::math::cdf(complement(nd, (b.thresholds[1] - rho * x) / rho));
      }
      h = sum / strata;
    }
    const double est = 0.5 * (half[0] + half[1]), se = 0.5 * std::abs(half[0] - half[1]);
    c.near("global-null crossing", est, 0.05, 2e-4);
    c.note(fmt("mc se %.2g", se));
    return c;
  });

  rep.run("10", "Group-sequential scenarios 1, 2, 4, 5", [&] {
    Check c;
    json j{{"mode", "groupseq-sim"}, {"seed", 20240606}};
    for (int s : {1, 2, 4, 5}) j["scenarios"].push_back({{"preset", "single"}, {"configuration", s}, {"odds_ratio", 1}});
    j["groupseq"] = {{"n_schedule", {100, 200}}, {"beta_e", 2.0}, {"beta_f", 0.13},
                     {"interim_order", "futility-first"},
                     {"designs", {"auxiliary-augmented", "primary-only", "auxiliary-only"}}};
    const auto cfg = parse_config(j);
    const auto oc = simulate_groupseq(cfg, 20240606, 1000, workers);
    const auto& s1 = find_row(oc, scen(1, 1), "Auxiliary-Augmented");
    c.near("s1 AA type-I", s1.fwer, 0.048, 0.02);
    c.near("s1 AA E[N]", s1.expected_n, 107.6, 6);
    c.near("s2 AO false positives", find_row(oc, scen(2, 1), "Auxiliary-Only").fwer, 0.958, 0.02);
    const auto& s4 = find_row(oc, scen(4, 1), "Auxiliary-Augmented");
    c.near("s4 AA power", s4.fwer, 0.892, 0.03);
    c.near("s4 AA E[N]", s4.expected_n, 130.7, 6);
    const auto& s5 = find_row(oc, scen(5, 1), "Auxiliary-Augmented");
    c.near("s5 AA power", s5.fwer, 0.519, 0.04);
    c.near("s5 AA interim", s5.interim, 0.511, 0.04);
    c.near("s5 AA E[N]", s5.expected_n, 101.0, 4);
    int failures = 0;
    for (const auto& r : oc.rows) failures += r.failures;
    c.note(fmt("failed replicates %d", failures));
    return c;
  });

  rep.run("11", "Posterior sampler vs grid oracle", [] {
    Check c;
    auto compare = [&](const std::string& tag, const std::vector<oracle::Patient>& pts, double xi, std::uint64_t seed) {
      auto h = PriorHyperparams::standard(1);
      h.xi = xi;
      const auto chain = oracle::chain_moments(pts, h, seed);
      const auto grid = oracle::grid_oracle(pts, h.groups[0], xi);
      c.near(tag + " zeta_y0", chain.zy0, grid.zy0, 0.02);
      c.near(tag + " zeta_s0", chain.zs0, grid.zs0, 0.02);
      c.near(tag + " zeta_s1", chain.zs1, grid.zs1, 0.02);
      c.near(tag + " zeta_y1", chain.zy1, grid.zy1, 0.02);
      c.near(tag + " c_y", chain.cy, grid.cy, 0.02);
      c.near(tag + " spike", chain.spike, grid.spike, 0.03);
    };
    compare("1-patient", {{1, 1, 1}}, 0.1, 1101);
    compare("3-patient", {{1, 1, 1}, {0, 0, 1}, {1, 0, 0}}, 0.3, 1102);
    return c;
  });

  rep.run("12", "Property suites", [] {
    Check c;
    testing::GTEST_FLAG(filter) = "*Property*";
    auto& listeners = testing::UnitTest::GetInstance()->listeners();
    delete listeners.Release(listeners.default_result_printer());
    const auto t0 = Clock::now();
    const int rc = RUN_ALL_TESTS();
    const double elapsed = seconds_since(t0);
    const auto* u = testing::UnitTest::GetInstance();
    c.near("failed properties", u->failed_test_count(), 0, 0);
    c.note(fmt("%d properties run", u->successful_test_count() + u->failed_test_count()));
    c.at_most("seconds", elapsed, 60.0);
    if (rc != 0) c.ok = false;
    return c;
  });

  rep.run("retro", "Synthetic-pool null type-I", [&] {
    Check c;
    Rng rng = make_rng(20240607);
    TrialDataset pool;
    for (long i = 0; i < 500; ++i) {
      const double e = standard_normal(rng);
      pool.patients.push_back({0, 0, bernoulli(rng, 1.0 / (1.0 + std::exp(1.2 - e))) ? 1 : 0,
                               bernoulli(rng, 1.0 / (1.0 + std::exp(0.4 - e))) ? 1 : 0, i, true});
    }
    auto cfg = parse_config(json{{"mode", "retro-sim"}, {"seed", 20240607}, {"retro", {{"pool", "unused.csv"}}}});
    cfg.groupseq.order = InterimOrder::futility_first;
    const auto oc = simulate_retro(cfg, pool, 20240607, 1000, workers);
    for (const auto& r : oc.rows) c.at_most(r.method + " type-I", r.fwer, 0.05 + 3 * r.fwer_se);
    return c;
  });

  std::printf("SUMMARY %d passed, %d failed\n", rep.passed, rep.failed);
  return 0;
}
