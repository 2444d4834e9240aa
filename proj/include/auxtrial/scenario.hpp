#pragma once

// Frequentist ground-truth generators: correlated binary (primary, auxiliary)
// pairs with prescribed margins and odds ratio, multinomial subgroup enrollment,
// and resampling of a control pool with outcome perturbation.

#include <array>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "auxtrial/errors.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/trial_data.hpp"

namespace auxtrial {

struct JointCell {
  double p11 = 0.0, p10 = 0.0, p01 = 0.0, p00 = 0.0;  // indices are (Y, S)

  double primary_marginal() const { return p11 + p10; }
  double auxiliary_marginal() const { return p11 + p01; }
  double odds_ratio() const { return (p11 * p00) / (p10 * p01); }
};

namespace detail {

inline JointCell cells_from_p11(double py, double ps, double p11) {
  JointCell c;
  c.p11 = p11;
  c.p10 = py - p11;
  c.p01 = ps - p11;
  c.p00 = 1.0 - py - ps + p11;
  return c;
}

}  // namespace detail

/// 2x2 joint distribution with margins (py, ps) and odds ratio R. p11 is the
/// root of (R-1)p^2 - [(R-1)(py+ps)+1]p + R py ps inside the Frechet interval.
inline JointCell solve_joint(double py, double ps, double odds_ratio) {
  require(py > 0.0 && py < 1.0 && ps > 0.0 && ps < 1.0, "solve_joint: margins must lie in (0,1)");
  require(odds_ratio > 0.0 && std::isfinite(odds_ratio), "solve_joint: odds ratio must be > 0");
  const double lo = std::max(0.0, py + ps - 1.0);
  const double hi = std::min(py, ps);
  if (odds_ratio == 1.0) return detail::cells_from_p11(py, ps, py * ps);

  const double a = odds_ratio - 1.0;
  const double b = -(a * (py + ps) + 1.0);
  const double c = odds_ratio * py * ps;
  const double disc = b * b - 4.0 * a * c;
  const double slack = 1e-12;
  if (disc > 1e-14) {
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    for (double root : {q / a, c / q}) {
      if (root >= lo - slack && root <= hi + slack) {
        return detail::cells_from_p11(py, ps, std::clamp(root, lo, hi));
      }
    }
  }
  // Bisection on the log odds ratio, which is increasing in p11 on (lo, hi).
  auto log_or = [&](double p) {
    return std::log(p) + std::log(1.0 - py - ps + p) - std::log(py - p) - std::log(ps - p);
  };
  const double target = std::log(odds_ratio);
  double left = lo, right = hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (left + right);
    if (mid <= lo || mid >= hi) break;
    (log_or(mid) < target ? left : right) = mid;
  }
  const double root = 0.5 * (left + right);
  if (!(root > lo && root < hi)) throw NoValidRoot("solve_joint: no root in Frechet interval");
  return detail::cells_from_p11(py, ps, root);
}

struct ScenarioSpec {
  std::string name;
  // [group][arm]
  std::vector<std::array<double, 2>> p_primary;
  std::vector<std::array<double, 2>> p_auxiliary;
  std::vector<std::array<double, 2>> odds_ratio;
  std::vector<double> prevalence;
  int n_total = 0;

  int groups() const { return static_cast<int>(prevalence.size()); }

  // H_{0,k}: no positive effect on the primary outcome in group k.
  bool primary_null(int k) const { return p_primary[k][1] <= p_primary[k][0]; }
  bool auxiliary_null(int k) const { return p_auxiliary[k][1] <= p_auxiliary[k][0]; }

  void validate() const {
    const auto k = prevalence.size();
    require(k >= 1, "ScenarioSpec: need at least one group");
    require(p_primary.size() == k && p_auxiliary.size() == k && odds_ratio.size() == k,
            "ScenarioSpec: per-group arrays must have one entry per group");
    double total = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      require(prevalence[g] > 0.0 && prevalence[g] <= 1.0, "ScenarioSpec: prevalence must lie in (0,1]");
      total += prevalence[g];
      for (int a = 0; a < 2; ++a) {
        require(p_primary[g][a] > 0.0 && p_primary[g][a] < 1.0, "ScenarioSpec: pY must lie in (0,1)");
        require(p_auxiliary[g][a] > 0.0 && p_auxiliary[g][a] < 1.0,
                "ScenarioSpec: pS must lie in (0,1)");
        require(odds_ratio[g][a] > 0.0, "ScenarioSpec: odds ratios must be > 0");
      }
    }
    require(std::abs(total - 1.0) < 1e-9, "ScenarioSpec: prevalences must sum to 1");
    require(n_total >= 1, "ScenarioSpec: n_total must be >= 1");
  }
};

/// The five treatment-effect configurations used for the subgroup simulations.
/// Group 0 carries the configuration; every other group has no effects.
/// Control margins are pY = 0.2, pS = 0.5; effects raise them to 0.4 and 0.75.
/// Configuration 5 swaps the auxiliary margins in group 0 (negative effect).
inline ScenarioSpec effect_configuration(int configuration, double odds_ratio,
                                         std::vector<double> prevalence, int n_total) {
  require(configuration >= 1 && configuration <= 5, "effect_configuration: expected 1..5");
  ScenarioSpec s;
  s.name = "scenario" + std::to_string(configuration);
  const auto k = prevalence.size();
  s.prevalence = std::move(prevalence);
  s.n_total = n_total;
  s.p_primary.assign(k, {0.2, 0.2});
  s.p_auxiliary.assign(k, {0.5, 0.5});
  s.odds_ratio.assign(k, {odds_ratio, odds_ratio});
  switch (configuration) {
    case 2: s.p_auxiliary[0] = {0.5, 0.75}; break;
    case 3: s.p_primary[0] = {0.2, 0.4}; break;
    case 4:
      s.p_primary[0] = {0.2, 0.4};
      s.p_auxiliary[0] = {0.5, 0.75};
      break;
    case 5:
      s.p_primary[0] = {0.2, 0.4};
      s.p_auxiliary[0] = {0.75, 0.5};
      break;
    default: break;
  }
  s.validate();
  return s;
}

// Two subgroups, prevalences 0.6 / 0.4, N = 200.
inline ScenarioSpec two_group_scenario(int configuration, double odds_ratio) {
  return effect_configuration(configuration, odds_ratio, {0.6, 0.4}, 200);
}

// Six subgroups, prevalences 0.25 / 0.15 x 5, N = 600.
inline ScenarioSpec six_group_scenario(int configuration, double odds_ratio) {
  return effect_configuration(configuration, odds_ratio, {0.25, 0.15, 0.15, 0.15, 0.15, 0.15}, 600);
}

// Single population, N = 200 (sequential designs).
inline ScenarioSpec single_population_scenario(int configuration, double odds_ratio) {
  return effect_configuration(configuration, odds_ratio, {1.0}, 200);
}

/// N patients: subgroup by prevalence, arm by a fair coin, (Y, S) from the joint
/// cell of that subgroup and arm. Deterministic for a given RNG state.
inline TrialDataset simulate_trial(const ScenarioSpec& spec, Rng& rng) {
  spec.validate();
  const int k = spec.groups();
  std::vector<std::array<std::array<double, 4>, 2>> cells(static_cast<std::size_t>(k));
  for (int g = 0; g < k; ++g) {
    for (int a = 0; a < 2; ++a) {
      const auto jc = solve_joint(spec.p_primary[g][a], spec.p_auxiliary[g][a], spec.odds_ratio[g][a]);
      cells[g][a] = {jc.p11, jc.p10, jc.p01, jc.p00};
    }
  }
  TrialDataset data;
  data.k_count = k;
  data.patients.reserve(static_cast<std::size_t>(spec.n_total));
  for (int i = 0; i < spec.n_total; ++i) {
    PatientRecord p;
    p.group = k == 1 ? 0 : categorical(rng, spec.prevalence);
    p.arm = bernoulli(rng, 0.5) ? 1 : 0;
    const int cell = categorical(rng, cells[p.group][p.arm]);
    p.primary = (cell == 0 || cell == 1) ? 1 : 0;
    p.auxiliary = (cell == 0 || cell == 2) ? 1 : 0;
    p.enroll_order = i;
    data.patients.push_back(p);
  }
  return data;
}

/// In-silico trial from a control pool: each patient is drawn with replacement
/// and randomized 1:1. In the experimental arm a negative primary outcome turns
/// positive with probability p_y and a negative auxiliary with probability p_s.
inline TrialDataset resample_perturb(std::span<const PatientRecord> pool, double p_y, double p_s,
                                     int n_total, Rng& rng) {
  if (pool.empty()) throw EmptyPool("resample_perturb: control pool is empty");
  require(p_y >= 0.0 && p_y <= 1.0 && p_s >= 0.0 && p_s <= 1.0,
          "resample_perturb: perturbation probabilities must lie in [0,1]");
  require(n_total >= 1, "resample_perturb: N must be >= 1");
  TrialDataset data;
  int max_group = 0;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  data.patients.reserve(static_cast<std::size_t>(n_total));
  for (int i = 0; i < n_total; ++i) {
    const auto& src = pool[pick(rng)];
    PatientRecord p;
    p.group = src.group;
    p.arm = bernoulli(rng, 0.5) ? 1 : 0;
    p.primary = src.primary;
    p.auxiliary = src.auxiliary;
    // Both flips are drawn for every experimental patient so the stream does
    // not depend on the pooled outcome values.
    if (p.arm == 1) {
      const bool flip_y = bernoulli(rng, p_y);
      const bool flip_s = bernoulli(rng, p_s);
      if (p.primary == 0 && flip_y) p.primary = 1;
      if (p.auxiliary == 0 && flip_s) p.auxiliary = 1;
    }
    p.enroll_order = i;
    max_group = std::max(max_group, p.group);
    data.patients.push_back(p);
  }
  data.k_count = max_group + 1;
  return data;
}

}  // namespace auxtrial
