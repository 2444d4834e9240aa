#pragma once

// Utility functions for subgroup testing and sequential designs, and Monte Carlo
// expected-utility estimation over replicates drawn from the prior model.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "auxtrial/errors.hpp"
#include "auxtrial/group_seq.hpp"
#include "auxtrial/multitest.hpp"
#include "auxtrial/numerics.hpp"
#include "auxtrial/parallel.hpp"
#include "auxtrial/prior_model.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/spending.hpp"
#include "auxtrial/trial_data.hpp"

namespace auxtrial {

enum class UtilityKind { multitest, sequential };

struct UtilitySpec {
  UtilityKind kind = UtilityKind::multitest;
  std::vector<double> lambda{0.5};            // one shared value or one per group
  std::vector<double> stage_rewards{1.0, 0.5};  // lambda'_t
  double per_patient_cost = 5e-5;

  double lambda_for(std::size_t k) const {
    require(!lambda.empty(), "UtilitySpec: lambda must not be empty");
    return lambda.size() == 1 ? lambda.front() : lambda.at(k);
  }

  void validate() const {
    for (double l : lambda) require(l >= 0.0, "UtilitySpec: penalties must be >= 0");
    for (double r : stage_rewards) require(r >= 0.0, "UtilitySpec: stage rewards must be >= 0");
    require(per_patient_cost >= 0.0, "UtilitySpec: per-patient cost must be >= 0");
  }
};

/// Sum over groups of reject_k * 1{gamma_k > 0} - lambda_k * reject_k * 1{gamma_k <= 0}.
inline double utility_multitest(const TestDecision& decisions, std::span<const double> gamma,
                                const UtilitySpec& spec) {
  require(decisions.size() == gamma.size(), "utility_multitest: decisions and gamma must cover the same groups");
  double u = 0.0;
  for (std::size_t k = 0; k < decisions.size(); ++k) {
    if (!decisions[k].reject) continue;
    u += gamma[k] > 0.0 ? 1.0 : -spec.lambda_for(k);
  }
  return u;
}

/// lambda'_{T*} * 1{gamma > 0 and rejected} - cost * m_{T*}.
inline double utility_sequential(const SequentialOutcome& outcome, double gamma, const UtilitySpec& spec) {
  require(outcome.stop_stage >= 1 && outcome.stop_stage <= static_cast<int>(spec.stage_rewards.size()),
          "utility_sequential: stage_rewards must cover the stopping stage");
  const double reward = (outcome.rejected && gamma > 0.0) ? spec.stage_rewards[outcome.stop_stage - 1] : 0.0;
  return reward - spec.per_patient_cost * outcome.n_used;
}

struct McEstimate {
  double estimate = 0.0;
  double se = 0.0;
  int replicates = 0;
  int failures = 0;

  bool failure_warning() const {
    const int total = replicates + failures;
    return total > 0 && failures > 0.01 * total;
  }
};

inline McEstimate mc_estimate(std::span<const double> utilities, int failures = 0) {
  McEstimate e;
  e.replicates = static_cast<int>(utilities.size());
  e.failures = failures;
  e.estimate = mean(utilities);
  e.se = utilities.size() > 1 ? sample_sd(utilities) / std::sqrt(static_cast<double>(utilities.size())) : 0.0;
  return e;
}

inline McEstimate mc_estimate(const std::vector<std::optional<double>>& utilities) {
  std::vector<double> ok;
  int failures = 0;
  for (const auto& u : utilities) {
    if (u) {
      ok.push_back(*u);
    } else {
      ++failures;
    }
  }
  return mc_estimate(ok, failures);
}

// ---------------------------------------------------------------------------
// Subgroup testing replicates: summaries are cached so every candidate beta is
// evaluated on the same simulated trials.

struct MultitestReplicate {
  std::vector<double> gamma;
  std::vector<GroupSummary> summaries;
};

/// Replicate r: theta and data from the prior model with seed derive_seed(seed, r).
inline std::vector<MultitestReplicate> multitest_prior_replicates(const PriorHyperparams& hyper, int n_total,
                                                                  std::span<const double> prevalence,
                                                                  int replicates, std::uint64_t seed,
                                                                  int workers = 0) {
  hyper.validate();
  require(replicates >= 1, "multitest_prior_replicates: need at least one replicate");
  const std::vector<double> prev(prevalence.begin(), prevalence.end());
  return parallel_map<MultitestReplicate>(static_cast<std::size_t>(replicates), workers, [&](std::size_t r) {
    Rng rng = make_rng(derive_seed(seed, r));
    const auto theta = sample_theta(hyper, rng);
    const auto data = sample_trial_from_prior(theta, n_total, prev, rng);
    return MultitestReplicate{theta.gamma(), compute_summaries(data)};
  });
}

inline std::vector<double> multitest_utilities(std::span<const MultitestReplicate> reps, TestMethod method,
                                               const WeightedBonfConfig& config, const UtilitySpec& spec) {
  std::vector<double> out;
  out.reserve(reps.size());
  for (const auto& r : reps) {
    out.push_back(utility_multitest(apply_test(method, r.summaries, config), r.gamma, spec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequential replicates: a trace per replicate holds Z and the predictive
// probability at each look, so any futility threshold reuses the same MCMC work.

struct SequentialReplicate {
  double gamma = 0.0;
  TrialDataset data;
  std::uint64_t seed = 0;
};

inline std::vector<SequentialReplicate> sequential_prior_replicates(const PriorHyperparams& hyper, int n_total,
                                                                    int replicates, std::uint64_t seed) {
  hyper.validate();
  require(hyper.k() == 1, "sequential designs require a single population (K = 1)");
  std::vector<SequentialReplicate> out;
  out.reserve(static_cast<std::size_t>(replicates));
  const std::vector<double> prevalence{1.0};
  for (int r = 0; r < replicates; ++r) {
    const auto rs = derive_seed(seed, static_cast<std::uint64_t>(r));
    Rng rng = make_rng(rs);
    const auto theta = sample_theta(hyper, rng);
    out.push_back({theta.groups.front().gamma(), sample_trial_from_prior(theta, n_total, prevalence, rng),
                   derive_seed(rs, 0x5eedULL)});
  }
  return out;
}

inline std::vector<std::optional<SequentialTrace>> sequential_traces(std::span<const SequentialReplicate> reps,
                                                                     const GroupSeqConfig& config,
                                                                     const PriorHyperparams& hyper, int workers = 0) {
  const auto bounds = boundary_thresholds(config.n_schedule, config.beta_e, config.alpha);
  return parallel_map_tolerant<SequentialTrace>(reps.size(), workers, [&](std::size_t i) {
    return sequential_trace(reps[i].data, config, hyper, bounds, reps[i].seed);
  });
}

inline std::vector<std::optional<double>> sequential_utilities(
    std::span<const SequentialReplicate> reps, const std::vector<std::optional<SequentialTrace>>& traces,
    double beta_f, InterimOrder order, const UtilitySpec& spec) {
  std::vector<std::optional<double>> out;
  out.reserve(reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (!traces[i]) {
      out.emplace_back();
      continue;
    }
    out.emplace_back(utility_sequential(decide_from_trace(*traces[i], beta_f, order), reps[i].gamma, spec));
  }
  return out;
}

}  // namespace auxtrial
