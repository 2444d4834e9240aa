#pragma once

// Two-or-more-stage group-sequential design on a single population: efficacy by
// alpha-spending boundaries on the primary Z statistic, futility by the
// posterior predictive probability of crossing a later boundary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "auxtrial/errors.hpp"
#include "auxtrial/posterior.hpp"
#include "auxtrial/prior_model.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/spending.hpp"
#include "auxtrial/trial_data.hpp"

namespace auxtrial {

enum class DesignKind { auxiliary_augmented, primary_only, auxiliary_only };

inline std::string to_string(DesignKind d) {
  switch (d) {
    case DesignKind::auxiliary_augmented: return "Auxiliary-Augmented";
    case DesignKind::primary_only: return "Primary-Only";
    case DesignKind::auxiliary_only: return "Auxiliary-Only";
  }
  return "?";
}

inline DesignKind parse_design_kind(const std::string& s) {
  if (s == "auxiliary-augmented" || s == "Auxiliary-Augmented") return DesignKind::auxiliary_augmented;
  if (s == "primary-only" || s == "Primary-Only") return DesignKind::primary_only;
  if (s == "auxiliary-only" || s == "Auxiliary-Only") return DesignKind::auxiliary_only;
  throw InvalidArgument("unknown design kind '" + s + "'");
}

// Which interim rule is checked first at a look.
enum class InterimOrder { efficacy_first, futility_first };

inline InterimOrder parse_interim_order(const std::string& s) {
  if (s == "efficacy-first") return InterimOrder::efficacy_first;
  if (s == "futility-first") return InterimOrder::futility_first;
  throw InvalidArgument("unknown interim order '" + s + "' (expected efficacy-first or futility-first)");
}

inline std::string to_string(InterimOrder o) {
  return o == InterimOrder::efficacy_first ? "efficacy-first" : "futility-first";
}

struct GroupSeqConfig {
  std::vector<int> n_schedule{100, 200};
  std::vector<int> m_schedule;  // empty: m_t = n_t
  double alpha = 0.05;
  double beta_e = 2.0;
  double beta_f = 0.13;
  DesignKind design = DesignKind::auxiliary_augmented;
  InterimOrder order = InterimOrder::efficacy_first;
  SamplerConfig sampler{};

  int stages() const { return static_cast<int>(n_schedule.size()); }
  int m_at(int t) const { return m_schedule.empty() ? n_schedule[t] : m_schedule[t]; }

  void validate() const {
    require(!n_schedule.empty(), "GroupSeqConfig: n_schedule must not be empty");
    require(n_schedule.front() > 0, "GroupSeqConfig: n_schedule must be positive");
    for (std::size_t i = 1; i < n_schedule.size(); ++i) {
      require(n_schedule[i] > n_schedule[i - 1], "GroupSeqConfig: n_schedule must be strictly increasing");
    }
    require(m_schedule.empty() || m_schedule.size() == n_schedule.size(),
            "GroupSeqConfig: m_schedule must match n_schedule");
    for (std::size_t i = 0; i < m_schedule.size(); ++i) {
      require(m_schedule[i] >= n_schedule[i], "GroupSeqConfig: m_t must be >= n_t");
      require(m_schedule[i] <= n_schedule.back(), "GroupSeqConfig: m_t must not exceed n_T");
    }
    require(alpha > 0.0 && alpha < 1.0, "GroupSeqConfig: alpha must lie in (0,1)");
    require(beta_f > 0.0 && beta_f < 1.0, "GroupSeqConfig: beta_F must lie in (0,1)");
    sampler.validate();
  }
};

struct PredictiveResult {
  double probability = 0.0;
  bool non_convergence = false;
};

namespace detail {

// Z statistic of the pooled primary comparison; nullopt when an arm is empty.
inline std::optional<double> z_from_tallies(const std::array<ArmTally, 2>& t) {
  if (t[0].n == 0 || t[1].n == 0) return std::nullopt;
  return difference_test(t[1], t[0]).z;
}

inline double cond_primary_given_aux(const GroupTheta& th, int arm, int s) {
  if (th.sigma2 <= 0.0) {
    return logistic(th.zeta_y0 + th.zeta_y1 * arm);
  }
  const auto p = joint_cell_probs(th.zeta_y0 + th.zeta_y1 * arm, th.zeta_s0 + th.zeta_s1 * arm, th.sigma2);
  const double ps = s ? p[1] + p[3] : p[0] + p[2];
  const double joint = s ? p[3] : p[2];
  return ps > 0.0 ? joint / ps : 0.0;
}

}  // namespace detail

/// Posterior predictive probability that some later look t' > t has
/// Z_{t'} > z_{t'}, ignoring later futility looks. `data_t` is the interim
/// dataset: the first m_t enrollments with primaries observed for the first n_t.
/// Pending primaries are imputed given the observed auxiliary outcome; patients
/// not yet enrolled are simulated from the draw's marginal probabilities.
/// With sigma2 = 0 draws (single-outcome model) the auxiliary outcome is ignored.
inline PredictiveResult predictive_success_prob(const TrialDataset& data_t, const PosteriorDraws& draws,
                                                const BoundarySchedule& bounds, int stage,
                                                [[maybe_unused]] const GroupSeqConfig& config,
                                                std::uint64_t seed) {
  require(data_t.k_count == 1, "predictive_success_prob: single-population designs only");
  const int T = bounds.stages();
  PredictiveResult out;
  out.non_convergence = draws.non_convergence();
  if (stage >= T - 1 || draws.size() == 0) return out;

  auto patients = data_t.patients;
  std::stable_sort(patients.begin(), patients.end(),
                   [](const PatientRecord& a, const PatientRecord& b) { return a.enroll_order < b.enroll_order; });
  const int m_t = static_cast<int>(patients.size());
  std::array<ArmTally, 2> observed{};
  // pending[arm][s]: enrolled with primary pending, by position bucket (look index)
  const int looks = T - stage - 1;
  std::vector<std::array<std::array<int, 2>, 2>> pending(static_cast<std::size_t>(looks));
  for (int i = 0; i < m_t; ++i) {
    const auto& p = patients[i];
    if (p.primary_observed) {
      observed[p.arm].n += 1;
      observed[p.arm].x += p.primary;
      continue;
    }
    // first future look whose primary count covers this position
    int look = -1;
    for (int j = 0; j < looks; ++j) {
      if (i < bounds.n_schedule[stage + 1 + j]) {
        look = j;
        break;
      }
    }
    if (look >= 0) pending[look][p.arm][p.auxiliary] += 1;
  }
  // unenrolled patients entering each future look
  std::vector<int> fresh(static_cast<std::size_t>(looks));
  for (int j = 0; j < looks; ++j) {
    const int n_look = bounds.n_schedule[stage + 1 + j];
    const int prev = j == 0 ? m_t : std::max(m_t, bounds.n_schedule[stage + j]);
    fresh[j] = std::max(0, n_look - prev);
  }

  Rng rng = make_rng(seed);
  int hits = 0;
  for (const auto& d : draws.draws) {
    const auto& th = d.groups.front();
    const std::array<double, 2> py = {th.py(0), th.py(1)};
    std::array<std::array<double, 2>, 2> cond{};
    for (int arm = 0; arm < 2; ++arm) {
      for (int s = 0; s < 2; ++s) cond[arm][s] = detail::cond_primary_given_aux(th, arm, s);
    }
    auto tally = observed;
    bool crossed = false;
    for (int j = 0; j < looks; ++j) {
      for (int arm = 0; arm < 2; ++arm) {
        for (int s = 0; s < 2; ++s) {
          const int n = pending[j][arm][s];
          tally[arm].n += n;
          tally[arm].x += binomial(rng, n, cond[arm][s]);
        }
      }
      const int treated = binomial(rng, fresh[j], 0.5);
      const int ctrl = fresh[j] - treated;
      tally[1].n += treated;
      tally[1].x += binomial(rng, treated, py[1]);
      tally[0].n += ctrl;
      tally[0].x += binomial(rng, ctrl, py[0]);
      const auto z = detail::z_from_tallies(tally);
      if (z && *z > bounds.thresholds[stage + 1 + j]) {
        crossed = true;
        break;
      }
    }
    hits += crossed;
  }
  out.probability = static_cast<double>(hits) / static_cast<double>(draws.size());
  return out;
}

enum class StopReason { efficacy, futility, final_analysis };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::efficacy: return "efficacy";
    case StopReason::futility: return "futility";
    case StopReason::final_analysis: return "final";
  }
  return "?";
}

struct StageRecord {
  int stage = 0;  // 1-based
  int n = 0, m = 0;
  double z = 0.0;
  double threshold = 0.0;
  std::optional<double> predictive;  // absent at the final look
  bool non_convergence = false;
};

struct SequentialOutcome {
  int stop_stage = 0;  // 1-based T*
  bool rejected = false;
  StopReason stopped_for = StopReason::final_analysis;
  int n_used = 0;  // m_{T*}
  std::vector<StageRecord> stages;
};

/// Per-stage statistics of one trial, computed at every look regardless of
/// stopping. Decisions for any futility threshold follow from the trace alone.
struct SequentialTrace {
  std::vector<StageRecord> stages;
};

namespace detail {

inline TrialDataset design_view(const TrialDataset& full, DesignKind design) {
  return design == DesignKind::auxiliary_only ? swap_outcomes(full) : full;
}

inline double stage_z(const TrialDataset& view, int n_t) {
  const auto data_n = restrict_to_stage(view, n_t, n_t);
  const auto s = compute_summaries(data_n);
  return s.front().ok() ? s.front().z : 0.0;
}

inline PredictiveResult stage_predictive(const TrialDataset& view, const GroupSeqConfig& config,
                                         const PriorHyperparams& hyper, const BoundarySchedule& bounds, int t,
                                         std::uint64_t seed) {
  const auto data_m = restrict_to_stage(view, config.n_schedule[t], config.m_at(t));
  const auto post_seed = derive_seed(seed, static_cast<std::uint64_t>(t), 0);
  const auto pred_seed = derive_seed(seed, static_cast<std::uint64_t>(t), 1);
  PosteriorDraws draws;
  switch (config.design) {
    case DesignKind::auxiliary_augmented:
      draws = posterior_sample(data_m, hyper, config.sampler, post_seed);
      break;
    case DesignKind::primary_only:
      draws = posterior_sample_single(data_m, hyper, config.sampler, post_seed, false);
      break;
    case DesignKind::auxiliary_only:
      draws = posterior_sample_single(data_m, hyper, config.sampler, post_seed, true);
      break;
  }
  return predictive_success_prob(data_m, draws, bounds, t, config, pred_seed);
}

}  // namespace detail

/// Z and predictive probability at every look. The predictive probability at
/// look t uses seeds derived from (seed, t) only.
inline SequentialTrace sequential_trace(const TrialDataset& full_data, const GroupSeqConfig& config,
                                        const PriorHyperparams& hyper, const BoundarySchedule& bounds,
                                        std::uint64_t seed) {
  config.validate();
  require(full_data.k_count == 1 && hyper.k() == 1, "sequential designs require a single population (K = 1)");
  require(bounds.stages() == config.stages(), "boundary schedule does not match the design");
  require(static_cast<int>(full_data.size()) >= config.n_schedule.back(),
          "run_sequential_trial: dataset smaller than n_T");
  const auto view = detail::design_view(full_data, config.design);
  SequentialTrace trace;
  const int T = config.stages();
  for (int t = 0; t < T; ++t) {
    StageRecord r;
    r.stage = t + 1;
    r.n = config.n_schedule[t];
    r.m = config.m_at(t);
    r.threshold = bounds.thresholds[t];
    r.z = detail::stage_z(view, r.n);
    if (t + 1 < T) {
      const auto pp = detail::stage_predictive(view, config, hyper, bounds, t, seed);
      r.predictive = pp.probability;
      r.non_convergence = pp.non_convergence;
    }
    trace.stages.push_back(r);
  }
  return trace;
}

/// Decisions implied by a trace for futility threshold beta_f. A look rejects
/// when Z > threshold and stops for futility when the predictive probability
/// is at or below beta_f. `total_stages` is the design's T when the trace is
/// truncated (0: the trace covers every look).
inline SequentialOutcome decide_from_trace(const SequentialTrace& trace, double beta_f, InterimOrder order,
                                           int total_stages = 0) {
  SequentialOutcome out;
  const int T = total_stages > 0 ? total_stages : static_cast<int>(trace.stages.size());
  require(static_cast<int>(trace.stages.size()) <= T, "decide_from_trace: trace longer than the design");
  for (int t = 0; t < static_cast<int>(trace.stages.size()); ++t) {
    const auto& r = trace.stages[t];
    out.stages.push_back(r);
    out.stop_stage = t + 1;
    out.n_used = r.m;
    const bool efficacy = r.z > r.threshold;
    if (t + 1 == T) {
      out.rejected = efficacy;
      out.stopped_for = efficacy ? StopReason::efficacy : StopReason::final_analysis;
      break;
    }
    const bool futile = r.predictive && *r.predictive <= beta_f;
    if (order == InterimOrder::futility_first && futile) {
      out.stopped_for = StopReason::futility;
      break;
    }
    if (efficacy) {
      out.rejected = true;
      out.stopped_for = StopReason::efficacy;
      break;
    }
    if (futile) {
      out.stopped_for = StopReason::futility;
      break;
    }
  }
  return out;
}

/// Runs the design on one trial, computing the predictive probability only
/// at looks where it can change the decision.
inline SequentialOutcome run_sequential_trial(const TrialDataset& full_data, const GroupSeqConfig& config,
                                              const PriorHyperparams& hyper, const BoundarySchedule& bounds,
                                              std::uint64_t seed) {
  config.validate();
  require(full_data.k_count == 1 && hyper.k() == 1, "sequential designs require a single population (K = 1)");
  require(bounds.stages() == config.stages(), "boundary schedule does not match the design");
  require(static_cast<int>(full_data.size()) >= config.n_schedule.back(),
          "run_sequential_trial: dataset smaller than n_T");
  const auto view = detail::design_view(full_data, config.design);
  SequentialTrace partial;
  const int T = config.stages();
  for (int t = 0; t < T; ++t) {
    StageRecord r;
    r.stage = t + 1;
    r.n = config.n_schedule[t];
    r.m = config.m_at(t);
    r.threshold = bounds.thresholds[t];
    r.z = detail::stage_z(view, r.n);
    const bool efficacy = r.z > r.threshold;
    const bool need_pp = t + 1 < T && !(efficacy && config.order == InterimOrder::efficacy_first);
    if (need_pp) {
      const auto pp = detail::stage_predictive(view, config, hyper, bounds, t, seed);
      r.predictive = pp.probability;
      r.non_convergence = pp.non_convergence;
    }
    partial.stages.push_back(r);
    const bool futile = r.predictive && *r.predictive <= config.beta_f;
    if (efficacy || futile) break;
  }
  return decide_from_trace(partial, config.beta_f, config.order, T);
}

inline void write_trace_json_line(std::ostream& os, long replicate, const SequentialOutcome& o) {
  char buf[128];
  os << "{\"replicate\":" << replicate << ",\"stop_stage\":" << o.stop_stage
     << ",\"rejected\":" << (o.rejected ? "true" : "false") << ",\"stopped_for\":\"" << to_string(o.stopped_for)
     << "\",\"n_used\":" << o.n_used << ",\"stages\":[";
  for (std::size_t i = 0; i < o.stages.size(); ++i) {
    const auto& s = o.stages[i];
    std::snprintf(buf, sizeof buf, "{\"stage\":%d,\"n\":%d,\"m\":%d,\"z\":%.6f,\"threshold\":%.6f", s.stage, s.n,
                  s.m, s.z, s.threshold);
    os << (i ? "," : "") << buf;
    if (s.predictive) {
      std::snprintf(buf, sizeof buf, ",\"predictive\":%.6f", *s.predictive);
      os << buf;
    }
    os << ",\"non_convergence\":" << (s.non_convergence ? "true" : "false") << "}";
  }
  os << "]}\n";
}

}  // namespace auxtrial
