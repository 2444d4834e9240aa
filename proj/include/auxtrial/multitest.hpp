#pragma once

// Subgroup multiple testing: the auxiliary-weighted Bonferroni procedure and the
// Bonferroni, Holm and auxiliary-only comparators.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auxtrial/errors.hpp"
#include "auxtrial/trial_data.hpp"

namespace auxtrial {

/// omega_k proportional to prior_k * exp(beta_k * sbar_k), computed with
/// max-subtraction. `prior` may be empty (all ones).
inline std::vector<double> softmax_weights(std::span<const double> beta, std::span<const double> sbar,
                                           std::span<const double> prior = {}) {
  require(beta.size() == sbar.size() && !beta.empty(), "softmax_weights: beta and sbar must match");
  require(prior.empty() || prior.size() == beta.size(), "softmax_weights: prior weight length");
  const std::size_t k = beta.size();
  std::vector<double> w(k);
  double top = -INFINITY;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = beta[i] * sbar[i] + (prior.empty() ? 0.0 : std::log(prior[i]));
    top = std::max(top, w[i]);
  }
  double total = 0.0;
  for (auto& x : w) {
    x = std::exp(x - top);
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

struct WeightedBonfConfig {
  double alpha = 0.05;
  std::vector<double> beta;               // one entry per group, or a single shared value
  std::optional<double> calibrated_alpha;
  std::vector<double> prior_weights;      // optional multiplicative weights, empty = all ones

  double effective_alpha() const { return calibrated_alpha.value_or(alpha); }

  std::vector<double> beta_for(std::size_t k) const {
    if (beta.empty()) return std::vector<double>(k, 0.0);
    if (beta.size() == 1) return std::vector<double>(k, beta.front());
    require(beta.size() == k, "WeightedBonfConfig: beta length must be 1 or K");
    return beta;
  }

  void validate() const {
    require(alpha > 0.0 && alpha < 1.0, "WeightedBonfConfig: alpha must lie in (0,1)");
    if (calibrated_alpha) {
      require(*calibrated_alpha >= 0.0 && *calibrated_alpha <= 1.0,
              "WeightedBonfConfig: calibrated alpha must lie in [0,1]");
    }
    for (double w : prior_weights) require(w > 0.0, "WeightedBonfConfig: prior weights must be > 0");
  }
};

struct GroupDecision {
  int group = 0;
  bool reject = false;
  double weight = 0.0;
  double threshold = 0.0;
  double pvalue = 1.0;
  bool empty_arm = false;
};

using TestDecision = std::vector<GroupDecision>;

inline std::vector<double> sbar_of(std::span<const GroupSummary> s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& g : s) out.push_back(g.sbar_diff);
  return out;
}

namespace detail {

inline TestDecision threshold_test(std::span<const GroupSummary> summaries, std::span<const double> weights,
                                   double alpha, bool use_auxiliary_pvalue) {
  TestDecision out;
  out.reserve(summaries.size());
  for (std::size_t k = 0; k < summaries.size(); ++k) {
    const auto& s = summaries[k];
    GroupDecision d;
    d.group = s.group;
    d.weight = weights[k];
    d.threshold = alpha * weights[k];
    d.empty_arm = !s.ok();
    d.pvalue = d.empty_arm ? 1.0 : (use_auxiliary_pvalue ? s.s_pvalue : s.pvalue);
    d.reject = !d.empty_arm && d.pvalue <= d.threshold;
    out.push_back(d);
  }
  return out;
}

}  // namespace detail

/// Reject H_{0,k} iff pv_k <= alpha_eff * omega_k(beta, sbar).
inline TestDecision auxiliary_augmented_test(std::span<const GroupSummary> summaries,
                                             const WeightedBonfConfig& config) {
  config.validate();
  const auto beta = config.beta_for(summaries.size());
  const auto sbar = sbar_of(summaries);
  const auto w = softmax_weights(beta, sbar, config.prior_weights);
  return detail::threshold_test(summaries, w, config.effective_alpha(), false);
}

inline TestDecision bonferroni_test(std::span<const GroupSummary> summaries, double alpha) {
  require(!summaries.empty(), "bonferroni_test: no groups");
  const std::vector<double> w(summaries.size(), 1.0 / static_cast<double>(summaries.size()));
  return detail::threshold_test(summaries, w, alpha, false);
}

// Bonferroni on the auxiliary-outcome p-values.
inline TestDecision auxiliary_only_test(std::span<const GroupSummary> summaries, double alpha) {
  require(!summaries.empty(), "auxiliary_only_test: no groups");
  const std::vector<double> w(summaries.size(), 1.0 / static_cast<double>(summaries.size()));
  return detail::threshold_test(summaries, w, alpha, true);
}

/// Step-down Holm. `threshold` and `weight` report the level at the step where
/// each hypothesis was considered.
inline TestDecision holm_test(std::span<const GroupSummary> summaries, double alpha) {
  require(!summaries.empty(), "holm_test: no groups");
  const std::size_t k = summaries.size();
  TestDecision out = bonferroni_test(summaries, alpha);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out[a].pvalue < out[b].pvalue; });
  bool open = true;
  for (std::size_t j = 0; j < k; ++j) {
    auto& d = out[order[j]];
    d.weight = 1.0 / static_cast<double>(k - j);
    d.threshold = alpha * d.weight;
    d.reject = open && !d.empty_arm && d.pvalue <= d.threshold;
    if (!d.reject) open = false;
  }
  return out;
}

enum class TestMethod { auxiliary_augmented, bonferroni, holm, auxiliary_only };

inline std::string to_string(TestMethod m) {
  switch (m) {
    case TestMethod::auxiliary_augmented: return "Auxiliary-Augmented";
    case TestMethod::bonferroni: return "Bonferroni";
    case TestMethod::holm: return "Holm";
    case TestMethod::auxiliary_only: return "Auxiliary-Only";
  }
  return "?";
}

inline TestMethod parse_test_method(const std::string& s) {
  if (s == "auxiliary-augmented" || s == "Auxiliary-Augmented") return TestMethod::auxiliary_augmented;
  if (s == "bonferroni" || s == "Bonferroni") return TestMethod::bonferroni;
  if (s == "holm" || s == "Holm") return TestMethod::holm;
  if (s == "auxiliary-only" || s == "Auxiliary-Only") return TestMethod::auxiliary_only;
  throw InvalidArgument("unknown test method '" + s + "'");
}

inline TestDecision apply_test(TestMethod m, std::span<const GroupSummary> summaries,
                               const WeightedBonfConfig& config) {
  switch (m) {
    case TestMethod::auxiliary_augmented: return auxiliary_augmented_test(summaries, config);
    case TestMethod::bonferroni: return bonferroni_test(summaries, config.alpha);
    case TestMethod::holm: return holm_test(summaries, config.alpha);
    case TestMethod::auxiliary_only: return auxiliary_only_test(summaries, config.alpha);
  }
  return {};
}

}  // namespace auxtrial
