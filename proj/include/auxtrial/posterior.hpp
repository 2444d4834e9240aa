#pragma once

// Posterior sampling for the joint logistic model and for the single-outcome
// variant. Patient-level latent effects are integrated out by Gauss-Hermite
// quadrature, so the chain only moves through a handful of parameters per group.
//
// Spike-and-slab and the optional point mass on c_Y are handled with pseudo
// priors: the slab value and c are always present with their prior
// distributions, and indicators switch whether they enter the likelihood.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "auxtrial/errors.hpp"
#include "auxtrial/numerics.hpp"
#include "auxtrial/prior_model.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/trial_data.hpp"

namespace auxtrial {

struct SamplerConfig {
  int draws = 2000;
  int burn_in = 500;
  double target_acceptance = 0.44;
  double min_acceptance = 0.05;
  double max_acceptance = 0.7;

  void validate() const {
    require(draws >= 1, "SamplerConfig: draws must be >= 1");
    require(burn_in >= 0, "SamplerConfig: burn_in must be >= 0");
  }
};

/// Counts of (arm, y, s) with 2 meaning "not observed".
struct CellCounts {
  std::array<std::array<std::array<int, 3>, 3>, 2> n{};

  int& at(int arm, int y, int s) { return n[arm][y][s]; }
  int at(int arm, int y, int s) const { return n[arm][y][s]; }
  int total() const {
    int t = 0;
    for (const auto& a : n) {
      for (const auto& r : a) {
        for (int c : r) t += c;
      }
    }
    return t;
  }
};

// One CellCounts per group. Primary outcomes not yet observed are counted as missing.
inline std::vector<CellCounts> cell_counts(const TrialDataset& data) {
  std::vector<CellCounts> out(static_cast<std::size_t>(data.k_count));
  for (const auto& p : data.patients) {
    out[p.group].at(p.arm, p.primary_observed ? p.primary : 2, p.auxiliary) += 1;
  }
  return out;
}

// Joint-model cell probabilities P(y, s | arm) for y, s in {0, 1}, indexed [2*y + s].
inline std::array<double, 4> joint_cell_probs(double eta_y, double eta_s, double sigma2) {
  std::array<double, 4> p{};
  const auto& rule = latent_rule();
  if (sigma2 <= 0.0) {
    const double fy = logistic(eta_y), fs = logistic(eta_s);
    return {(1 - fy) * (1 - fs), (1 - fy) * fs, fy * (1 - fs), fy * fs};
  }
  const double scale = std::numbers::sqrt2 * std::sqrt(sigma2);
  const auto nodes = rule.nodes();
  const auto weights = rule.weights();
  for (int i = 0; i < rule.size(); ++i) {
    const double e = scale * nodes[i];
    const double fy = logistic(eta_y + e), fs = logistic(eta_s + e);
    const double w = weights[i];
    p[0] += w * (1 - fy) * (1 - fs);
    p[1] += w * (1 - fy) * fs;
    p[2] += w * fy * (1 - fs);
    p[3] += w * fy * fs;
  }
  const double norm = 1.0 / std::sqrt(std::numbers::pi);
  for (auto& x : p) x *= norm;
  return p;
}

inline double joint_log_likelihood(const CellCounts& c, const GroupTheta& th) {
  double ll = 0.0;
  constexpr double tiny = 1e-300;
  for (int arm = 0; arm < 2; ++arm) {
    const auto p = joint_cell_probs(th.zeta_y0 + th.zeta_y1 * arm, th.zeta_s0 + th.zeta_s1 * arm, th.sigma2);
    const double py1 = p[2] + p[3], ps1 = p[1] + p[3];
    const std::array<std::array<double, 3>, 3> cell = {{
        {p[0], p[1], 1.0 - py1},
        {p[2], p[3], py1},
        {1.0 - ps1, ps1, 1.0},
    }};
    for (int y = 0; y < 3; ++y) {
      for (int s = 0; s < 3; ++s) {
        const int n = c.at(arm, y, s);
        if (n > 0) ll += n * std::log(std::max(cell[y][s], tiny));
      }
    }
  }
  return ll;
}

struct GroupDiagnostics {
  double acceptance = 0.0;     // mean post-burn-in acceptance of the random-walk moves
  double spike_rate = 0.0;     // share of draws with no treatment effect
  double ess = 0.0;            // effective sample size of the primary slope
  bool non_convergence = false;
};

struct PosteriorDraws {
  std::vector<ThetaDraw> draws;
  std::vector<GroupDiagnostics> diagnostics;

  std::size_t size() const { return draws.size(); }
  bool non_convergence() const {
    for (const auto& d : diagnostics) {
      if (d.non_convergence) return true;
    }
    return false;
  }
};

namespace detail {

inline double log_normal_density(double x, double m, double var) {
  return -0.5 * (x - m) * (x - m) / var;
}

// Effective sample size from the initial positive sequence of autocorrelations.
inline double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double m = mean(x);
  double c0 = 0.0;
  for (double v : x) c0 += (v - m) * (v - m);
  if (c0 <= 0.0) return static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t lag = 1; lag < n / 2; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (x[i] - m) * (x[i + lag] - m);
    const double rho = c / c0;
    if (rho <= 0.05) break;
    sum += rho;
  }
  return static_cast<double>(n) / (1.0 + 2.0 * sum);
}

// Random-walk step sizes adapted toward the target acceptance during burn-in.
struct Adaptive {
  std::vector<double> log_step;
  std::vector<int> accepted, tried;
  std::vector<long> post_accepted, post_tried;

  explicit Adaptive(std::vector<double> steps)
      : accepted(steps.size()), tried(steps.size()), post_accepted(steps.size()), post_tried(steps.size()) {
    for (double s : steps) log_step.push_back(std::log(s));
  }

  double step(std::size_t j) const { return std::exp(log_step[j]); }

  void record(std::size_t j, bool acc, bool burning) {
    if (burning) {
      accepted[j] += acc;
      tried[j] += 1;
    } else {
      post_accepted[j] += acc;
      post_tried[j] += 1;
    }
  }

  void adapt(int iteration, double target) {
    if ((iteration + 1) % 50 != 0) return;
    const double gain = std::min(0.5, 5.0 / std::sqrt(static_cast<double>(iteration + 1)));
    for (std::size_t j = 0; j < log_step.size(); ++j) {
      if (tried[j] == 0) continue;
      const double rate = static_cast<double>(accepted[j]) / tried[j];
      log_step[j] += gain * (rate - target);
      accepted[j] = tried[j] = 0;
    }
  }

  double post_acceptance() const {
    long a = 0, t = 0;
    for (std::size_t j = 0; j < post_tried.size(); ++j) {
      a += post_accepted[j];
      t += post_tried[j];
    }
    return t > 0 ? static_cast<double>(a) / static_cast<double>(t) : 0.0;
  }
};

struct JointState {
  double zy0, zs0, slab, u;  // u = logit(c)
  bool spike, c_zero;

  GroupTheta theta(double sigma2) const {
    GroupTheta t;
    t.sigma2 = sigma2;
    t.zeta_y0 = zy0;
    t.zeta_s0 = zs0;
    t.spike = spike;
    t.zeta_s1 = spike ? 0.0 : slab;
    t.c_y = c_zero ? 0.0 : logistic(u);
    t.zeta_y1 = t.c_y * t.zeta_s1;
    return t;
  }
};

inline double joint_log_prior(const JointState& s, const GroupPrior& p) {
  const double c = logistic(s.u);
  // Beta density on c plus the Jacobian of the logit transform: c^v (1 - c)^o
  return log_normal_density(s.zy0, p.intercept_y_mean, p.intercept_y_sd * p.intercept_y_sd) +
         log_normal_density(s.zs0, p.intercept_s_mean, p.intercept_s_sd * p.intercept_s_sd) +
         log_normal_density(s.slab, p.slab_mean, p.slab_var) + p.beta_v * std::log(c) +
         p.beta_o * std::log1p(-c);
}

inline double log_odds_indicator(double prob, bool on) {
  if (prob <= 0.0) return on ? -INFINITY : 0.0;
  if (prob >= 1.0) return on ? 0.0 : -INFINITY;
  return on ? std::log(prob) : std::log1p(-prob);
}

}  // namespace detail

/// Metropolis-within-Gibbs draws from the joint-model posterior of one group.
inline std::pair<std::vector<GroupTheta>, GroupDiagnostics> sample_group_joint(
    const CellCounts& counts, const GroupPrior& prior, double xi, double cy_spike,
    const SamplerConfig& cfg, Rng& rng) {
  using detail::JointState;
  JointState cur{prior.intercept_y_mean, prior.intercept_s_mean, prior.slab_mean,
                 logit(prior.beta_v / (prior.beta_v + prior.beta_o)), xi >= 1.0, cy_spike >= 1.0};
  auto log_lik = [&](const JointState& s) { return joint_log_likelihood(counts, s.theta(prior.sigma2)); };
  double cur_ll = log_lik(cur);
  double cur_lp = detail::joint_log_prior(cur, prior);
  detail::Adaptive ad({0.3, 0.3, 0.3, 0.8});

  std::vector<GroupTheta> kept;
  kept.reserve(static_cast<std::size_t>(cfg.draws));
  const int total = cfg.burn_in + cfg.draws;
  for (int it = 0; it < total; ++it) {
    const bool burning = it < cfg.burn_in;
    // continuous coordinates
    for (std::size_t j = 0; j < 4; ++j) {
      // coordinates that cannot affect the likelihood are refreshed from their priors
      const bool slab_free = cur.spike;
      const bool c_free = cur.spike || cur.c_zero;
      if (j == 2 && slab_free) {
        cur.slab = prior.slab_mean + std::sqrt(prior.slab_var) * standard_normal(rng);
        cur_lp = detail::joint_log_prior(cur, prior);
        continue;
      }
      if (j == 3 && c_free) {
        cur.u = logit(std::clamp(beta_draw(rng, prior.beta_v, prior.beta_o), 1e-12, 1.0 - 1e-12));
        cur_lp = detail::joint_log_prior(cur, prior);
        continue;
      }
      JointState prop = cur;
      const double delta = ad.step(j) * standard_normal(rng);
      switch (j) {
        case 0: prop.zy0 += delta; break;
        case 1: prop.zs0 += delta; break;
        case 2: prop.slab += delta; break;
        default: prop.u += delta; break;
      }
      const double prop_lp = detail::joint_log_prior(prop, prior);
      const double prop_ll = log_lik(prop);
      const bool acc = std::log(uniform01(rng)) < (prop_lp + prop_ll) - (cur_lp + cur_ll);
      if (acc) {
        cur = prop;
        cur_lp = prop_lp;
        cur_ll = prop_ll;
      }
      ad.record(j, acc, burning);
    }
    // indicator flips
    for (int which = 0; which < 2; ++which) {
      JointState prop = cur;
      double prob;
      if (which == 0) {
        prop.spike = !cur.spike;
        prob = xi;
      } else {
        if (cur.spike) continue;  // c_Y does not matter under the spike
        prop.c_zero = !cur.c_zero;
        prob = cy_spike;
      }
      const bool cur_on = which == 0 ? cur.spike : cur.c_zero;
      const bool prop_on = !cur_on;
      const double prior_ratio = detail::log_odds_indicator(prob, prop_on) - detail::log_odds_indicator(prob, cur_on);
      if (!std::isfinite(prior_ratio)) continue;
      const double prop_ll = log_lik(prop);
      if (std::log(uniform01(rng)) < prior_ratio + prop_ll - cur_ll) {
        cur = prop;
        cur_ll = prop_ll;
      }
    }
    if (burning) {
      ad.adapt(it, cfg.target_acceptance);
    } else {
      kept.push_back(cur.theta(prior.sigma2));
    }
  }

  GroupDiagnostics diag;
  diag.acceptance = ad.post_acceptance();
  std::vector<double> slope;
  slope.reserve(kept.size());
  int spikes = 0;
  for (const auto& t : kept) {
    slope.push_back(t.zeta_y1);
    spikes += t.spike;
  }
  diag.spike_rate = kept.empty() ? 0.0 : static_cast<double>(spikes) / static_cast<double>(kept.size());
  diag.ess = detail::effective_sample_size(slope);
  // All-spike chains never try the slab or c moves; their acceptance is not informative.
  const bool moves_tried = std::any_of(ad.post_tried.begin(), ad.post_tried.end(), [](long t) { return t > 0; });
  diag.non_convergence =
      moves_tried && (diag.acceptance < cfg.min_acceptance || diag.acceptance > cfg.max_acceptance);
  return {std::move(kept), diag};
}

/// Joint-model posterior for every group of an interim dataset. Groups are
/// a-priori independent, so each gets its own chain seeded from (seed, group).
inline PosteriorDraws posterior_sample(const TrialDataset& data, const PriorHyperparams& hyper,
                                       const SamplerConfig& cfg, std::uint64_t seed) {
  hyper.validate();
  cfg.validate();
  require(hyper.k() == data.k_count, "posterior_sample: prior and data disagree on K");
  require(!data.patients.empty(), "posterior_sample: need at least one observed outcome");
  const auto counts = cell_counts(data);
  PosteriorDraws out;
  out.draws.assign(static_cast<std::size_t>(cfg.draws), ThetaDraw{});
  for (auto& d : out.draws) d.groups.resize(static_cast<std::size_t>(data.k_count));
  for (int k = 0; k < data.k_count; ++k) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    auto [chain, diag] = sample_group_joint(counts[k], hyper.groups[k], hyper.xi, hyper.cy_spike, cfg, rng);
    for (std::size_t i = 0; i < chain.size(); ++i) out.draws[i].groups[k] = chain[i];
    out.diagnostics.push_back(diag);
  }
  return out;
}

// Prior of the single-outcome model F(zeta0 + zeta1 * arm): Gaussian intercept,
// spike-and-slab slope.
struct SingleOutcomePrior {
  double intercept_mean = 0.0;
  double intercept_sd = 1.0;
  double slab_mean = 0.0;
  double slab_var = 1.0;
  double xi = 0.1;

  // Prior for the primary outcome alone.
  static SingleOutcomePrior primary(const PriorHyperparams& h, int k) {
    const auto& g = h.groups[k];
    return {g.intercept_y_mean, g.intercept_y_sd, g.primary_slab_mean, g.primary_slab_var, h.xi};
  }
  // Prior for the auxiliary outcome alone.
  static SingleOutcomePrior auxiliary(const PriorHyperparams& h, int k) {
    const auto& g = h.groups[k];
    return {g.intercept_s_mean, g.intercept_s_sd, g.slab_mean, g.slab_var, h.xi};
  }
};

/// Draws for the single-outcome model. Results are returned as GroupTheta with
/// the outcome's parameters in the primary slots, sigma2 = 0 and c_Y = 1.
inline std::pair<std::vector<GroupTheta>, GroupDiagnostics> sample_group_single(
    std::array<ArmTally, 2> tally, const SingleOutcomePrior& prior, const SamplerConfig& cfg, Rng& rng) {
  struct State {
    double z0, slab;
    bool spike;
  };
  auto slope = [](const State& s) { return s.spike ? 0.0 : s.slab; };
  auto log_lik = [&](const State& s) {
    double ll = 0.0;
    for (int arm = 0; arm < 2; ++arm) {
      const double eta = s.z0 + slope(s) * arm;
      ll += tally[arm].x * log_logistic(eta) + (tally[arm].n - tally[arm].x) * log_logistic(-eta);
    }
    return ll;
  };
  auto log_prior = [&](const State& s) {
    return detail::log_normal_density(s.z0, prior.intercept_mean, prior.intercept_sd * prior.intercept_sd) +
           detail::log_normal_density(s.slab, prior.slab_mean, prior.slab_var);
  };
  State cur{prior.intercept_mean, prior.slab_mean, prior.xi >= 1.0};
  double cur_ll = log_lik(cur), cur_lp = log_prior(cur);
  detail::Adaptive ad({0.3, 0.3});
  std::vector<GroupTheta> kept;
  kept.reserve(static_cast<std::size_t>(cfg.draws));
  const int total = cfg.burn_in + cfg.draws;
  for (int it = 0; it < total; ++it) {
    const bool burning = it < cfg.burn_in;
    for (std::size_t j = 0; j < 2; ++j) {
      if (j == 1 && cur.spike) {
        cur.slab = prior.slab_mean + std::sqrt(prior.slab_var) * standard_normal(rng);
        cur_lp = log_prior(cur);
        continue;
      }
      State prop = cur;
      (j == 0 ? prop.z0 : prop.slab) += ad.step(j) * standard_normal(rng);
      const double prop_lp = log_prior(prop), prop_ll = log_lik(prop);
      const bool acc = std::log(uniform01(rng)) < (prop_lp + prop_ll) - (cur_lp + cur_ll);
      if (acc) {
        cur = prop;
        cur_lp = prop_lp;
        cur_ll = prop_ll;
      }
      ad.record(j, acc, burning);
    }
    State prop = cur;
    prop.spike = !cur.spike;
    const double prior_ratio =
        detail::log_odds_indicator(prior.xi, prop.spike) - detail::log_odds_indicator(prior.xi, cur.spike);
    if (std::isfinite(prior_ratio)) {
      const double prop_ll = log_lik(prop);
      if (std::log(uniform01(rng)) < prior_ratio + prop_ll - cur_ll) {
        cur = prop;
        cur_ll = prop_ll;
      }
    }
    if (burning) {
      ad.adapt(it, cfg.target_acceptance);
    } else {
      GroupTheta t;
      t.zeta_y0 = cur.z0;
      t.zeta_y1 = slope(cur);
      t.zeta_s1 = t.zeta_y1;
      t.c_y = 1.0;
      t.spike = cur.spike;
      t.sigma2 = 0.0;
      kept.push_back(t);
    }
  }
  GroupDiagnostics diag;
  diag.acceptance = ad.post_acceptance();
  std::vector<double> sl;
  int spikes = 0;
  for (const auto& t : kept) {
    sl.push_back(t.zeta_y1);
    spikes += t.spike;
  }
  diag.spike_rate = kept.empty() ? 0.0 : static_cast<double>(spikes) / static_cast<double>(kept.size());
  diag.ess = detail::effective_sample_size(sl);
  const bool moves_tried = std::any_of(ad.post_tried.begin(), ad.post_tried.end(), [](long t) { return t > 0; });
  diag.non_convergence =
      moves_tried && (diag.acceptance < cfg.min_acceptance || diag.acceptance > cfg.max_acceptance);
  return {std::move(kept), diag};
}

/// Single-outcome posterior using the primary column of `data` (observed only).
/// `use_auxiliary_prior` selects the auxiliary intercept and slab, for designs
/// that have swapped the auxiliary outcome into the primary slot.
inline PosteriorDraws posterior_sample_single(const TrialDataset& data, const PriorHyperparams& hyper,
                                              const SamplerConfig& cfg, std::uint64_t seed,
                                              bool use_auxiliary_prior = false) {
  hyper.validate();
  cfg.validate();
  require(hyper.k() == data.k_count, "posterior_sample_single: prior and data disagree on K");
  std::vector<std::array<ArmTally, 2>> tallies(static_cast<std::size_t>(data.k_count));
  for (const auto& p : data.patients) {
    if (!p.primary_observed) continue;
    tallies[p.group][p.arm].n += 1;
    tallies[p.group][p.arm].x += p.primary;
  }
  PosteriorDraws out;
  out.draws.assign(static_cast<std::size_t>(cfg.draws), ThetaDraw{});
  for (auto& d : out.draws) d.groups.resize(static_cast<std::size_t>(data.k_count));
  for (int k = 0; k < data.k_count; ++k) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const auto prior = use_auxiliary_prior ? SingleOutcomePrior::auxiliary(hyper, k) : SingleOutcomePrior::primary(hyper, k);
    auto [chain, diag] = sample_group_single(tallies[k], prior, cfg, rng);
    for (std::size_t i = 0; i < chain.size(); ++i) out.draws[i].groups[k] = chain[i];
    out.diagnostics.push_back(diag);
  }
  return out;
}

}  // namespace auxtrial
