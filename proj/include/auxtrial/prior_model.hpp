#pragma once

// Joint Bayesian logistic model for (primary, auxiliary) outcomes: both are
// logistic in an intercept, a treatment slope and a shared Gaussian latent
// effect. The auxiliary slope has a spike-and-slab prior and the primary slope
// is a Beta-distributed fraction of it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include "auxtrial/errors.hpp"
#include "auxtrial/numerics.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/trial_data.hpp"

namespace auxtrial {

struct GroupPrior {
  double intercept_y_mean = -1.5;
  double intercept_y_sd = 0.5;
  double intercept_s_mean = -0.8;
  double intercept_s_sd = 0.5;
  double sigma2 = 1.0;     // latent-effect variance
  double slab_mean = 0.0;  // m_S
  double slab_var = 0.8;   // sigma^2_S
  double beta_v = 6.0;     // c_Y ~ Beta(v, o)
  double beta_o = 1.0;
  // Slab for the primary slope in the single-outcome model (no auxiliary).
  double primary_slab_mean = 0.0;
  double primary_slab_var = 0.8;

  void validate() const {
    require(intercept_y_sd > 0.0 && intercept_s_sd > 0.0, "GroupPrior: intercept sds must be > 0");
    require(sigma2 >= 0.0, "GroupPrior: sigma2 must be >= 0");
    require(slab_var > 0.0 && primary_slab_var > 0.0, "GroupPrior: slab variances must be > 0");
    require(beta_v > 0.0 && beta_o > 0.0, "GroupPrior: Beta shapes must be > 0");
  }
};

struct PriorHyperparams {
  std::vector<GroupPrior> groups;
  double xi = 0.1;        // prior probability of no treatment effect
  double cy_spike = 0.0;  // optional point mass of c_Y at zero

  int k() const { return static_cast<int>(groups.size()); }

  void validate() const {
    require(!groups.empty(), "PriorHyperparams: need at least one group");
    require(xi >= 0.0 && xi <= 1.0, "PriorHyperparams: xi must lie in [0,1]");
    require(cy_spike >= 0.0 && cy_spike <= 1.0, "PriorHyperparams: cy_spike must lie in [0,1]");
    for (const auto& g : groups) g.validate();
  }

  // The default hyperparameters, identical across `k` groups.
  static PriorHyperparams standard(int k) {
    require(k >= 1, "PriorHyperparams: k must be >= 1");
    PriorHyperparams h;
    h.groups.assign(static_cast<std::size_t>(k), GroupPrior{});
    return h;
  }
};

struct GroupTheta {
  double zeta_y0 = 0.0, zeta_s0 = 0.0;
  double zeta_s1 = 0.0, zeta_y1 = 0.0;
  double c_y = 0.0;
  bool spike = false;
  double sigma2 = 0.0;

  // Latent-integrated marginal success probabilities by arm.
  double py(int arm) const { return logistic_normal_mean(zeta_y0 + zeta_y1 * arm, sigma2); }
  double ps(int arm) const { return logistic_normal_mean(zeta_s0 + zeta_s1 * arm, sigma2); }

  double gamma() const { return spike || zeta_y1 == 0.0 ? 0.0 : py(1) - py(0); }
};

struct ThetaDraw {
  std::vector<GroupTheta> groups;

  int k() const { return static_cast<int>(groups.size()); }
  std::vector<double> gamma() const {
    std::vector<double> out;
    out.reserve(groups.size());
    for (const auto& g : groups) out.push_back(g.gamma());
    return out;
  }
};

inline GroupTheta sample_group_theta(const GroupPrior& p, double xi, double cy_spike, Rng& rng) {
  GroupTheta t;
  t.sigma2 = p.sigma2;
  t.zeta_y0 = p.intercept_y_mean + p.intercept_y_sd * standard_normal(rng);
  t.zeta_s0 = p.intercept_s_mean + p.intercept_s_sd * standard_normal(rng);
  t.spike = bernoulli(rng, xi);
  const double slab = p.slab_mean + std::sqrt(p.slab_var) * standard_normal(rng);
  const bool c_zero = bernoulli(rng, cy_spike);
  const double c = beta_draw(rng, p.beta_v, p.beta_o);
  t.zeta_s1 = t.spike ? 0.0 : slab;
  t.c_y = c_zero ? 0.0 : c;
  t.zeta_y1 = t.c_y * t.zeta_s1;
  return t;
}

inline ThetaDraw sample_theta(const PriorHyperparams& hyper, Rng& rng) {
  hyper.validate();
  ThetaDraw th;
  th.groups.reserve(hyper.groups.size());
  for (const auto& g : hyper.groups) th.groups.push_back(sample_group_theta(g, hyper.xi, hyper.cy_spike, rng));
  return th;
}

/// Patient-level data from the model: group by prevalence, arm by fair coin,
/// one latent draw shared by Y and S.
inline TrialDataset sample_trial_from_prior(const ThetaDraw& theta, int n_total,
                                            std::span<const double> prevalence, Rng& rng) {
  require(static_cast<int>(prevalence.size()) == theta.k(),
          "sample_trial_from_prior: prevalence length must equal K");
  require(n_total >= 1, "sample_trial_from_prior: N must be >= 1");
  TrialDataset data;
  data.k_count = theta.k();
  data.patients.reserve(static_cast<std::size_t>(n_total));
  for (int i = 0; i < n_total; ++i) {
    PatientRecord p;
    p.group = theta.k() == 1 ? 0 : categorical(rng, prevalence);
    p.arm = bernoulli(rng, 0.5) ? 1 : 0;
    const auto& g = theta.groups[p.group];
    const double eps = std::sqrt(g.sigma2) * standard_normal(rng);
    p.primary = bernoulli(rng, logistic(g.zeta_y0 + g.zeta_y1 * p.arm + eps)) ? 1 : 0;
    p.auxiliary = bernoulli(rng, logistic(g.zeta_s0 + g.zeta_s1 * p.arm + eps)) ? 1 : 0;
    p.enroll_order = i;
    data.patients.push_back(p);
  }
  return data;
}

struct SummaryRow {
  std::string label;
  double mean = 0.0, min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct PriorPredictiveReport {
  std::vector<SummaryRow> rows;
  double te_correlation = 0.0;  // across replicates, TE on Y vs TE on S
  int replicates = 0;

  const SummaryRow& row(const std::string& label) const {
    for (const auto& r : rows) {
      if (r.label == label) return r;
    }
    throw InvalidArgument("no report row '" + label + "'");
  }
};

inline SummaryRow summarize(std::string label, std::vector<double> xs) {
  xs.erase(std::remove_if(xs.begin(), xs.end(), [](double x) { return std::isnan(x); }), xs.end());
  SummaryRow r;
  r.label = std::move(label);
  if (xs.empty()) return r;
  std::sort(xs.begin(), xs.end());
  r.mean = mean(xs);
  r.min = xs.front();
  r.q1 = quantile_sorted(xs, 0.25);
  r.median = quantile_sorted(xs, 0.5);
  r.q3 = quantile_sorted(xs, 0.75);
  r.max = xs.back();
  return r;
}

/// Distribution across simulated trials of arm-wise outcome proportions,
/// their differences and the within-trial Y-S correlation (pooled over groups).
/// Replicate r uses seed derive_seed(seed, r).
inline PriorPredictiveReport prior_predictive_report(const PriorHyperparams& hyper, int n_total,
                                                     std::span<const double> prevalence, int replicates,
                                                     std::uint64_t seed) {
  require(replicates >= 100, "prior_predictive_report: need at least 100 replicates");
  hyper.validate();
  std::vector<double> y0, y1, te_y, s0, s1, te_s, corr;
  for (int r = 0; r < replicates; ++r) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    const auto theta = sample_theta(hyper, rng);
    const auto data = sample_trial_from_prior(theta, n_total, prevalence, rng);
    std::array<ArmTally, 2> ty{}, ts{};
    std::vector<double> ys, ss;
    ys.reserve(data.size());
    ss.reserve(data.size());
    for (const auto& p : data.patients) {
      ty[p.arm].n += 1;
      ty[p.arm].x += p.primary;
      ts[p.arm].n += 1;
      ts[p.arm].x += p.auxiliary;
      ys.push_back(p.primary);
      ss.push_back(p.auxiliary);
    }
    y0.push_back(ty[0].rate());
    y1.push_back(ty[1].rate());
    te_y.push_back(ty[1].rate() - ty[0].rate());
    s0.push_back(ts[0].rate());
    s1.push_back(ts[1].rate());
    te_s.push_back(ts[1].rate() - ts[0].rate());
    corr.push_back(pearson(ys, ss));
  }
  PriorPredictiveReport rep;
  rep.replicates = replicates;
  rep.te_correlation = pearson(te_y, te_s);
  rep.rows.push_back(summarize("Proportion Y=1 (SOC)", y0));
  rep.rows.push_back(summarize("Proportion Y=1 (Treated)", y1));
  rep.rows.push_back(summarize("Difference in proportions (TE) for Y", te_y));
  rep.rows.push_back(summarize("Proportion S=1 (SOC)", s0));
  rep.rows.push_back(summarize("Proportion S=1 (Treated)", s1));
  rep.rows.push_back(summarize("Difference in proportions (TE) for S", te_s));
  rep.rows.push_back(summarize("Correlation between Y and S", corr));
  return rep;
}

inline void write_report_csv(std::ostream& os, const PriorPredictiveReport& rep) {
  os << "quantity,mean,min,q1,median,q3,max\n";
  auto f = [&](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return std::string(buf);
  };
  for (const auto& r : rep.rows) {
    os << '"' << r.label << "\"," << f(r.mean) << ',' << f(r.min) << ',' << f(r.q1) << ','
       << f(r.median) << ',' << f(r.q3) << ',' << f(r.max) << '\n';
  }
  os << "\"Correlation between TE on Y and TE on S\"," << f(rep.te_correlation) << ",,,,,\n";
}

}  // namespace auxtrial
