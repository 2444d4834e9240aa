#pragma once

// Parametric bootstrap calibration of the weighted Bonferroni level. Summary
// statistics are redrawn under the primary null from a bivariate normal fitted
// to the observed (sbar, ybar); alpha' is the smallest threshold whose
// estimated FWER reaches alpha.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "auxtrial/errors.hpp"
#include "auxtrial/multitest.hpp"
#include "auxtrial/numerics.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/trial_data.hpp"

namespace auxtrial {

// Covariance of (sbar_k, ybar_k).
struct SummaryCovariance {
  double var_s = 0.0;
  double var_y = 0.0;
  double cov = 0.0;
};

inline SummaryCovariance summary_covariance(const GroupSummary& s) {
  return {s.s_var_hat, s.var_hat, s.cov_sy};
}

struct CalibrationResult {
  double alpha_prime = 0.0;
  int resamples = 0;
  std::uint64_t seed = 0;
  std::vector<double> min_ratio;  // per resample, min_k pv_k / omega_k, ascending

  // Estimated FWER at threshold t: share of resamples with some pv_k < t * omega_k.
  double fwer_at(double t) const {
    const auto below = std::lower_bound(min_ratio.begin(), min_ratio.end(), t) - min_ratio.begin();
    return static_cast<double>(below) / static_cast<double>(min_ratio.size());
  }
};

/// Resample b uses seed derive_seed(seed, b).
inline CalibrationResult bootstrap_calibrate(std::span<const double> sbar_tilde,
                                             std::span<const SummaryCovariance> sigma_tilde,
                                             std::span<const double> beta, double alpha, int resamples,
                                             std::uint64_t seed, std::span<const double> prior_weights = {}) {
  const std::size_t k = sbar_tilde.size();
  require(k >= 1 && sigma_tilde.size() == k && beta.size() == k,
          "bootstrap_calibrate: inputs must have one entry per group");
  require(alpha > 0.0 && alpha < 1.0, "bootstrap_calibrate: alpha must lie in (0,1)");
  require(resamples >= 1, "bootstrap_calibrate: need at least one resample");

  // 2x2 Cholesky factors: s = ls0 * z0 ; y = ly0 * z0 + ly1 * z1
  std::vector<double> ls0(k), ly0(k), ly1(k);
  for (std::size_t g = 0; g < k; ++g) {
    const auto& c = sigma_tilde[g];
    const double tol = 1e-12 * std::max(1.0, c.var_s + c.var_y);
    if (!(c.var_s >= 0.0 && c.var_y > 0.0) || c.cov * c.cov > c.var_s * c.var_y + tol) {
      throw DegenerateCovariance("bootstrap_calibrate: covariance of group " + std::to_string(g) +
                                 " is not positive semidefinite");
    }
    ls0[g] = std::sqrt(c.var_s);
    ly0[g] = ls0[g] > 0.0 ? c.cov / ls0[g] : 0.0;
    ly1[g] = std::sqrt(std::max(0.0, c.var_y - ly0[g] * ly0[g]));
  }

  CalibrationResult out;
  out.resamples = resamples;
  out.seed = seed;
  out.min_ratio.resize(static_cast<std::size_t>(resamples));
  std::vector<double> sbar(k), pv(k);
  for (int b = 0; b < resamples; ++b) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    for (std::size_t g = 0; g < k; ++g) {
      const double z0 = standard_normal(rng);
      const double z1 = standard_normal(rng);
      sbar[g] = sbar_tilde[g] + ls0[g] * z0;
      const double ybar = ly0[g] * z0 + ly1[g] * z1;
      pv[g] = norm_sf(ybar / std::sqrt(sigma_tilde[g].var_y));
    }
    const auto w = softmax_weights(beta, sbar, prior_weights);
    double m = INFINITY;
    for (std::size_t g = 0; g < k; ++g) m = std::min(m, pv[g] / w[g]);
    out.min_ratio[static_cast<std::size_t>(b)] = m;
  }
  std::sort(out.min_ratio.begin(), out.min_ratio.end());
  const auto rank = static_cast<std::size_t>(std::ceil(alpha * resamples - 1e-9));
  const std::size_t idx = std::clamp<std::size_t>(rank, 1, out.min_ratio.size()) - 1;
  out.alpha_prime = std::clamp(out.min_ratio[idx], 0.0, 1.0);
  return out;
}

/// Calibrate from an observed trial: sbar_tilde and covariances are the
/// plug-in estimates of the summaries.
inline CalibrationResult calibrate_from_summaries(std::span<const GroupSummary> summaries,
                                                  const WeightedBonfConfig& config, int resamples,
                                                  std::uint64_t seed) {
  std::vector<double> sbar;
  std::vector<SummaryCovariance> cov;
  for (const auto& s : summaries) {
    sbar.push_back(s.sbar_diff);
    cov.push_back(summary_covariance(s));
  }
  const auto beta = config.beta_for(summaries.size());
  return bootstrap_calibrate(sbar, cov, beta, config.alpha, resamples, seed, config.prior_weights);
}

}  // namespace auxtrial
