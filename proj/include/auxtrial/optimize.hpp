#pragma once

// Decision-rule parameter search: grid evaluation with loess smoothing, and
// simulated annealing over a box.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "auxtrial/errors.hpp"
#include "auxtrial/numerics.hpp"
#include "auxtrial/random.hpp"
#include "auxtrial/utility.hpp"

namespace auxtrial {

struct LoessOptions {
  double span = 0.4;  // fraction of points in each local neighbourhood
  int degree = 1;
};

/// Local polynomial regression with tricube weights on the q = floor(span * n)
/// nearest points, evaluated at each x.
inline std::vector<double> loess_smooth(std::span<const double> x, std::span<const double> y,
                                        const LoessOptions& opt = {}) {
  require(x.size() == y.size(), "loess_smooth: length mismatch");
  require(opt.degree == 1 || opt.degree == 2, "loess_smooth: degree must be 1 or 2");
  const std::size_t n = x.size();
  if (n <= static_cast<std::size_t>(opt.degree) + 1) return {y.begin(), y.end()};
  const std::size_t q = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(opt.span * n)),
                                                static_cast<std::size_t>(opt.degree) + 1, n);
  std::vector<double> out(n);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist[j] = std::abs(x[j] - x[i]);
    std::vector<double> sorted = dist;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q - 1), sorted.end());
    double h = sorted[q - 1];
    if (h <= 0.0) h = 1e-12;
    // weighted least squares on (1, d, d^2) with d = x - x_i
    double s[5] = {0, 0, 0, 0, 0}, t[3] = {0, 0, 0};
    for (std::size_t j = 0; j < n; ++j) {
      const double u = dist[j] / h;
      if (u >= 1.0) continue;
      const double w = std::pow(1.0 - u * u * u, 3);
      const double d = x[j] - x[i];
      double p = w;
      for (int a = 0; a < 5; ++a) {
        s[a] += p;
        if (a < 3) t[a] += p * y[j];
        p *= d;
      }
    }
    if (opt.degree == 1) {
      const double det = s[0] * s[2] - s[1] * s[1];
      out[i] = std::abs(det) > 1e-300 ? (s[2] * t[0] - s[1] * t[1]) / det : t[0] / s[0];
    } else {
      Eigen::Matrix3d m;
      m << s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4];
      const Eigen::Vector3d rhs(t[0], t[1], t[2]);
      const Eigen::Vector3d beta = m.colPivHouseholderQr().solve(rhs);
      out[i] = std::isfinite(beta(0)) ? beta(0) : t[0] / s[0];
    }
  }
  return out;
}

// Evaluates every replicate utility for a candidate parameter vector.
using UtilityObjective = std::function<McEstimate(const std::vector<double>&)>;

struct UtilityCurve {
  std::vector<std::string> param_names;
  std::vector<std::vector<double>> params;
  std::vector<double> raw;
  std::vector<double> se;
  std::vector<double> smoothed;
  std::size_t argmax = 0;
  std::vector<double> best_params;
  double best_smoothed = 0.0;
  double best_raw = 0.0;
  double best_se = 0.0;
  std::string method;
  nlohmann::json provenance = nlohmann::json::object();

  // standard error of raw[i] - raw[j], treating the two estimates as independent
  double combined_se(std::size_t i, std::size_t j) const { return std::sqrt(se[i] * se[i] + se[j] * se[j]); }
};

struct Bounds {
  std::vector<double> lower, upper;

  void validate() const {
    if (lower.empty() || lower.size() != upper.size()) throw BoundsEmpty("bounds must be non-empty and matched");
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (!(lower[i] <= upper[i])) throw BoundsEmpty("bounds are empty in coordinate " + std::to_string(i));
    }
  }
};

/// Evenly spaced grid with `points` values per coordinate.
inline std::vector<std::vector<double>> grid_points(const Bounds& b, std::vector<int> points) {
  b.validate();
  require(points.size() == b.lower.size(), "grid_points: one resolution per coordinate");
  std::vector<std::vector<double>> axes;
  for (std::size_t d = 0; d < points.size(); ++d) {
    require(points[d] >= 1, "grid_points: resolution must be >= 1");
    std::vector<double> ax;
    for (int i = 0; i < points[d]; ++i) {
      ax.push_back(points[d] == 1 ? b.lower[d]
                                  : b.lower[d] + (b.upper[d] - b.lower[d]) * i / (points[d] - 1.0));
    }
    axes.push_back(std::move(ax));
  }
  std::vector<std::vector<double>> out{{}};
  for (const auto& ax : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (double v : ax) {
        auto p = prefix;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  return out;
}

/// Grid search. One-dimensional grids are loess-smoothed and the argmax is taken
/// on the smoothed curve; higher-dimensional grids use the raw estimates.
inline UtilityCurve grid_search(const std::vector<std::vector<double>>& candidates, const UtilityObjective& objective,
                                const LoessOptions& loess = {}) {
  if (candidates.empty()) throw BoundsEmpty("grid_search: no candidates");
  UtilityCurve c;
  c.method = "grid";
  c.params = candidates;
  for (const auto& p : candidates) {
    const auto e = objective(p);
    c.raw.push_back(e.estimate);
    c.se.push_back(e.se);
  }
  if (candidates.front().size() == 1) {
    std::vector<double> x;
    for (const auto& p : candidates) x.push_back(p.front());
    c.smoothed = loess_smooth(x, c.raw, loess);
    c.provenance["smoother"] = {{"kind", "loess"}, {"span", loess.span}, {"degree", loess.degree}};
  } else {
    c.smoothed = c.raw;
    c.provenance["smoother"] = "none";
  }
  c.argmax = static_cast<std::size_t>(std::max_element(c.smoothed.begin(), c.smoothed.end()) - c.smoothed.begin());
  c.best_params = c.params[c.argmax];
  c.best_smoothed = c.smoothed[c.argmax];
  c.best_raw = c.raw[c.argmax];
  c.best_se = c.se[c.argmax];
  return c;
}

struct AnnealingOptions {
  int epochs = 50;
  int moves_per_epoch = 10;
  double cooling = 0.95;
  int pilot = 20;
  int restarts = 1;
  double step_fraction = 0.1;  // proposal sd as a fraction of each coordinate's range
};

/// Simulated annealing over a box. The initial temperature is the interquartile
/// range of pilot utilities at uniformly drawn points (at least 1e-6). Each
/// restart begins from the best point found so far. The best point is
/// re-evaluated with `reevaluate` when given.
inline UtilityCurve anneal(const Bounds& bounds, const UtilityObjective& objective, std::uint64_t seed,
                           const AnnealingOptions& opt = {}, const UtilityObjective& reevaluate = {}) {
  bounds.validate();
  require(opt.epochs >= 1 && opt.moves_per_epoch >= 1 && opt.restarts >= 1, "anneal: invalid schedule");
  Rng rng = make_rng(seed);
  const std::size_t dim = bounds.lower.size();
  UtilityCurve c;
  c.method = "annealing";
  auto record = [&](const std::vector<double>& p, const McEstimate& e) {
    c.params.push_back(p);
    c.raw.push_back(e.estimate);
    c.se.push_back(e.se);
  };
  auto uniform_point = [&] {
    std::vector<double> p(dim);
    for (std::size_t d = 0; d < dim; ++d) p[d] = bounds.lower[d] + (bounds.upper[d] - bounds.lower[d]) * uniform01(rng);
    return p;
  };

  std::vector<double> pilot_values;
  std::vector<double> best;
  double best_value = -INFINITY;
  for (int i = 0; i < std::max(opt.pilot, 1); ++i) {
    const auto p = uniform_point();
    const auto e = objective(p);
    record(p, e);
    pilot_values.push_back(e.estimate);
    if (e.estimate > best_value) {
      best_value = e.estimate;
      best = p;
    }
  }
  std::sort(pilot_values.begin(), pilot_values.end());
  const double t0 = std::max(1e-6, quantile_sorted(pilot_values, 0.75) - quantile_sorted(pilot_values, 0.25));

  for (int restart = 0; restart < opt.restarts; ++restart) {
    auto cur = best;
    double cur_value = best_value;
    double temp = t0;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
      for (int m = 0; m < opt.moves_per_epoch; ++m) {
        auto prop = cur;
        for (std::size_t d = 0; d < dim; ++d) {
          const double range = bounds.upper[d] - bounds.lower[d];
          prop[d] = std::clamp(prop[d] + opt.step_fraction * range * standard_normal(rng), bounds.lower[d],
                               bounds.upper[d]);
        }
        const auto e = objective(prop);
        record(prop, e);
        if (e.estimate >= cur_value || uniform01(rng) < std::exp((e.estimate - cur_value) / temp)) {
          cur = prop;
          cur_value = e.estimate;
        }
        if (e.estimate > best_value) {
          best_value = e.estimate;
          best = prop;
        }
      }
      temp *= opt.cooling;
    }
  }
  c.smoothed = c.raw;
  c.argmax = static_cast<std::size_t>(std::max_element(c.raw.begin(), c.raw.end()) - c.raw.begin());
  c.best_params = best;
  const auto final_eval = reevaluate ? reevaluate(best) : objective(best);
  c.best_raw = final_eval.estimate;
  c.best_se = final_eval.se;
  c.best_smoothed = final_eval.estimate;
  c.provenance["annealing"] = {{"epochs", opt.epochs},       {"moves_per_epoch", opt.moves_per_epoch},
                               {"cooling", opt.cooling},     {"pilot", opt.pilot},
                               {"restarts", opt.restarts},   {"initial_temperature", t0},
                               {"seed", seed}};
  return c;
}

inline void write_curve_csv(std::ostream& os, const UtilityCurve& c) {
  for (std::size_t d = 0; d < (c.params.empty() ? 1 : c.params.front().size()); ++d) {
    os << (d < c.param_names.size() ? c.param_names[d] : "param" + std::to_string(d)) << ',';
  }
  os << "raw,smoothed,se\n";
  char buf[64];
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    for (double v : c.params[i]) {
      std::snprintf(buf, sizeof buf, "%.6g,", v);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", c.raw[i], c.smoothed[i], c.se[i]);
    os << buf;
  }
}

inline nlohmann::json curve_sidecar(const UtilityCurve& c) {
  nlohmann::json j;
  j["method"] = c.method;
  j["param_names"] = c.param_names;
  j["argmax"] = c.best_params;
  j["utility_smoothed"] = c.best_smoothed;
  j["utility_raw"] = c.best_raw;
  j["utility_se"] = c.best_se;
  j["provenance"] = c.provenance;
  return j;
}

}  // namespace auxtrial
