#pragma once

// Hwang-Shih-DeCani alpha spending and the matching one-sided efficacy
// boundaries for a group-sequential Z statistic with independent increments.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "auxtrial/errors.hpp"
#include "auxtrial/numerics.hpp"

namespace auxtrial {

/// Cumulative type-I error spent at information fraction r.
inline double hsd_spending(double r, double beta_e, double alpha) {
  require(r >= 0.0 && r <= 1.0, "hsd_spending: r must lie in [0,1]");
  if (beta_e == 0.0) return alpha * r;
  return alpha * std::expm1(-beta_e * r) / std::expm1(-beta_e);
}

struct BoundarySchedule {
  std::vector<int> n_schedule;
  std::vector<double> info_fraction;
  std::vector<double> spent;
  std::vector<double> increments;
  std::vector<double> thresholds;
  std::vector<bool> capped;  // increment below kMinIncrement: threshold set to kThresholdCap
  double beta_e = 0.0;
  double alpha = 0.0;

  static constexpr double kMinIncrement = 1e-10;
  static constexpr double kThresholdCap = 8.0;

  int stages() const { return static_cast<int>(thresholds.size()); }
  bool schedule_too_fine() const {
    for (bool c : capped) {
      if (c) return true;
    }
    return false;
  }
};

namespace detail {

// Sub-density of Q_t on the continuation region, tabulated on an odd Simpson grid.
struct GridDensity {
  double lo = 0.0, hi = 0.0;
  std::vector<double> f;

  double step() const { return (hi - lo) / static_cast<double>(f.size() - 1); }

  template <class G>
  double integrate(G&& g) const {
    const double h = step();
    double acc = 0.0;
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double w = (i == 0 || i + 1 == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      acc += w * f[i] * g(lo + h * static_cast<double>(i));
    }
    return acc * h / 3.0;
  }
};

inline constexpr int kBoundaryGrid = 1025;
inline constexpr double kGridFloor = -8.0;

}  // namespace detail

/// Thresholds z_t with P(Q_1 <= z_1, ..., Q_{t-1} <= z_{t-1}, Q_t > z_t) equal to
/// the spending increment at each look, where Q_t are standardized cumulative
/// statistics with Cov(Q_s, Q_t) = sqrt(n_s / n_t).
inline BoundarySchedule boundary_thresholds(const std::vector<int>& n_schedule, double beta_e, double alpha) {
  require(!n_schedule.empty(), "boundary_thresholds: empty schedule");
  require(alpha > 0.0 && alpha < 1.0, "boundary_thresholds: alpha must lie in (0,1)");
  require(n_schedule.front() > 0, "boundary_thresholds: sample sizes must be positive");
  for (std::size_t i = 1; i < n_schedule.size(); ++i) {
    require(n_schedule[i] > n_schedule[i - 1], "boundary_thresholds: schedule must be strictly increasing");
  }
  BoundarySchedule b;
  b.n_schedule = n_schedule;
  b.beta_e = beta_e;
  b.alpha = alpha;
  const double n_max = n_schedule.back();
  double prev = 0.0;
  for (int n : n_schedule) {
    const double r = n / n_max;
    const double s = hsd_spending(r, beta_e, alpha);
    b.info_fraction.push_back(r);
    b.spent.push_back(s);
    b.increments.push_back(s - prev);
    prev = s;
  }

  detail::GridDensity dens;
  for (std::size_t t = 0; t < n_schedule.size(); ++t) {
    const double inc = b.increments[t];
    const bool cap = inc < BoundarySchedule::kMinIncrement;
    double z = BoundarySchedule::kThresholdCap;
    double rho = 1.0, sd = 0.0;
    if (t > 0) {
      rho = std::sqrt(static_cast<double>(n_schedule[t - 1]) / n_schedule[t]);
      sd = std::sqrt(1.0 - rho * rho);
    }
    auto rejection_mass = [&](double zt) {
      if (t == 0) return norm_sf(zt);
      return dens.integrate([&](double q) { return norm_sf((zt - rho * q) / sd); });
    };
    if (!cap) {
      if (t == 0) {
        z = -norm_quantile(inc);
      } else {
        auto f = [&](double zt) { return rejection_mass(zt) - inc; };
        std::uintmax_t iters = 200;
        const auto bracket = boost::math::tools::toms748_solve(
            f, detail::kGridFloor + 2.0, BoundarySchedule::kThresholdCap, boost::math::tools::eps_tolerance<double>(50),
            iters);
        z = 0.5 * (bracket.first + bracket.second);
      }
      z = std::min(z, BoundarySchedule::kThresholdCap);
    }
    b.thresholds.push_back(z);
    b.capped.push_back(cap);

    // Propagate the continuation sub-density to the next look.
    if (t + 1 < n_schedule.size()) {
      detail::GridDensity next;
      next.lo = detail::kGridFloor;
      next.hi = z;
      next.f.resize(detail::kBoundaryGrid);
      const double h = next.step();
      for (int i = 0; i < detail::kBoundaryGrid; ++i) {
        const double q = next.lo + h * i;
        if (t == 0) {
          next.f[i] = norm_pdf(q);
        } else {
          next.f[i] = dens.integrate([&](double p) { return norm_pdf((q - rho * p) / sd) / sd; });
        }
      }
      dens = std::move(next);
    }
  }
  return b;
}

inline void write_boundaries_csv(std::ostream& os, const BoundarySchedule& b) {
  os << "stage,n,spent,increment,threshold,capped\n";
  char buf[160];
  for (int t = 0; t < b.stages(); ++t) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.10f,%.10f,%.6f,%d\n", t + 1, b.n_schedule[t], b.spent[t],
                  b.increments[t], b.thresholds[t], b.capped[t] ? 1 : 0);
    os << buf;
  }
}

}  // namespace auxtrial
