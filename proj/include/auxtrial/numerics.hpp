#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>

#include "auxtrial/errors.hpp"

namespace auxtrial {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Upper tail 1 - Phi(x), accurate for large x.
inline double norm_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double norm_quantile(double p) {
  require(p > 0.0 && p < 1.0, "norm_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// log F(x) for the logistic CDF, without overflow.
inline double log_logistic(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

/// Gauss-Hermite rule for integrals of the form  ∫ f(x) exp(-x^2) dx,
/// built by Golub-Welsch on the Hermite Jacobi matrix.
class GaussHermite {
 public:
  explicit GaussHermite(int n) : nodes_(n), weights_(n) {
    require(n >= 1, "GaussHermite: need at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    const double mu0 = std::sqrt(std::numbers::pi);
    for (int i = 0; i < n; ++i) {
      nodes_[i] = eig.eigenvalues()(i);
      const double v = eig.eigenvectors()(0, i);
      weights_[i] = mu0 * v * v;
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

  // E[f(eps)] with eps ~ N(0, sigma^2).
  template <class F>
  double normal_expectation(F&& f, double sigma) const {
    if (sigma <= 0.0) return f(0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      acc += weights_[i] * f(std::numbers::sqrt2 * sigma * nodes_[i]);
    }
    return acc / std::sqrt(std::numbers::pi);
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

inline constexpr int kLatentNodes = 30;

inline const GaussHermite& latent_rule() {
  static const GaussHermite rule(kLatentNodes);
  return rule;
}

// pr(outcome = 1) = E[F(mu + eps)], eps ~ N(0, sigma2).
inline double logistic_normal_mean(double mu, double sigma2) {
  return latent_rule().normal_expectation([mu](double e) { return logistic(mu + e); },
                                          std::sqrt(std::max(sigma2, 0.0)));
}

// Sample quantile with linear interpolation (R type 7); `sorted` must be ascending.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  require(!sorted.empty(), "quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1 denominator).
inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), "pearson: length mismatch");
  const double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace auxtrial
