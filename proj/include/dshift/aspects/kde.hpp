#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "dshift/aspects/embedding.hpp"
#include "dshift/common/error.hpp"

namespace dshift {

// Mean of isotropic 2-D Gaussian kernels with standard deviation `bandwidth`
// centred on `points`.
struct DensityEstimator {
  std::vector<Point2> points;
  double bandwidth = 1.0;
};

inline double kde_bandwidth_floor(std::span<const Point2> pts) {
  double extent = 0.0;
  for (int d = 0; d < 2; ++d) {
    auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                        [d](const Point2& a, const Point2& b) { return a[d] < b[d]; });
    extent = std::max(extent, (*hi)[d] - (*lo)[d]);
  }
  return 1e-6 * (extent > 0.0 ? extent : 1.0);
}

// Silverman's rule in 2-D, n^(-1/6) * sigma_d, averaged over both
// dimensions (sigma_d is the n-1 sample standard deviation), floored at
// 1e-6 times the data extent.
inline double kde_bandwidth(std::span<const Point2> pts) {
  if (pts.empty()) throw DataError("kernel density estimate needs at least one point");
  const double n = double(pts.size());
  double h = 0.0;
  if (pts.size() > 1) {
    for (int d = 0; d < 2; ++d) {
      double mean = 0.0;
      for (const auto& p : pts) mean += p[d];
      mean /= n;
      double ss = 0.0;
      for (const auto& p : pts) ss += (p[d] - mean) * (p[d] - mean);
      h += std::pow(n, -1.0 / 6.0) * std::sqrt(ss / (n - 1.0));
    }
    h /= 2.0;
  }
  return std::max(h, kde_bandwidth_floor(pts));
}

inline DensityEstimator fit_kde(std::vector<Point2> points) {
  const double h = kde_bandwidth(points);
  return {std::move(points), h};
}

// log of the density at x, computed with a log-sum-exp so far-away queries
// do not underflow.
inline double kde_log_density(std::span<const Point2> pts, double h, const Point2& x) {
  const double inv2h2 = 1.0 / (2.0 * h * h);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    const double dx = x[0] - p[0];
    const double dy = x[1] - p[1];
    best = std::max(best, -(dx * dx + dy * dy) * inv2h2);
  }
  double sum = 0.0;
  for (const auto& p : pts) {
    const double dx = x[0] - p[0];
    const double dy = x[1] - p[1];
    sum += std::exp(-(dx * dx + dy * dy) * inv2h2 - best);
  }
  return best + std::log(sum) - std::log(double(pts.size()) * 2.0 * std::numbers::pi * h * h);
}

inline double kde_log_density(const DensityEstimator& est, const Point2& x) {
  return kde_log_density(est.points, est.bandwidth, x);
}

inline double eval_kde(const DensityEstimator& est, const Point2& x) {
  return std::exp(kde_log_density(est, x));
}

}  // namespace dshift
