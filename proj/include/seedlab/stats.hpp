#ifndef SEEDLAB_STATS_HPP
#define SEEDLAB_STATS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "seedlab/core.hpp"

namespace seedlab {

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw Error("empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation; 0 for fewer than two values.
inline double stddev_of(std::span<const double> xs) {
  const double m = mean_of(xs);
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Coefficient of variation (sample std over mean); 0 for a constant sample.
inline double coefficient_of_variation(std::span<const double> xs) {
  const double s = stddev_of(xs);
  if (s == 0.0) return 0.0;
  const double m = mean_of(xs);
  if (m == 0.0) throw Error("coefficient of variation undefined for zero mean");
  return s / std::abs(m);
}

struct Correlation {
  double r = 0.0;
  double p = 1.0;  ///< two-sided, Student t with n - 2 degrees of freedom
};

/// Pearson correlation. Absent when either column is constant or n < 3.
inline std::optional<Correlation> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("correlation columns differ in length");
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  Correlation c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::abs(c.r) >= 1.0) {
    c.p = 0.0;
    return c;
  }
  const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
  boost::math::students_t dist(df);
  c.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return c;
}

/// Average ranks (1-based), ties sharing the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation (Pearson on average ranks). Absent when either
/// column is constant.
inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("correlation columns differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  if (x.size() < 2) return std::nullopt;
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace seedlab

#endif  // SEEDLAB_STATS_HPP
