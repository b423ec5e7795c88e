#pragma once

#include <cmath>
#include <numbers>

#include <cfm/common.hpp>

namespace cfm {

struct KdeResult {
  Vec density;
  double bandwidth = 0.0;
  bool fallback_bandwidth = false;  // set when auto-selection degenerated
};

// Gaussian-kernel density estimate on a set of evaluation points.
// bandwidth <= 0 selects Silverman's rule 1.06 sigma n^(-1/5); a sample
// with zero spread falls back to bandwidth 1e-3.
inline KdeResult kde_1d(const Vec& samples, const Vec& eval_points,
                        double bandwidth = 0.0) {
  require(samples.size() >= 1, "kde_1d: need at least one sample");
  const auto n = static_cast<double>(samples.size());

  KdeResult res;
  if (bandwidth > 0.0) {
    res.bandwidth = bandwidth;
  } else {
    double sigma = 0.0;
    if (samples.size() > 1) {
      const double mean = samples.mean();
      sigma = std::sqrt((samples.array() - mean).square().sum() / (n - 1.0));
    }
    if (sigma == 0.0) {
      res.bandwidth = 1e-3;
      res.fallback_bandwidth = true;
    } else {
      res.bandwidth = 1.06 * sigma * std::pow(n, -0.2);
    }
  }

  const double h = res.bandwidth;
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  res.density.resize(eval_points.size());
  for (Eigen::Index i = 0; i < eval_points.size(); ++i) {
    res.density(i) =
        norm *
        (-((samples.array() - eval_points(i)) / h).square() * 0.5).exp().sum();
  }
  return res;
}

// Local maxima of a density grid that rise above `threshold_frac` of the
// global peak; plateau points count once.
inline int count_modes(const Vec& density, double threshold_frac = 0.1) {
  require(density.size() >= 1, "count_modes: empty grid");
  const double cutoff = density.maxCoeff() * threshold_frac;
  int modes = 0;
  const Eigen::Index n = density.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || density(i) > density(i - 1);
    bool right_ok = true;
    Eigen::Index j = i;
    while (j + 1 < n && density(j + 1) == density(i)) ++j;  // skip plateau
    right_ok = j + 1 == n || density(j + 1) < density(i);
    if (left_ok && right_ok && density(i) >= cutoff) ++modes;
  }
  return modes;
}

}  // namespace cfm
