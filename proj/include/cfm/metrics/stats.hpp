#pragma once

#include <cmath>

#include <cfm/common.hpp>

namespace cfm {

struct EnsembleStats {
  Vec mean;
  Vec stddev;  // unbiased
};

inline EnsembleStats ensemble_stats(const Mat& samples) {
  require(samples.rows() >= 2,
          "ensemble_stats: std is undefined for fewer than 2 samples");
  EnsembleStats s;
  s.mean = samples.colwise().mean();
  const Mat centered = samples.rowwise() - s.mean.transpose();
  s.stddev = (centered.array().square().colwise().sum() /
              static_cast<double>(samples.rows() - 1))
                 .sqrt();
  return s;
}

inline double rmse(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "rmse: length mismatch");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

}  // namespace cfm
