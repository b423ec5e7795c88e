#pragma once

#include <cmath>
#include <numbers>

#include <cfm/common.hpp>
#include <cfm/dataset.hpp>
#include <cfm/rng.hpp>

namespace cfm {

// Two-dimensional joint density with a spiral ridge:
//   X = 0.1 (W sin W + C3),  Y = 0.1 (W cos W + C4),
//   W = 1.5 pi (1 + 2H),  H ~ U(0,1),  C3, C4 ~ N(0,1).
// Conditionals in X given Y are multimodal, which is what the benchmark
// probes.
struct SpiralSpec {
  double scale = 0.1;
};

inline PairedDataset spiral_generate(int n, const SpiralSpec& spec, Rng& rng) {
  require(n >= 1, "spiral_generate: n must be >= 1");
  Mat x(n, 1), y(n, 1);
  for (int i = 0; i < n; ++i) {
    const double w = 1.5 * std::numbers::pi * (1.0 + 2.0 * rng.uniform01());
    const double c3 = rng.normal();
    const double c4 = rng.normal();
    x(i, 0) = spec.scale * (w * std::sin(w) + c3);
    y(i, 0) = spec.scale * (w * std::cos(w) + c4);
  }
  return {std::move(x), std::move(y)};
}

class EmptyBandError : public std::runtime_error {
 public:
  EmptyBandError(Eigen::Index pool_size, double y_hat, double band)
      : std::runtime_error("no pool points within band " +
                           std::to_string(band) + " of y_hat " +
                           std::to_string(y_hat) + " (pool size " +
                           std::to_string(pool_size) + ")") {}
};

// Reference conditional sample: the x values of pool points whose y lies
// within a band of total width `band` centered on y_hat.
inline Vec spiral_reference_conditional(const PairedDataset& pool,
                                        double y_hat, double band = 0.1) {
  require(pool.dim_y() == 1, "spiral_reference_conditional: scalar y only");
  require(band > 0.0, "spiral_reference_conditional: band must be positive");
  std::vector<double> kept;
  for (Eigen::Index i = 0; i < pool.size(); ++i)
    if (std::abs(pool.y(i, 0) - y_hat) <= band / 2.0)
      kept.push_back(pool.x(i, 0));
  if (kept.empty()) throw EmptyBandError(pool.size(), y_hat, band);
  return Eigen::Map<Vec>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

}  // namespace cfm
