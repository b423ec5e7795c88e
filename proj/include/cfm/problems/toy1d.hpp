#pragma once

#include <cmath>
#include <numbers>

#include <cfm/common.hpp>
#include <cfm/dataset.hpp>
#include <cfm/rng.hpp>

namespace cfm {

// 1-D additive-noise model Y = X + eta with X ~ U(-1, 1) and
// eta ~ N(0, 0.25^2). The posterior is a truncated normal, which makes
// this the reference problem for the overfitting study.
struct Toy1dSpec {
  double noise_std = 0.25;

  void validate() const {
    require(noise_std > 0.0, "Toy1dSpec: noise_std must be positive");
  }
};

inline PairedDataset toy1d_generate(int n, const Toy1dSpec& spec, Rng& rng) {
  spec.validate();
  require(n >= 1, "toy1d_generate: n must be >= 1");
  Mat x(n, 1), y(n, 1);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    y(i, 0) = x(i, 0) + rng.normal(0.0, spec.noise_std);
  }
  return {std::move(x), std::move(y)};
}

// Density of N(y_hat, noise_std^2) truncated to [-1, 1]; zero outside.
inline double toy1d_posterior_pdf(double x, double y_hat,
                                  const Toy1dSpec& spec = {}) {
  spec.validate();
  if (x < -1.0 || x > 1.0) return 0.0;
  const double s = spec.noise_std;
  const auto std_cdf = [](double v) {
    return 0.5 * std::erfc(-v / std::numbers::sqrt2);
  };
  const double z = std_cdf((1.0 - y_hat) / s) - std_cdf((-1.0 - y_hat) / s);
  const double u = (x - y_hat) / s;
  return std::exp(-0.5 * u * u) /
         (s * std::sqrt(2.0 * std::numbers::pi) * z);
}

}  // namespace cfm
