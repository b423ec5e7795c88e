#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <cfm/common.hpp>
#include <cfm/interpolant.hpp>

namespace cfm {

// The joint training sample (x^(i), y^(i)), i = 1..N. Rows are aligned:
// row i of points_x belongs with row i of points_y.
struct EmpiricalSupport {
  Mat points_x;  // N x d
  Mat points_y;  // N x D

  EmpiricalSupport(Mat x, Mat y)
      : points_x(std::move(x)), points_y(std::move(y)) {
    require(points_x.rows() == points_y.rows() && points_x.rows() >= 1,
            "empirical support needs aligned, nonempty x/y rows");
  }

  Eigen::Index size() const { return points_x.rows(); }
  Eigen::Index dim_x() const { return points_x.cols(); }
  Eigen::Index dim_y() const { return points_y.cols(); }
};

// Interpolated target point x_bar(y) = sum_j x^(j) phi_j(y), with phi_j the
// piecewise-linear hat basis over the sorted training y values, clamped to
// the nearest endpoint outside the data range. Only the 1-D observation
// case is supported; the basis is interpolatory: x_bar(y^(j)) = x^(j).
inline Vec case1_xbar(const EmpiricalSupport& support, const Vec& y_query) {
  require(support.dim_y() == 1 && y_query.size() == 1,
          "case1_xbar: hat basis is built for scalar observations only");
  const Eigen::Index n = support.size();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return support.points_y(a, 0) < support.points_y(b, 0);
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    require(support.points_y(order[k - 1], 0) != support.points_y(order[k], 0),
            "case1_xbar: training y values must be distinct");
  }

  const double y = y_query(0);
  if (n == 1 || y <= support.points_y(order.front(), 0))
    return support.points_x.row(order.front());
  if (y >= support.points_y(order.back(), 0))
    return support.points_x.row(order.back());

  std::size_t hi = 1;
  while (support.points_y(order[hi], 0) < y) ++hi;
  const double y0 = support.points_y(order[hi - 1], 0);
  const double y1 = support.points_y(order[hi], 0);
  const double w = (y - y0) / (y1 - y0);
  return (1.0 - w) * support.points_x.row(order[hi - 1]).transpose() +
         w * support.points_x.row(order[hi]).transpose();
}

// Degenerate minimizer under an interpolatory partition-of-unity basis:
// all mass flows to x_bar(y) regardless of the starting point.
inline Vec case1_velocity(const EmpiricalSupport& support, const Vec& xi,
                          const Vec& y_query, double t) {
  check_time_not_terminal(t);
  const Vec xbar = case1_xbar(support, y_query);
  require(xbar.size() == xi.size(), "case1_velocity: state dimension mismatch");
  return (xbar - xi) / (1.0 - t);
}

// Gaussian-softmax weights over the support points sharing one observation
// cell: w_i proportional to exp(-|xi - t x^(i)|^2 / (2 (1-t)^2)) for a
// standard-normal source. Computed in log space with max subtraction;
// always a positive partition of unity.
inline Vec case2_weights(const EmpiricalSupport& support_subset, const Vec& xi,
                         double t) {
  check_time_not_terminal(t);
  require(support_subset.dim_x() == xi.size(),
          "case2_weights: state dimension mismatch");
  const Eigen::Index n = support_subset.size();

  Vec log_w(n);
  const double denom = 2.0 * (1.0 - t) * (1.0 - t);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sq =
        (xi - t * support_subset.points_x.row(i).transpose()).squaredNorm();
    log_w(i) = -sq / denom;
  }
  const double m = log_w.maxCoeff();
  Vec w = (log_w.array() - m).exp();
  return w / w.sum();
}

// Exact minimizer of the flow-matching loss over an empirical target with
// a standard-normal source: sum_i w_i(xi, t) (x^(i) - xi) / (1 - t). This
// is the overtraining oracle a fully fitted network converges to.
inline Vec exact_empirical_velocity(const EmpiricalSupport& support_subset,
                                    const Vec& xi, double t) {
  const Vec w = case2_weights(support_subset, xi, t);
  Vec v = Vec::Zero(xi.size());
  for (Eigen::Index i = 0; i < support_subset.size(); ++i) {
    v += w(i) * (support_subset.points_x.row(i).transpose() - xi);
  }
  return v / (1.0 - t);
}

// Conditional expectation E[X - Z | X_t = xi] for scalar Z ~ N(0,1) and
// X ~ N(mu, sigma^2): both Gaussian, so the regression is linear in xi.
// Finite for every t in [0, 1]; the t = 1 limit is xi.
inline double gaussian_velocity_oracle(double mu, double sigma, double xi,
                                       double t) {
  require(sigma > 0.0, "gaussian_velocity_oracle: sigma must be positive");
  check_time(t);
  const double s2 = sigma * sigma;
  const double var_xt = (1.0 - t) * (1.0 - t) + t * t * s2;
  return mu + (t * s2 - (1.0 - t)) * (xi - t * mu) / var_xt;
}

}  // namespace cfm
