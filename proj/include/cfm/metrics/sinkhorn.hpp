#pragma once

#include <cmath>
#include <vector>

#include <cfm/common.hpp>
#include <cfm/rng.hpp>

namespace cfm {

struct SinkhornConfig {
  double epsilon = 0.01;
  int max_iters = 5000;
  double convergence_tol = 1e-9;

  void validate() const {
    require(epsilon > 0.0 && convergence_tol > 0.0 && max_iters >= 1,
            "SinkhornConfig: epsilon, tolerance, max_iters must be positive");
  }
};

struct CloudPair {
  Mat a;  // M_a x d
  Mat b;  // M_b x d

  CloudPair(Mat a_, Mat b_) : a(std::move(a_)), b(std::move(b_)) {
    require(a.rows() >= 1 && b.rows() >= 1,
            "CloudPair: both clouds must be nonempty");
    require(a.cols() == b.cols(), "CloudPair: dimension mismatch");
    if (!(a.allFinite() && b.allFinite()))
      throw NumericError("CloudPair: non-finite points");
  }
};

struct SinkhornResult {
  double value = 0.0;        // regularized transport cost <P, C>
  int iterations = 0;
  bool converged = false;
  double marginal_violation = 0.0;
};

// Entropic optimal transport between two uniformly weighted point clouds
// under the squared Euclidean cost, computed with log-domain
// Sinkhorn-Knopp iterations (max-subtracted log-sum-exp, so potentials
// stay finite for any epsilon the config allows). Returns <P, C> without
// debiasing. Non-convergence within max_iters is reported in the result
// rather than thrown.
inline SinkhornResult sinkhorn_distance(const CloudPair& pair,
                                        const SinkhornConfig& cfg) {
  cfg.validate();
  const Eigen::Index ma = pair.a.rows();
  const Eigen::Index mb = pair.b.rows();
  const double eps = cfg.epsilon;
  const double log_wa = -std::log(static_cast<double>(ma));
  const double log_wb = -std::log(static_cast<double>(mb));

  // Cost matrix, row-major so both sweep directions stream by rows.
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;
  RowMat cost(ma, mb);
  const Vec a_sq = pair.a.rowwise().squaredNorm();
  const Vec b_sq = pair.b.rowwise().squaredNorm();
  cost.noalias() = -2.0 * pair.a * pair.b.transpose();
  cost.colwise() += a_sq;
  cost.rowwise() += b_sq.transpose();
  cost = cost.cwiseMax(0.0);

  Vec f = Vec::Zero(ma), g = Vec::Zero(mb), g_new(mb);
  Eigen::ArrayXd row_buf(mb), col_max(mb), col_sum(mb);

  // Writes T(g) into g_new (one full Sinkhorn sweep) and returns the
  // marginal violation of the plan at the current (f, g); the caller
  // chooses how to advance g.
  const auto sweep = [&](double stage_eps) {
    // f_i = -eps lse_j(log w_b + (g_j - C_ij) / eps)
    for (Eigen::Index i = 0; i < ma; ++i) {
      row_buf = (g.array() - cost.row(i).transpose().array()) / stage_eps;
      const double m = row_buf.maxCoeff();
      f(i) = -stage_eps * (log_wb + m + std::log((row_buf - m).exp().sum()));
    }
    // g_j = -eps lse_i(log w_a + (f_i - C_ij) / eps), streamed by rows.
    col_max.setConstant(-std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < ma; ++i)
      col_max =
          col_max.max((f(i) - cost.row(i).transpose().array()) / stage_eps);
    col_sum.setZero();
    for (Eigen::Index i = 0; i < ma; ++i)
      col_sum += ((f(i) - cost.row(i).transpose().array()) / stage_eps -
                  col_max)
                     .exp();
    g_new = -stage_eps * (log_wa + col_max + col_sum.log());
    // Column marginals of the plan built from (f, g_old) equal
    // w_b exp((g_old - g_new)/eps); their deviation from w_b is the
    // violation of the marginal constraint before this half-update.
    return (((g - g_new) / stage_eps).array().exp() - 1.0)
               .abs()
               .maxCoeff() *
           std::exp(log_wb);
  };

  SinkhornResult res;
  // Epsilon-scaling warm start: a few sweeps at geometrically decreasing
  // regularization seed the potentials, then Sinkhorn-Knopp runs at the
  // target epsilon until the tolerance or the iteration budget.
  const double max_cost = cost.maxCoeff();
  for (double stage_eps = max_cost / 8.0; stage_eps > eps;
       stage_eps *= 0.5) {
    for (int k = 0; k < 10 && res.iterations < cfg.max_iters; ++k) {
      const double violation = sweep(stage_eps);
      g = g_new;
      ++res.iterations;
      if (violation < 1e-3) break;
    }
  }

  // Anderson-accelerated fixed-point iteration on g (depth 5, restarted
  // whenever the residual grows). The reported violation always comes from
  // a plain sweep at the current iterate, so the stopping rule is the
  // same as for unaccelerated Sinkhorn-Knopp.
  constexpr int kDepth = 5;
  Mat dR(mb, kDepth), dT(mb, kDepth);
  Vec r_prev(mb), t_prev(mb);
  int hist = 0;
  double prev_res_norm = std::numeric_limits<double>::infinity();
  while (res.iterations < cfg.max_iters) {
    res.marginal_violation = sweep(eps);
    ++res.iterations;
    if (res.marginal_violation < cfg.convergence_tol) {
      g = g_new;
      res.converged = true;
      break;
    }

    const Vec r = g_new - g;
    const double res_norm = r.norm();
    if (!(res_norm <= prev_res_norm)) hist = 0;  // diverging mix: restart
    if (hist >= 1) {
      const int slot = (hist - 1) % kDepth;
      dR.col(slot) = r - r_prev;
      dT.col(slot) = g_new - t_prev;
    }
    bool accelerated = false;
    if (hist >= 1) {
      const int h = std::min(hist, kDepth);
      const Eigen::VectorXd gamma =
          dR.leftCols(h).colPivHouseholderQr().solve(r);
      if (gamma.allFinite() && gamma.norm() < 1e4) {
        const Vec proposal = g_new - dT.leftCols(h) * gamma;
        if (proposal.allFinite()) {
          g = proposal;
          accelerated = true;
        }
      }
      if (!accelerated) hist = 0;
    }
    if (!accelerated) g = g_new;
    r_prev = r;
    t_prev = g_new;
    prev_res_norm = res_norm;
    ++hist;
  }

  // <P, C> with P_ij = w_a w_b exp((f_i + g_j - C_ij) / eps).
  double value = 0.0;
  for (Eigen::Index i = 0; i < ma; ++i) {
    Eigen::ArrayXd c_row = cost.row(i).transpose().array();
    value += ((f(i) + g.array() - c_row) / eps).exp().cwiseProduct(c_row).sum();
  }
  res.value = value * std::exp(log_wa + log_wb);
  return res;
}

// Calibration scale for "how far apart are two same-distribution samples":
// the mean Sinkhorn distance between `repeats` pairs of disjoint random
// subsets of one reference cloud.
inline double self_distance_baseline(const Mat& reference,
                                     Eigen::Index subset_size, int repeats,
                                     const SinkhornConfig& cfg, Rng& rng) {
  require(2 * subset_size <= reference.rows(),
          "self_distance_baseline: 2 * subset_size exceeds the cloud");
  require(repeats >= 1 && subset_size >= 1,
          "self_distance_baseline: repeats and subset_size must be >= 1");

  double acc = 0.0;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(reference.rows()));
  for (int r = 0; r < repeats; ++r) {
    for (std::size_t i = 0; i < idx.size(); ++i)
      idx[i] = static_cast<Eigen::Index>(i);
    for (Eigen::Index i = 0; i < 2 * subset_size; ++i) {
      const std::size_t j = i + rng.index(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    Mat s1(subset_size, reference.cols()), s2(subset_size, reference.cols());
    for (Eigen::Index i = 0; i < subset_size; ++i) {
      s1.row(i) = reference.row(idx[i]);
      s2.row(i) = reference.row(idx[subset_size + i]);
    }
    acc += sinkhorn_distance({std::move(s1), std::move(s2)}, cfg).value;
  }
  return acc / repeats;
}

}  // namespace cfm
