#pragma once

#include <vector>

#include <cfm/common.hpp>
#include <cfm/dataset.hpp>
#include <cfm/mlp.hpp>
#include <cfm/ode.hpp>
#include <cfm/rng.hpp>

namespace cfm {

// A trained velocity field ready for sampling: the network config plus the
// parameter vector actually used (raw or EMA, resolved by the caller).
struct VelocityModel {
  MlpConfig cfg;
  Vec params;
};

// Conditional samples for one measurement, in physical units. Path lengths
// and step counts are accounted in the normalized coordinates the ODE is
// integrated in.
struct PosteriorEnsemble {
  Mat samples;      // M x d
  Vec y_condition;  // physical units
  Vec mean;
  Vec stddev;
  double avg_n_steps = 0.0;
  double avg_path_length = 0.0;
  std::vector<int> failed_samples;  // indices whose solve did not converge
};

// Transports M source draws to the conditional density at y_hat by
// integrating the probability-flow ODE with the trained velocity field.
// Gaussian sources start from N(0, I_d) in normalized coordinates;
// prior sources draw rows without replacement from `prior_pool` (physical
// units, disjoint from train/test by the caller's arrangement).
inline PosteriorEnsemble sample_posterior(const VelocityModel& model,
                                          const Normalizer& norm,
                                          const Vec& y_hat, SourceKind source,
                                          const Mat* prior_pool, int n_samples,
                                          const SolverConfig& solver_cfg,
                                          Rng& rng) {
  require(n_samples >= 1, "sample_posterior: need at least one sample");
  require(y_hat.size() == model.cfg.cond_dim,
          "sample_posterior: y_hat dimension mismatch");
  const int d = model.cfg.state_dim;

  Mat x0(n_samples, d);
  if (source == SourceKind::gaussian) {
    x0 = rng.normal_matrix(n_samples, d);
  } else {
    require(prior_pool != nullptr, "sample_posterior: prior pool required");
    require(prior_pool->rows() >= n_samples,
            "sample_posterior: prior pool smaller than the request");
    require(prior_pool->cols() == d,
            "sample_posterior: prior pool dimension mismatch");
    // Partial Fisher-Yates draw without replacement.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(prior_pool->rows()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      idx[i] = static_cast<Eigen::Index>(i);
    for (int i = 0; i < n_samples; ++i) {
      const std::size_t j = i + rng.index(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    Mat picked(n_samples, d);
    for (int i = 0; i < n_samples; ++i) picked.row(i) = prior_pool->row(idx[i]);
    x0 = norm.apply_x(picked);
  }

  const Vec y_norm = norm.apply_y(y_hat.transpose()).row(0);
  auto field = [&](double t, const Vec& x, Vec& dx) {
    dx = mlp_forward_one(model.cfg, model.params, x, y_norm, t);
  };

  Mat samples_norm(n_samples, d);
  PosteriorEnsemble ens;
  double steps_sum = 0.0, path_sum = 0.0;
  int ok_count = 0;
  for (int i = 0; i < n_samples; ++i) {
    const OdeSolveResult r = rk45_integrate(field, x0.row(i), solver_cfg);
    samples_norm.row(i) = r.x_final;
    if (r.status == SolveStatus::ok) {
      steps_sum += r.n_steps;
      path_sum += r.path_length;
      ++ok_count;
    } else {
      ens.failed_samples.push_back(i);
    }
  }

  ens.samples = norm.invert_x(samples_norm);
  ens.y_condition = y_hat;
  if (ok_count > 0) {
    ens.avg_n_steps = steps_sum / ok_count;
    ens.avg_path_length = path_sum / ok_count;
  }
  ens.mean = ens.samples.colwise().mean();
  if (n_samples >= 2) {
    Mat centered = ens.samples.rowwise() - ens.mean.transpose();
    ens.stddev = (centered.array().square().colwise().sum() /
                  static_cast<double>(n_samples - 1))
                     .sqrt();
  } else {
    ens.stddev = Vec::Zero(d);
  }
  return ens;
}

}  // namespace cfm
