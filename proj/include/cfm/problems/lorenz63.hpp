#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <cfm/common.hpp>
#include <cfm/dataset.hpp>
#include <cfm/rng.hpp>

namespace cfm {

// Lorenz-63 state-space model used for the one-step data-assimilation
// benchmark: forward-Euler dynamics with additive process noise, a scalar
// observation of the third component, and observations every
// `steps_per_observation` Euler steps.
struct Lorenz63Spec {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double dt = 0.01;
  double process_noise_std = 0.01;
  double obs_noise_std = 0.5;
  int steps_per_observation = 10;
  Eigen::Vector3d x0{-1.27323174, -0.00702107, 0.74486393};

  void validate() const {
    require(dt > 0.0 && process_noise_std >= 0.0 && obs_noise_std > 0.0 &&
                steps_per_observation >= 1,
            "Lorenz63Spec: invalid parameters");
  }
};

inline Eigen::Vector3d lorenz_drift(const Eigen::Vector3d& s,
                                    const Lorenz63Spec& spec) {
  return {spec.sigma * (s(1) - s(0)), spec.rho * s(0) - s(1) - s(0) * s(2),
          s(0) * s(1) - spec.beta * s(2)};
}

// One forward-Euler step with optional additive Gaussian process noise.
inline Eigen::Vector3d lorenz_euler_step(const Eigen::Vector3d& state,
                                         const Lorenz63Spec& spec, Rng* rng) {
  Eigen::Vector3d next = state + spec.dt * lorenz_drift(state, spec);
  if (rng != nullptr) {
    for (int i = 0; i < 3; ++i) next(i) += rng->normal(0.0, spec.process_noise_std);
  }
  if (!next.allFinite())
    throw NumericError("lorenz_euler_step: state diverged to non-finite");
  return next;
}

// y = x_3 + eps, eps ~ N(0, obs_noise_std^2); exact x_3 when rng is null.
inline double lorenz_observe(const Eigen::Vector3d& state,
                             const Lorenz63Spec& spec, Rng* rng) {
  return state(2) + (rng != nullptr ? rng->normal(0.0, spec.obs_noise_std) : 0.0);
}

struct ParticleEnsemble {
  Mat particles;  // P x 3
  Vec weights;    // simplex

  Eigen::Index size() const { return particles.rows(); }
};

struct SirStep {
  ParticleEnsemble prior;      // after propagation, before the update
  ParticleEnsemble posterior;  // after weighting and resampling
};

namespace detail {

// Systematic resampling: positions (u + k)/P against the weight cumsum.
// Equal weights reproduce every particle exactly once.
inline Mat systematic_resample(const Mat& particles, const Vec& weights,
                               Rng& rng) {
  const Eigen::Index p = particles.rows();
  Mat out(p, particles.cols());
  const double u = rng.uniform01() / static_cast<double>(p);
  double cum = weights(0);
  Eigen::Index j = 0;
  for (Eigen::Index k = 0; k < p; ++k) {
    const double pos = u + static_cast<double>(k) / static_cast<double>(p);
    while (cum < pos && j + 1 < p) cum += weights(++j);
    out.row(k) = particles.row(j);
  }
  return out;
}

}  // namespace detail

// Sequential importance resampling over the given observation sequence.
// The initial ensemble is drawn from N(0, I_3), the prior the benchmark's
// fixed initial condition was itself sampled from. Weights are formed in
// log space; an all-underflow weight vector throws.
inline std::vector<SirStep> sir_filter(const Lorenz63Spec& spec,
                                       const std::vector<double>& observations,
                                       int n_particles, Rng& rng) {
  spec.validate();
  require(n_particles >= 1, "sir_filter: need at least one particle");
  require(!observations.empty(), "sir_filter: empty observation sequence");

  Mat particles = rng.normal_matrix(n_particles, 3);
  std::vector<SirStep> steps;
  steps.reserve(observations.size());

  for (double y_obs : observations) {
    for (Eigen::Index i = 0; i < particles.rows(); ++i) {
      Eigen::Vector3d s = particles.row(i);
      for (int k = 0; k < spec.steps_per_observation; ++k)
        s = lorenz_euler_step(s, spec, &rng);
      particles.row(i) = s;
    }

    SirStep step;
    step.prior = {particles,
                  Vec::Constant(n_particles, 1.0 / n_particles)};

    Vec log_w(n_particles);
    const double inv_2var = 1.0 / (2.0 * spec.obs_noise_std * spec.obs_noise_std);
    for (Eigen::Index i = 0; i < particles.rows(); ++i) {
      const double r = y_obs - particles(i, 2);
      log_w(i) = -r * r * inv_2var;
    }
    const double m = log_w.maxCoeff();
    Vec w = (log_w.array() - m).exp();
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total))
      throw NumericError("sir_filter: degenerate weights");
    w /= total;

    particles = detail::systematic_resample(particles, w, rng);
    step.posterior = {particles,
                      Vec::Constant(n_particles, 1.0 / n_particles)};
    steps.push_back(std::move(step));
  }
  return steps;
}

// Everything the one-step benchmark consumes.
struct DaProblem {
  PairedDataset train;      // 1,000 joint (x_prior, y) pairs
  PairedDataset test;       // 500 pairs
  Mat reference_posterior;  // SIR posterior particles at the chosen step
  Mat prior_pool;           // remaining prior particles, usable as a source pool
  double y_hat = 0.0;       // realized observation at the chosen step
  std::vector<double> observations;
};

// Builds the one-step data-assimilation problem: simulates a noisy truth
// trajectory from spec.x0, records observations at each assimilation step,
// runs the SIR filter, and at `assimilation_step` pairs sub-sampled prior
// particles with synthetic observations to form the joint training data.
inline DaProblem build_da_problem(const Lorenz63Spec& spec, int n_particles,
                                  Rng& rng, int assimilation_step = 3,
                                  int n_subsample = 1500, int n_train = 1000) {
  spec.validate();
  require(assimilation_step >= 1, "build_da_problem: step must be >= 1");
  require(n_subsample > n_train, "build_da_problem: subsample must exceed train size");

  // Truth trajectory and its observations.
  DaProblem out;
  Eigen::Vector3d truth = spec.x0;
  for (int k = 0; k < assimilation_step; ++k) {
    for (int s = 0; s < spec.steps_per_observation; ++s)
      truth = lorenz_euler_step(truth, spec, &rng);
    out.observations.push_back(lorenz_observe(truth, spec, &rng));
  }
  out.y_hat = out.observations.back();

  const auto steps = sir_filter(spec, out.observations, n_particles, rng);
  const SirStep& chosen = steps.at(assimilation_step - 1);
  require(n_particles >= n_subsample,
          "build_da_problem: not enough particles to sub-sample");

  // Sub-sample prior particles without replacement; pair each with its own
  // synthetic observation to form joint draws.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_particles));
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = static_cast<Eigen::Index>(i);
  for (int i = 0; i < n_subsample; ++i) {
    const std::size_t j = i + rng.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }

  Mat xs(n_subsample, 3), ys(n_subsample, 1);
  for (int i = 0; i < n_subsample; ++i) {
    const Eigen::Vector3d p = chosen.prior.particles.row(idx[i]);
    xs.row(i) = p;
    ys(i, 0) = lorenz_observe(p, spec, &rng);
  }
  out.train = {xs.topRows(n_train), ys.topRows(n_train)};
  out.test = {xs.bottomRows(n_subsample - n_train),
              ys.bottomRows(n_subsample - n_train)};

  // Prior particles not used in train/test form the sampling pool.
  const Eigen::Index pool_size = n_particles - n_subsample;
  out.prior_pool.resize(pool_size, 3);
  for (Eigen::Index i = 0; i < pool_size; ++i)
    out.prior_pool.row(i) = chosen.prior.particles.row(idx[n_subsample + i]);

  out.reference_posterior = chosen.posterior.particles;
  return out;
}

}  // namespace cfm
