// Acceptance suite: one check per release criterion, each printing a
// single PASS/FAIL line. Runs the full desk-scale benchmark pipelines, so
// expect tens of minutes end to end on one core.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <cfm/closed_form.hpp>
#include <cfm/metrics/kde.hpp>
#include <cfm/metrics/sinkhorn.hpp>
#include <cfm/metrics/stats.hpp>
#include <cfm/ode.hpp>
#include <cfm/problems/lorenz63.hpp>
#include <cfm/problems/spiral.hpp>
#include <cfm/problems/toy1d.hpp>
#include <cfm/sampler.hpp>
#include <cfm/training.hpp>

using cfm::EmpiricalSupport;
using cfm::Mat;
using cfm::MlpConfig;
using cfm::PairedDataset;
using cfm::SolverConfig;
using cfm::TrainConfig;
using cfm::Vec;

namespace {

// Pinned experiment seeds. The data-assimilation benchmark is seed-defined
// (the realized observation is part of the problem statement), so these are
// fixed constants of the suite.
constexpr std::uint64_t kToySeed = 4;
constexpr std::uint64_t kToySeedB = 7;
constexpr std::uint64_t kToySeedC = 8;
constexpr std::uint64_t kSpiralSeed = 7;
constexpr std::uint64_t kDaSeed = 11;

struct CheckFailure {
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<std::string()> run;  // returns detail text, throws on failure
};

void fail(const std::string& detail) { throw CheckFailure{detail}; }

void expect(bool cond, const std::string& detail) {
  if (!cond) fail(detail);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: reverse-mode gradients against central finite differences.

std::string criterion_gradients() {
  cfm::Rng rng(2024);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    MlpConfig cfg;
    cfg.state_dim = 1 + static_cast<int>(rng.index(3));
    cfg.cond_dim = 1 + static_cast<int>(rng.index(2));
    cfg.hidden_width = 2 + static_cast<int>(rng.index(7));
    cfg.hidden_layers = 1 + static_cast<int>(rng.index(2));
    cfg.activation =
        rng.index(2) == 0 ? cfm::Activation::relu : cfm::Activation::swish;
    const Vec params = cfm::init_params(cfg, rng);

    cfm::TrainBatch batch;
    const int b = 1 + static_cast<int>(rng.index(4));
    batch.z = rng.normal_matrix(b, cfg.state_dim);
    batch.x = rng.normal_matrix(b, cfg.state_dim);
    batch.y = rng.normal_matrix(b, cfg.cond_dim);
    batch.t.resize(b);
    for (int r = 0; r < b; ++r) batch.t(r) = rng.uniform01();

    const Vec grad = cfm::mlp_loss_and_grad(cfg, params, batch).grad;
    const double h = 1e-5;
    Vec fd(params.size());
    Vec p = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      p(i) = params(i) + h;
      const double up = cfm::mlp_loss_and_grad(cfg, p, batch).loss;
      p(i) = params(i) - h;
      const double dn = cfm::mlp_loss_and_grad(cfg, p, batch).loss;
      p(i) = params(i);
      fd(i) = (up - dn) / (2.0 * h);
    }
    const double rel = (grad - fd).norm() / std::max(fd.norm(), 1e-12);
    worst = std::max(worst, rel);
  }
  expect(worst <= 1e-4, "max relative error " + fmt(worst) + " > 1e-4");
  return "20 networks, max relative error " + fmt(worst);
}

// ---------------------------------------------------------------------------
// Criterion 2: integrator accuracy and observed order.

std::string criterion_integrator() {
  const auto decay = [](double, const Vec& x, Vec& dx) { dx = -x; };
  SolverConfig cfg;
  cfg.rtol = 1e-3;
  const auto res = cfm::rk45_integrate(decay, Vec::Constant(1, 1.0), cfg);
  const double err = std::abs(res.x_final(0) - std::exp(-1.0));
  expect(err < 10.0 * cfg.rtol,
         "exp decay error " + fmt(err) + " >= 10*rtol");

  // Fixed-step order study on the same decay problem (a periodic
  // integrand's leading error terms cancel over a full period, hiding the
  // order, so the study needs a field with nonzero error).
  std::vector<double> errors;
  for (double h : {0.1, 0.05, 0.025}) {
    SolverConfig fixed;
    fixed.fixed_step = h;
    errors.push_back(std::abs(
        cfm::rk45_integrate(decay, Vec::Constant(1, 1.0), fixed).x_final(0) -
        std::exp(-1.0)));
  }
  const double r1 = errors[0] / errors[1];
  const double r2 = errors[1] / errors[2];
  expect(r1 >= 20.0 && r2 >= 20.0,
         "order ratios " + fmt(r1) + ", " + fmt(r2) + " < 20");
  return "exp-decay error " + fmt(err) + ", order ratios " + fmt(r1) + "/" +
         fmt(r2);
}

// ---------------------------------------------------------------------------
// Criterion 3: variance collapse of the interpolatory degenerate field.

std::string criterion_case1_collapse() {
  cfm::Rng rng(31);
  double worst = 0.0;
  for (int s = 0; s < 5; ++s) {
    const int n = 3 + static_cast<int>(rng.index(5));
    Mat xs(n, 1), ys(n, 1);
    for (int i = 0; i < n; ++i) {
      xs(i, 0) = rng.uniform(-2.0, 2.0);
      ys(i, 0) = rng.uniform(-1.0, 1.0) + 0.001 * i;  // distinct
    }
    const EmpiricalSupport support{xs, ys};
    const Vec y_query = Vec::Constant(1, rng.uniform(-1.2, 1.2));
    const Vec xbar = cfm::case1_xbar(support, y_query);

    SolverConfig cfg;
    cfg.t_end = cfm::kSingularTimeCap;
    const auto field = [&](double t, const Vec& x, Vec& dx) {
      dx = cfm::case1_velocity(support, x, y_query, t);
    };
    for (int rep = 0; rep < 100; ++rep) {
      const auto res = cfm::rk45_integrate(field, rng.normal_vector(1), cfg);
      // The closing Euler step over [t_cap, 1] is exact for this field.
      const Vec v = cfm::case1_velocity(support, res.x_final, y_query,
                                        cfg.t_end);
      const Vec final = res.x_final + (1.0 - cfg.t_end) * v;
      worst = std::max(worst,
                       (final - xbar).lpNorm<Eigen::Infinity>());
    }
  }
  expect(worst < 1e-6, "worst terminal gap " + fmt(worst) + " >= 1e-6");
  return "5 supports x 100 starts, worst gap " + fmt(worst);
}

// ---------------------------------------------------------------------------
// Criterion 4: selective memorization of the empirical minimizer.

std::string criterion_memorization() {
  cfm::Rng rng(41);
  Mat xs(5, 1), ys(5, 1);
  for (int i = 0; i < 5; ++i) {
    xs(i, 0) = rng.uniform(-1.5, 1.5);
    ys(i, 0) = 0.0;
  }
  const EmpiricalSupport support{xs, ys};

  SolverConfig cfg;
  cfg.t_end = cfm::kSingularTimeCap;
  cfg.rtol = 1e-5;  // analytic field: integrate accurately, not fast
  cfg.atol = 1e-8;
  const auto field = [&](double t, const Vec& x, Vec& dx) {
    dx = cfm::exact_empirical_velocity(support, x, t);
  };
  int landed = 0;
  const int trials = 200;
  for (int rep = 0; rep < trials; ++rep) {
    const auto res = cfm::rk45_integrate(field, rng.normal_vector(1), cfg);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 5; ++i)
      best = std::min(best, std::abs(res.x_final(0) - xs(i, 0)));
    if (best < 1e-3) ++landed;
  }
  const double frac = static_cast<double>(landed) / trials;
  expect(frac >= 0.99,
         fmt(100.0 * frac) + "% of starts terminated on the support");
  return fmt(100.0 * frac) + "% of 200 starts landed within 1e-3";
}

// ---------------------------------------------------------------------------
// Criterion 5: stationarity of the empirical-loss minimizer.

std::string criterion_stationarity() {
  cfm::Rng rng(51);
  Mat xs(5, 1), ys(5, 1);
  for (int i = 0; i < 5; ++i) {
    xs(i, 0) = rng.uniform(-1.5, 1.5);
    ys(i, 0) = 0.0;
  }
  const EmpiricalSupport support{xs, ys};

  const int n_draws = 100000;
  struct Draw {
    double z, t, x;
  };
  std::vector<Draw> draws(n_draws);
  for (auto& d : draws) {
    d.z = rng.normal();
    d.t = rng.uniform(0.0, 1.0 - 1e-4);
    d.x = xs(static_cast<int>(rng.index(5)), 0);
  }

  // Residuals of the closed-form minimizer, reused for every comparison
  // (common random numbers).
  std::vector<double> exact_residual(n_draws);
  for (int k = 0; k < n_draws; ++k) {
    const auto& d = draws[k];
    const double xi = (1.0 - d.t) * d.z + d.t * d.x;
    const double v =
        cfm::exact_empirical_velocity(support, Vec::Constant(1, xi), d.t)(0);
    exact_residual[k] = v - (d.x - d.z);
  }

  int violations = 0;
  double worst_sigma = std::numeric_limits<double>::infinity();
  for (int p = 0; p < 50; ++p) {
    const double amp = rng.uniform(0.02, 0.5);
    const double freq = rng.uniform(0.3, 6.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double tfreq = rng.uniform(0.0, 3.0);

    // Paired estimate of loss(v + delta) - loss(v) = mean(2 r delta + delta^2).
    double mean = 0.0, m2 = 0.0;
    for (int k = 0; k < n_draws; ++k) {
      const auto& d = draws[k];
      const double xi = (1.0 - d.t) * d.z + d.t * d.x;
      const double delta = amp * std::cos(freq * xi + phase + tfreq * d.t);
      const double diff = 2.0 * exact_residual[k] * delta + delta * delta;
      const double step = diff - mean;
      mean += step / (k + 1);
      m2 += step * (diff - mean);
    }
    const double se = std::sqrt(m2 / (n_draws - 1.0) / n_draws);
    const double sigmas = mean / se;
    worst_sigma = std::min(worst_sigma, sigmas);
    if (mean < -3.0 * se) ++violations;
  }
  expect(violations == 0,
         std::to_string(violations) +
             " perturbations beat the minimizer beyond 3 sigma");
  return "50 perturbations, min loss increase " + fmt(worst_sigma) +
         " sigma above the minimizer";
}

// ---------------------------------------------------------------------------
// Criterion 6: small-data overfitting study.

struct ToyRun {
  long ma_min_iter = 0;
  double std_at_min = 0.0;
  double std_at_50k = 0.0;
};

ToyRun run_toy_study(std::uint64_t seed) {
  cfm::Rng data_rng(seed);
  const PairedDataset train = cfm::toy1d_generate(5, {}, data_rng);
  const PairedDataset test = cfm::toy1d_generate(1000, {}, data_rng);
  const auto norm = cfm::Normalizer::fit(train);

  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.batch_size = 5;  // the whole 5-pair dataset with fresh (z, t) draws
  cfg.max_iterations = 50000;
  cfg.ema_decay = 0.9;
  cfg.test_eval_stride = 1;
  cfg.ma_window = 500;
  cfg.seed = seed;
  cfg.sample_with_ema = false;  // raw weights for this study
  const MlpConfig mlp{1, 1, 32, 3, cfm::Activation::swish};

  Vec ma_min_params;
  ToyRun out;
  double ma_min = std::numeric_limits<double>::infinity();
  cfm::Trainer trainer(norm.apply(train), norm.apply(test), cfg, mlp,
                       cfm::SourceKind::gaussian);
  trainer.run([&](long iter, double, const cfm::Trainer& tr) {
    const double ma = tr.history().test_loss_ma.back();
    if (ma < ma_min) {
      ma_min = ma;
      out.ma_min_iter = iter;
      ma_min_params = tr.state().params;
    }
  });

  const auto std_at = [&](const Vec& params) {
    cfm::VelocityModel model{mlp, params};
    cfm::Rng rng(seed + 1000);
    const auto ens = cfm::sample_posterior(model, norm, Vec::Constant(1, 0.6),
                                           cfm::SourceKind::gaussian, nullptr,
                                           1000, {}, rng);
    return ens.stddev(0);
  };
  out.std_at_min = std_at(ma_min_params);
  out.std_at_50k = std_at(trainer.state().params);
  return out;
}

std::string criterion_overfitting() {
  const ToyRun primary = run_toy_study(kToySeed);
  expect(primary.ma_min_iter < 10000,
         "MA minimum at iteration " + std::to_string(primary.ma_min_iter));
  expect(primary.std_at_min >= 0.12 && primary.std_at_min <= 0.35,
         "posterior std at the MA minimum " + fmt(primary.std_at_min) +
             " outside [0.12, 0.35]");
  expect(primary.std_at_50k <= 0.5 * primary.std_at_min,
         "std at 50k " + fmt(primary.std_at_50k) + " vs minimum " +
             fmt(primary.std_at_min) + ": shrinkage < 2x");

  for (std::uint64_t seed : {kToySeedB, kToySeedC}) {
    const ToyRun run = run_toy_study(seed);
    expect(run.std_at_50k <= 0.5 * run.std_at_min,
           "seed " + std::to_string(seed) + ": std shrinkage " +
               fmt(run.std_at_50k / run.std_at_min) + " > 0.5");
  }
  return "MA min at " + std::to_string(primary.ma_min_iter) + ", std " +
         fmt(primary.std_at_min) + " -> " + fmt(primary.std_at_50k) +
         " at 50k; shrinkage holds on 3 seeds";
}

// ---------------------------------------------------------------------------
// Criteria 7, 8, 10: spiral benchmark.

struct SpiralSourceResult {
  double avg_sinkhorn = 0.0;
  double avg_baseline = 0.0;
  double avg_n_steps = 0.0;
  int modes_at_zero = 0;
  std::vector<double> per_y_sinkhorn;
};

struct SpiralPipelineResult {
  SpiralSourceResult gaussian;
  SpiralSourceResult prior;

  std::string canonical() const {
    std::ostringstream os;
    for (const auto* r : {&gaussian, &prior}) {
      os << fmt17(r->avg_sinkhorn) << "," << fmt17(r->avg_baseline) << ","
         << fmt17(r->avg_n_steps) << "," << r->modes_at_zero;
      for (double v : r->per_y_sinkhorn) os << "," << fmt17(v);
      os << "\n";
    }
    return os.str();
  }
};

SpiralPipelineResult run_spiral_pipeline(std::uint64_t seed) {
  cfm::Rng data_rng(seed);
  const PairedDataset train = cfm::spiral_generate(800, {}, data_rng);
  const PairedDataset test = cfm::spiral_generate(200, {}, data_rng);
  const PairedDataset reference = cfm::spiral_generate(100000, {}, data_rng);
  const PairedDataset pool = cfm::spiral_generate(20000, {}, data_rng);
  const auto norm = cfm::Normalizer::fit(train);

  const std::vector<double> y_hats = {-0.5, 0.0, 0.5, 1.0};
  const MlpConfig mlp{1, 1, 32, 3, cfm::Activation::relu};
  cfm::SinkhornConfig sink;
  sink.epsilon = 0.01;

  SpiralPipelineResult out;
  for (const auto source :
       {cfm::SourceKind::gaussian, cfm::SourceKind::prior_scrambled}) {
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 1000;
    cfg.max_iterations = 20000;  // the checkpoint the benchmark protocol uses
    cfg.ema_decay = 0.9999;
    cfg.test_eval_stride = 100;
    cfg.ma_window = 500;
    cfg.seed = seed;

    cfm::Trainer trainer(norm.apply(train), norm.apply(test), cfg, mlp,
                         source);
    trainer.run();
    const cfm::VelocityModel model{mlp, trainer.state().ema.shadow};

    SpiralSourceResult res;
    cfm::Rng baseline_rng(seed + 77);
    for (std::size_t k = 0; k < y_hats.size(); ++k) {
      cfm::Rng rng(seed + 100 + k +
                   (source == cfm::SourceKind::gaussian ? 0 : 1000));
      const auto ens = cfm::sample_posterior(
          model, norm, Vec::Constant(1, y_hats[k]), source,
          source == cfm::SourceKind::prior_scrambled ? &pool.x : nullptr,
          10000, {}, rng);

      const Vec ref =
          cfm::spiral_reference_conditional(reference, y_hats[k], 0.1);
      const Mat gen_n = norm.apply_x(ens.samples);
      const Mat ref_n = norm.apply_x(ref);
      const double dist = cfm::sinkhorn_distance({gen_n, ref_n}, sink).value;
      res.per_y_sinkhorn.push_back(dist);
      res.avg_sinkhorn += dist / y_hats.size();
      res.avg_n_steps += ens.avg_n_steps / y_hats.size();

      const Eigen::Index subset = std::min<Eigen::Index>(1000, ref_n.rows() / 2);
      res.avg_baseline += cfm::self_distance_baseline(ref_n, subset, 3, sink,
                                                      baseline_rng) /
                          y_hats.size();

      if (y_hats[k] == 0.0) {
        const Vec grid = Vec::LinSpaced(256, -1.6, 1.6);
        const auto kde = cfm::kde_1d(ens.samples.col(0), grid);
        res.modes_at_zero = cfm::count_modes(kde.density, 0.1);
      }
    }
    (source == cfm::SourceKind::gaussian ? out.gaussian : out.prior) = res;
  }
  return out;
}

std::optional<SpiralPipelineResult> g_spiral_result;

const SpiralPipelineResult& spiral_result() {
  if (!g_spiral_result) g_spiral_result = run_spiral_pipeline(kSpiralSeed);
  return *g_spiral_result;
}

std::string criterion_spiral_benchmark() {
  const auto& res = spiral_result();
  for (const auto& [name, r] :
       std::map<std::string, const SpiralSourceResult*>{
           {"gaussian", &res.gaussian}, {"prior", &res.prior}}) {
    expect(r->avg_sinkhorn <= 3.0 * r->avg_baseline,
           name + ": avg sinkhorn " + fmt(r->avg_sinkhorn) + " > 3x baseline " +
               fmt(r->avg_baseline));
    expect(r->avg_sinkhorn <= 0.15,
           name + ": avg sinkhorn " + fmt(r->avg_sinkhorn) + " > 0.15");
    expect(r->modes_at_zero >= 2,
           name + ": only " + std::to_string(r->modes_at_zero) +
               " KDE modes at y=0");
  }
  return "avg sinkhorn gaussian " + fmt(res.gaussian.avg_sinkhorn) +
         " / prior " + fmt(res.prior.avg_sinkhorn) + " (baselines " +
         fmt(res.gaussian.avg_baseline) + "/" + fmt(res.prior.avg_baseline) +
         "), modes " + std::to_string(res.gaussian.modes_at_zero) + "/" +
         std::to_string(res.prior.modes_at_zero);
}

std::string criterion_spiral_efficiency() {
  const auto& res = spiral_result();
  const double steps = res.gaussian.avg_n_steps;
  expect(steps >= 8.0 && steps <= 40.0,
         "gaussian-source avg accepted steps " + fmt(steps) +
             " outside [8, 40]");
  return "avg accepted steps gaussian " + fmt(steps) + ", prior " +
         fmt(res.prior.avg_n_steps);
}

// ---------------------------------------------------------------------------
// Criterion 9: one-step Lorenz-63 data assimilation.

std::string criterion_lorenz_da() {
  cfm::Rng rng(kDaSeed);
  const cfm::Lorenz63Spec spec;
  const auto da = cfm::build_da_problem(spec, 100000, rng, 3, 1500, 1000);
  const auto norm = cfm::Normalizer::fit(da.train);

  const MlpConfig mlp{3, 1, 256, 4, cfm::Activation::relu};
  cfm::SinkhornConfig sink;
  sink.epsilon = 0.01;

  const Mat ref_n = norm.apply_x(da.reference_posterior);
  cfm::Rng baseline_rng(kDaSeed + 77);
  const double baseline =
      cfm::self_distance_baseline(ref_n, 500, 4, sink, baseline_rng);

  double dist_gaussian = 0.0, dist_prior = 0.0;
  double frac_pos = 0.0;
  for (const auto source :
       {cfm::SourceKind::gaussian, cfm::SourceKind::prior_scrambled}) {
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 500;
    // Stopping points of the benchmark protocol for the two sources.
    cfg.max_iterations = source == cfm::SourceKind::gaussian ? 5000 : 10000;
    cfg.ema_decay = 0.9;
    cfg.test_eval_stride = 100;
    cfg.ma_window = 500;
    cfg.seed = kDaSeed;

    cfm::Trainer trainer(norm.apply(da.train), norm.apply(da.test), cfg, mlp,
                         source);
    trainer.run();
    const cfm::VelocityModel model{mlp, trainer.state().ema.shadow};

    cfm::Rng sample_rng(kDaSeed + 200 +
                        (source == cfm::SourceKind::gaussian ? 0 : 1));
    const auto ens = cfm::sample_posterior(
        model, norm, Vec::Constant(1, da.y_hat), source,
        source == cfm::SourceKind::prior_scrambled ? &da.prior_pool : nullptr,
        500, {}, sample_rng);

    const double dist =
        cfm::sinkhorn_distance({norm.apply_x(ens.samples), ref_n}, sink).value;
    if (source == cfm::SourceKind::gaussian) {
      dist_gaussian = dist;
      frac_pos = (ens.samples.col(0).array() > 0.0).cast<double>().mean();
    } else {
      dist_prior = dist;
    }
  }

  expect(frac_pos >= 0.1 && frac_pos <= 0.9,
         "x1 sign split " + fmt(frac_pos) + " is not bimodal");
  expect(dist_gaussian <= 3.0 * baseline,
         "gaussian sinkhorn " + fmt(dist_gaussian) + " > 3x baseline " +
             fmt(baseline));
  expect(dist_gaussian <= dist_prior + baseline,
         "gaussian " + fmt(dist_gaussian) + " not <= prior " +
             fmt(dist_prior) + " + baseline " + fmt(baseline));
  return "sinkhorn gaussian " + fmt(dist_gaussian) + ", prior " +
         fmt(dist_prior) + ", baseline " + fmt(baseline) + ", x1>0 share " +
         fmt(frac_pos);
}

// ---------------------------------------------------------------------------
// Criterion 10: determinism of the spiral pipeline.

std::string criterion_determinism() {
  const std::string first = spiral_result().canonical();
  const SpiralPipelineResult rerun = run_spiral_pipeline(kSpiralSeed);
  expect(first == rerun.canonical(), "metric records differ between runs");
  return "all spiral metrics byte-identical across two runs";
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<Criterion> criteria = {
      {1, "gradient correctness vs finite differences", criterion_gradients},
      {2, "integrator accuracy and order", criterion_integrator},
      {3, "variance collapse of the interpolatory field", criterion_case1_collapse},
      {4, "selective memorization of the empirical field", criterion_memorization},
      {5, "minimizer stationarity under perturbations", criterion_stationarity},
      {6, "small-data overfitting reproduction", criterion_overfitting},
      {7, "spiral benchmark distances and multimodality", criterion_spiral_benchmark},
      {8, "spiral sampling efficiency", criterion_spiral_efficiency},
      {9, "one-step Lorenz-63 data assimilation", criterion_lorenz_da},
      {10, "spiral pipeline determinism", criterion_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && only.count(c.id) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = true;
    try {
      detail = c.run();
    } catch (const CheckFailure& f) {
      pass = false;
      detail = f.detail;
    } catch (const std::exception& e) {
      pass = false;
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %2d: %s — %s (%.1fs)\n",
                pass ? "PASS" : "FAIL", c.id, c.name.c_str(), detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
