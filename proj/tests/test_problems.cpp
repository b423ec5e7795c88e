#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <cfm/metrics/sinkhorn.hpp>
#include <cfm/problems/lorenz63.hpp>
#include <cfm/problems/spiral.hpp>
#include <cfm/problems/toy1d.hpp>

using cfm::Mat;
using cfm::Vec;

namespace {

// Composite Simpson quadrature on [a, b].
template <typename F>
double simpson(F&& f, double a, double b, int n) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("toy1d generation matches its generative model") {
  cfm::Rng rng(21);
  const auto tiny = cfm::toy1d_generate(5, {}, rng);
  CHECK(tiny.size() == 5);
  CHECK(tiny.x.cwiseAbs().maxCoeff() <= 1.0);

  // Var(Y) = Var(U(-1,1)) + noise^2 = 1/3 + 0.0625.
  const auto big = cfm::toy1d_generate(1000000, {}, rng);
  const double mean = big.y.col(0).mean();
  const double var =
      (big.y.col(0).array() - mean).square().sum() / (big.size() - 1);
  CHECK(var == Catch::Approx(1.0 / 3.0 + 0.0625).epsilon(0.01));

  cfm::Rng r1(5), r2(5);
  const auto a = cfm::toy1d_generate(10, {}, r1);
  const auto b = cfm::toy1d_generate(10, {}, r2);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
}

TEST_CASE("toy1d posterior density is a normalized truncated normal") {
  // Quadrature oracle: the density integrates to one on its support.
  for (double y_hat : {-1.0, 0.0, 0.6, 1.0}) {
    const double total = simpson(
        [&](double x) { return cfm::toy1d_posterior_pdf(x, y_hat); }, -1.0,
        1.0, 4000);
    CHECK(total == Catch::Approx(1.0).margin(1e-8));
  }

  CHECK(cfm::toy1d_posterior_pdf(1.5, 0.0) == 0.0);
  CHECK(cfm::toy1d_posterior_pdf(-1.01, 0.6) == 0.0);

  // Symmetric at y_hat = 0: posterior mean is zero.
  const double mean0 = simpson(
      [&](double x) { return x * cfm::toy1d_posterior_pdf(x, 0.0); }, -1.0,
      1.0, 4000);
  CHECK(std::abs(mean0) < 1e-10);

  // Upper truncation pulls the y_hat = 0.6 mean left of 0.6.
  const double mean06 = simpson(
      [&](double x) { return x * cfm::toy1d_posterior_pdf(x, 0.6); }, -1.0,
      1.0, 4000);
  CHECK(mean06 < 0.6);
  CHECK(mean06 > 0.4);
}

TEST_CASE("spiral generation matches analytic moments and envelope") {
  cfm::Rng rng(31);
  const auto train = cfm::spiral_generate(800, {}, rng);
  CHECK(train.size() == 800);

  const int n = 1000000;
  const auto big = cfm::spiral_generate(n, {}, rng);

  // Quadrature oracle over W ~ U(1.5pi, 4.5pi): E[X] = 0.1 E[W sin W],
  // E[Y] = 0.1 E[W cos W]; the Gaussian terms average out.
  const double lo = 1.5 * std::numbers::pi, hi = 4.5 * std::numbers::pi;
  const double ex = 0.1 *
                    simpson([](double w) { return w * std::sin(w); }, lo, hi,
                            20000) /
                    (hi - lo);
  const double ey = 0.1 *
                    simpson([](double w) { return w * std::cos(w); }, lo, hi,
                            20000) /
                    (hi - lo);

  const double mx = big.x.col(0).mean();
  const double my = big.y.col(0).mean();
  const double sx = std::sqrt((big.x.col(0).array() - mx).square().sum() / n);
  const double sy = std::sqrt((big.y.col(0).array() - my).square().sum() / n);
  CHECK(std::abs(mx - ex) < 3.0 * sx / std::sqrt(n));
  CHECK(std::abs(my - ey) < 3.0 * sy / std::sqrt(n));

  // |X| <= 0.1 (W_max + |C3|); six sigma covers every draw here.
  CHECK(big.x.cwiseAbs().maxCoeff() <= 0.1 * (4.5 * std::numbers::pi + 6.0));

  cfm::Rng r1(9), r2(9);
  CHECK(cfm::spiral_generate(20, {}, r1).x == cfm::spiral_generate(20, {}, r2).x);
}

TEST_CASE("spiral reference band filter") {
  cfm::Rng rng(41);
  const auto pool = cfm::spiral_generate(100000, {}, rng);
  const Vec ref = cfm::spiral_reference_conditional(pool, 0.0, 0.1);
  CHECK(ref.size() > 100);

  // Band covers everything when wide enough.
  const Vec all = cfm::spiral_reference_conditional(pool, 0.0, 1e9);
  CHECK(all.size() == pool.size());

  CHECK_THROWS_AS(cfm::spiral_reference_conditional(pool, 1e6, 0.1),
                  cfm::EmptyBandError);
}

TEST_CASE("lorenz drift and Euler step") {
  const cfm::Lorenz63Spec spec;

  // Equilibrium at the origin.
  const Eigen::Vector3d zero =
      cfm::lorenz_euler_step(Eigen::Vector3d::Zero(), spec, nullptr);
  CHECK(zero.isZero(0.0));

  // drift(1,1,1) = (0, 26, 1 - 8/3).
  const Eigen::Vector3d next =
      cfm::lorenz_euler_step(Eigen::Vector3d::Ones(), spec, nullptr);
  CHECK(next(0) == Catch::Approx(1.0));
  CHECK(next(1) == Catch::Approx(1.26));
  CHECK(next(2) == Catch::Approx(1.0 + 0.01 * (1.0 - 8.0 / 3.0)));

  // Noiseless trajectories are bit-reproducible.
  Eigen::Vector3d a = spec.x0, b = spec.x0;
  for (int i = 0; i < 100; ++i) {
    a = cfm::lorenz_euler_step(a, spec, nullptr);
    b = cfm::lorenz_euler_step(b, spec, nullptr);
  }
  CHECK(a == b);

  cfm::Rng r1(3), r2(3);
  CHECK(cfm::lorenz_euler_step(spec.x0, spec, &r1) ==
        cfm::lorenz_euler_step(spec.x0, spec, &r2));
}

TEST_CASE("lorenz observation operator") {
  const cfm::Lorenz63Spec spec;
  CHECK(cfm::lorenz_observe({5.0, -2.0, 2.0}, spec, nullptr) == 2.0);

  cfm::Rng rng(55);
  const int n = 1000000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = cfm::lorenz_observe({0.0, 0.0, 1.0}, spec, &rng);
    acc += y;
    acc2 += y * y;
  }
  const double var = acc2 / n - (acc / n) * (acc / n);
  CHECK(var == Catch::Approx(0.25).epsilon(0.01));
}

TEST_CASE("SIR filter small-ensemble behavior") {
  const cfm::Lorenz63Spec spec;

  // A single particle survives resampling untouched by the observation.
  cfm::Rng rng(66);
  const auto steps = cfm::sir_filter(spec, {100.0}, 1, rng);
  CHECK(steps.size() == 1);
  CHECK(steps[0].posterior.particles == steps[0].prior.particles);
  CHECK(steps[0].posterior.weights(0) == 1.0);

  // Equal weights: systematic resampling returns each particle once.
  cfm::Rng rr(67);
  Mat particles = rr.normal_matrix(8, 3);
  const Vec w = Vec::Constant(8, 1.0 / 8.0);
  const Mat resampled = cfm::detail::systematic_resample(particles, w, rr);
  CHECK(resampled == particles);
}

TEST_CASE("flat likelihood collapses the SIR update to the prior") {
  cfm::Lorenz63Spec spec;
  spec.obs_noise_std = 50.0;
  cfm::Rng rng(68);
  const auto steps = cfm::sir_filter(spec, {0.5}, 3000, rng);
  const Mat& prior = steps[0].prior.particles;
  const Mat& post = steps[0].posterior.particles;

  cfm::SinkhornConfig cfg;
  cfg.epsilon = 0.01;
  cfm::Rng brng(69);
  const double baseline = cfm::self_distance_baseline(prior, 750, 3, cfg, brng);
  const double dist =
      cfm::sinkhorn_distance({prior.topRows(750), post.topRows(750)}, cfg)
          .value;
  CHECK(dist <= baseline * 1.05);
}

TEST_CASE("build_da_problem shapes and determinism") {
  const cfm::Lorenz63Spec spec;
  cfm::Rng rng(70);
  const auto da = cfm::build_da_problem(spec, 4000, rng, 3, 1500, 1000);
  CHECK(da.train.size() == 1000);
  CHECK(da.test.size() == 500);
  CHECK(da.reference_posterior.rows() == 4000);
  CHECK(da.prior_pool.rows() == 2500);
  CHECK(da.observations.size() == 3);
  CHECK(da.y_hat == da.observations.back());

  cfm::Rng rng2(70);
  const auto da2 = cfm::build_da_problem(spec, 4000, rng2, 3, 1500, 1000);
  CHECK(da2.y_hat == da.y_hat);
  CHECK(da2.train.x == da.train.x);
  CHECK(da2.reference_posterior == da.reference_posterior);
}
