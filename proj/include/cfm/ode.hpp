#pragma once

#include <cmath>
#include <utility>

#include <cfm/common.hpp>

namespace cfm {

struct SolverConfig {
  double rtol = 1e-3;
  double atol = 1e-6;
  double t_end = 1.0;  // cap at 1 - 1e-4 for fields singular at t = 1
  int max_steps = 100000;
  double initial_step = 1e-2;
  double fixed_step = 0.0;  // > 0 disables error control, uniform steps

  void validate() const {
    require(rtol > 0.0 && atol > 0.0, "solver tolerances must be positive");
    require(t_end > 0.0 && t_end <= 1.0, "t_end must lie in (0, 1]");
    require(max_steps > 0, "max_steps must be positive");
  }
};

enum class SolveStatus { ok, max_steps_exceeded };

struct OdeSolveResult {
  Vec x_final;
  int n_steps = 0;  // accepted steps only
  int rejected_steps = 0;
  double path_length = 0.0;  // sum of |dx| over accepted steps
  SolveStatus status = SolveStatus::ok;
};

namespace dopri5 {
// Dormand-Prince 5(4) tableau. e[] is the difference between the 5th and
// embedded 4th order weights.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                        c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                        e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dopri5

// Integrates dx/dt = field(t, x) from t = 0 to cfg.t_end with the adaptive
// Dormand-Prince 5(4) pair (elementary step controller, FSAL). `field` has
// signature void(double t, const Vec& x, Vec& dx). Throws NumericError on
// non-finite stage values; max_steps exhaustion returns the partial result
// with status = max_steps_exceeded.
template <typename Field>
OdeSolveResult rk45_integrate(Field&& field, const Vec& x0,
                              const SolverConfig& cfg) {
  namespace dp = dopri5;
  cfg.validate();
  const Eigen::Index d = x0.size();

  OdeSolveResult res;
  res.x_final = x0;

  Vec y = x0, y_new(d), y_stage(d), err(d);
  Vec k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d);

  auto eval = [&](double t, const Vec& x, Vec& dx) {
    field(t, x, dx);
    if (!dx.allFinite())
      throw NumericError("rk45_integrate: field returned non-finite values");
  };

  double t = 0.0;
  double h = cfg.fixed_step > 0.0 ? cfg.fixed_step
                                  : std::min(cfg.initial_step, cfg.t_end);
  eval(t, y, k1);

  // Forced fixed-step mode covers [0, t_end] in exactly round(t_end / h)
  // uniform steps with no error control.
  const long n_fixed = cfg.fixed_step > 0.0
                           ? std::max(1L, std::lround(cfg.t_end / cfg.fixed_step))
                           : 0;
  long fixed_taken = 0;

  int attempts = 0;
  while (cfg.fixed_step > 0.0 ? fixed_taken < n_fixed : t < cfg.t_end) {
    if (attempts++ >= cfg.max_steps) {
      res.x_final = y;
      res.status = SolveStatus::max_steps_exceeded;
      return res;
    }
    if (cfg.fixed_step > 0.0) {
      h = cfg.t_end * static_cast<double>(fixed_taken + 1) /
              static_cast<double>(n_fixed) -
          t;
    } else if (t + h > cfg.t_end) {
      h = cfg.t_end - t;
    }

    y_stage = y + h * dp::a21 * k1;
    eval(t + dp::c2 * h, y_stage, k2);
    y_stage = y + h * (dp::a31 * k1 + dp::a32 * k2);
    eval(t + dp::c3 * h, y_stage, k3);
    y_stage = y + h * (dp::a41 * k1 + dp::a42 * k2 + dp::a43 * k3);
    eval(t + dp::c4 * h, y_stage, k4);
    y_stage =
        y + h * (dp::a51 * k1 + dp::a52 * k2 + dp::a53 * k3 + dp::a54 * k4);
    eval(t + dp::c5 * h, y_stage, k5);
    y_stage = y + h * (dp::a61 * k1 + dp::a62 * k2 + dp::a63 * k3 +
                       dp::a64 * k4 + dp::a65 * k5);
    eval(t + h, y_stage, k6);
    y_new = y + h * (dp::b1 * k1 + dp::b3 * k3 + dp::b4 * k4 + dp::b5 * k5 +
                     dp::b6 * k6);
    eval(t + h, y_new, k7);

    if (cfg.fixed_step > 0.0) {
      res.path_length += (y_new - y).norm();
      y = y_new;
      k1 = k7;  // FSAL
      t += h;
      ++fixed_taken;
      ++res.n_steps;
      continue;
    }

    err = h * (dp::e1 * k1 + dp::e3 * k3 + dp::e4 * k4 + dp::e5 * k5 +
               dp::e6 * k6 + dp::e7 * k7);
    double err_norm = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double scale =
          cfg.atol + cfg.rtol * std::max(std::abs(y(i)), std::abs(y_new(i)));
      const double r = err(i) / scale;
      err_norm += r * r;
    }
    err_norm = std::sqrt(err_norm / static_cast<double>(d));

    if (err_norm <= 1.0) {
      res.path_length += (y_new - y).norm();
      y = y_new;
      k1 = k7;  // FSAL
      t += h;
      ++res.n_steps;
    } else {
      ++res.rejected_steps;
    }

    if (err_norm == 0.0) {
      // Exact embedded estimate (the controller formula degenerates);
      // take the remaining span in one step.
      h = std::max(cfg.t_end - t, cfg.initial_step);
    } else {
      h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(err_norm, -0.2)));
    }
  }

  res.x_final = y;
  return res;
}

}  // namespace cfm
