#pragma once

#include <cmath>

#include <cfm/common.hpp>

namespace cfm {

// Bias-corrected Adam with the canonical coefficients.
struct OptimState {
  Vec m;
  Vec v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimState create(Eigen::Index n, double lr) {
    OptimState s;
    s.m = Vec::Zero(n);
    s.v = Vec::Zero(n);
    s.lr = lr;
    return s;
  }
};

inline void adam_step(Vec& params, OptimState& opt, const Vec& grad) {
  require(params.size() == opt.m.size() && grad.size() == opt.m.size(),
          "adam_step: array lengths do not match");
  if (!grad.allFinite()) throw NumericError("adam_step: non-finite gradient");

  ++opt.step;
  opt.m = opt.beta1 * opt.m + (1.0 - opt.beta1) * grad;
  opt.v.array() =
      opt.beta2 * opt.v.array() + (1.0 - opt.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  params.array() -= opt.lr * (opt.m.array() / bc1) /
                    ((opt.v.array() / bc2).sqrt() + opt.eps);
}

// Shadow copy of the parameters, updated as
// shadow <- decay * shadow + (1 - decay) * params.
struct EmaState {
  Vec shadow;
  double decay = 0.999;

  static EmaState create(const Vec& params, double decay) {
    require(decay > 0.0 && decay < 1.0, "EMA decay must lie in (0, 1)");
    return {params, decay};
  }
};

inline void ema_update(EmaState& ema, const Vec& params) {
  require(ema.decay > 0.0 && ema.decay < 1.0, "EMA decay must lie in (0, 1)");
  require(ema.shadow.size() == params.size(),
          "ema_update: array lengths do not match");
  ema.shadow = ema.decay * ema.shadow + (1.0 - ema.decay) * params;
}

}  // namespace cfm
