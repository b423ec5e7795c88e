#pragma once

#include <cfm/common.hpp>

namespace cfm {

// Pseudo-time of the transport path, valid on [0, 1]. Velocity fields
// with a 1/(1-t) factor additionally require t < 1; callers integrating
// analytic fields stop at kSingularTimeCap and finish analytically.
inline constexpr double kSingularTimeCap = 1.0 - 1e-4;

inline void check_time(double t) {
  require(t >= 0.0 && t <= 1.0, "time must lie in [0, 1]");
}

inline void check_time_not_terminal(double t) {
  check_time(t);
  if (t >= 1.0) throw NumericError("velocity field is singular at t = 1");
}

// Endpoints of one transport path: z is the source sample, x the target.
struct InterpolantPair {
  Vec z;
  Vec x;

  InterpolantPair(Vec z_, Vec x_) : z(std::move(z_)), x(std::move(x_)) {
    require(z.size() == x.size() && z.size() >= 1,
            "interpolant endpoints must have equal nonzero dimension");
  }
};

// Linear path (1-t) z + t x.
inline Vec interpolate(const InterpolantPair& pair, double t) {
  check_time(t);
  return (1.0 - t) * pair.z + t * pair.x;
}

// Time derivative of the linear path; constant in t.
inline Vec interpolant_rate(const InterpolantPair& pair) {
  return pair.x - pair.z;
}

}  // namespace cfm
