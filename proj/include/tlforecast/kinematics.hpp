#pragma once

#include "tlforecast/types.hpp"

namespace tlf {

/// One zero-order-hold kinematic step:
///   v' = v + a*dt,  s' = s + 0.5*(v + v')*dt.
/// If the step would drive the speed negative, the vehicle comes to rest
/// within the step: v' = 0 and the position advances by the exact stopping
/// distance v^2 / (2|a|) (the truncated trapezoid).
inline VehicleKinState step_dynamics(const VehicleKinState& x, double a,
                                     double dt) {
  if (!(dt > 0.0)) throw DomainError("step_dynamics: dt must be > 0");
  const double v1 = x.v + a * dt;
  if (v1 < 0.0) {
    // a < -v/dt <= 0 here, so the ratio is well defined.
    return {x.s + x.v * x.v / (2.0 * -a), 0.0};
  }
  return {x.s + 0.5 * (x.v + v1) * dt, v1};
}

}  // namespace tlf
