#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "tlforecast/rng.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

/// Synthetic driver characteristics. The car-following core is an
/// intelligent-driver-model law; a red (or committed-stop yellow) signal
/// ahead acts as a standing obstacle at the stop bar.
struct DriverParams {
  double desired_speed = 14.0;      // m/s
  double max_accel = 1.8;           // m/s^2
  double comfortable_decel = 2.5;   // m/s^2
  double min_gap = 2.5;             // m
  double headway_time = 1.2;        // s
  double reaction_delay = 0.4;      // s, lag on perceived signal state
  double yellow_pass_propensity = 0.5;
  double noise_std = 0.05;          // m/s^2 additive accel noise
  // At yellow onset, a time-to-stop-bar inside [band_lo, band_hi] puts the
  // driver in the dilemma zone: pass/stop is a Bernoulli draw.
  double dilemma_band_lo = 2.0;     // s
  double dilemma_band_hi = 5.0;     // s

  void validate() const {
    if (!(desired_speed > 0 && max_accel > 0 && comfortable_decel > 0 &&
          min_gap > 0 && headway_time > 0 && reaction_delay >= 0 &&
          noise_std >= 0)) {
      throw ConfigError("driver params: magnitudes must be positive");
    }
    if (!(yellow_pass_propensity >= 0.0 && yellow_pass_propensity <= 1.0)) {
      throw ConfigError("driver params: yellow_pass_propensity outside [0,1]");
    }
  }
};

/// Mutable per-episode driver state: the yellow pass/stop choice. The
/// Bernoulli draw happens at most once per episode; the commitment itself is
/// re-evaluated at each fresh yellow onset and cleared on green.
struct DriverMemory {
  enum class Commit { kNone, kStop, kPass };
  Commit commit = Commit::kNone;
  std::optional<bool> drawn_pass;  // the once-per-episode Bernoulli outcome
};

/// Free-flow desired-speed multiplier by time of day: +-10% sinusoid with the
/// free-flow peak at 03:00.
inline double diurnal_speed_factor(double tod) {
  return 1.0 + 0.1 * std::cos(2.0 * std::numbers::pi * (tod - 3.0) / 24.0);
}

namespace detail {

inline double idm_accel(double v, double v0, double gap, double lead_speed,
                        const DriverParams& p) {
  const double dv = v - lead_speed;
  const double sstar =
      p.min_gap + std::max(0.0, v * p.headway_time +
                                    v * dv / (2.0 * std::sqrt(p.max_accel *
                                                              p.comfortable_decel)));
  const double g = std::max(gap, 0.1);
  const double ratio = v / v0;
  return p.max_accel * (1.0 - ratio * ratio * ratio * ratio -
                        (sstar / g) * (sstar / g));
}

inline void resolve_yellow(DriverMemory& mem, double v, double d_tl,
                           const DriverParams& p, Rng& rng) {
  const double tts = d_tl / std::max(v, 0.5);
  if (tts < p.dilemma_band_lo) {
    mem.commit = DriverMemory::Commit::kPass;
  } else if (tts > p.dilemma_band_hi) {
    mem.commit = DriverMemory::Commit::kStop;
  } else {
    if (!mem.drawn_pass) mem.drawn_pass = rng.bernoulli(p.yellow_pass_propensity);
    mem.commit = *mem.drawn_pass ? DriverMemory::Commit::kPass
                                 : DriverMemory::Commit::kStop;
  }
}

}  // namespace detail

/// Longitudinal acceleration command for one step. `tl` is the signal state as
/// perceived by the driver and `d_tl` the distance to the stop bar (positive
/// while approaching). The result is bounded to
/// [-2*comfortable_decel, max_accel] and never drives v below zero within one
/// Euler step of length dt.
inline double driver_accel(const VehicleKinState& hv,
                           const std::optional<FvRelativeState>& fv,
                           const TlSignalState& tl, double d_tl,
                           const DriverParams& p, DriverMemory& mem, Rng& rng,
                           double dt) {
  const double v0 = p.desired_speed;
  double a = p.max_accel * (1.0 - std::pow(hv.v / v0, 4.0));

  if (fv) a = std::min(a, detail::idm_accel(hv.v, v0, fv->r, hv.v + fv->r_dot, p));

  if (d_tl > 0.0) {
    bool stop_line_active = false;
    switch (tl.phase) {
      case Phase::kGreen:
        mem.commit = DriverMemory::Commit::kNone;
        break;
      case Phase::kYellow:
        if (mem.commit == DriverMemory::Commit::kNone) {
          detail::resolve_yellow(mem, hv.v, d_tl, p, rng);
        }
        stop_line_active = mem.commit == DriverMemory::Commit::kStop;
        break;
      case Phase::kRed:
        // A committed passer keeps going until the bar is crossed.
        stop_line_active = mem.commit != DriverMemory::Commit::kPass;
        break;
    }
    if (stop_line_active) {
      a = std::min(a, detail::idm_accel(hv.v, v0, d_tl, 0.0, p));
    }
  }

  if (p.noise_std > 0.0) a += rng.normal(0.0, p.noise_std);
  a = std::clamp(a, -2.0 * p.comfortable_decel, p.max_accel);
  return std::max(a, -hv.v / dt);
}

}  // namespace tlf
