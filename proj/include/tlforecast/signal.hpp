#pragma once

#include <cmath>

#include "tlforecast/errors.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

/// Fixed-time signal program: G -> Y -> R repeating. `cycle_offset` is the
/// position within the cycle at t = 0.
struct SignalCycleConfig {
  double g_dur = 30.0;
  double y_dur = 3.0;
  double r_dur = 30.0;
  double cycle_offset = 0.0;

  double cycle() const { return g_dur + y_dur + r_dur; }

  void validate() const {
    if (!(g_dur > 0.0 && r_dur > 0.0 && y_dur > 0.0)) {
      throw ConfigError("signal cycle: phase durations must be positive");
    }
  }
};

/// Phase and elapsed-in-phase time of the deterministic schedule at time t.
/// This is the future-signal oracle a V2I channel would provide.
inline TlSignalState tl_state_at(const SignalCycleConfig& cfg, double t) {
  if (t < 0.0) throw DomainError("tl_state_at: t must be >= 0");
  double u = std::fmod(cfg.cycle_offset + t, cfg.cycle());
  if (u < 0.0) u += cfg.cycle();
  if (u < cfg.g_dur) return {Phase::kGreen, u};
  if (u < cfg.g_dur + cfg.y_dur) return {Phase::kYellow, u - cfg.g_dur};
  return {Phase::kRed, u - cfg.g_dur - cfg.y_dur};
}

}  // namespace tlf
