#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "tlforecast/errors.hpp"

namespace tlf {

/// Traffic-light phase.
enum class Phase { kGreen, kYellow, kRed };

inline char phase_char(Phase p) {
  switch (p) {
    case Phase::kGreen: return 'G';
    case Phase::kYellow: return 'Y';
    case Phase::kRed: return 'R';
  }
  return '?';
}

inline Phase phase_from_char(char c) {
  switch (c) {
    case 'G': return Phase::kGreen;
    case 'Y': return Phase::kYellow;
    case 'R': return Phase::kRed;
  }
  throw DomainError(std::string("unknown phase character: ") + c);
}

/// Longitudinal state of one vehicle. `s` grows in the travel direction; the
/// stop bar sits at a known coordinate, and the model-side feature
/// "distance to light" is tl_position - s (positive while approaching).
struct VehicleKinState {
  double s = 0.0;  // m
  double v = 0.0;  // m/s, >= 0
};

/// Front vehicle relative to the host: range r = s_fv - s_hv (> 0, the FV is
/// ahead), range rate r_dot = v_fv - v_hv.
struct FvRelativeState {
  double r = 0.0;      // m
  double r_dot = 0.0;  // m/s
};

/// Signal phase plus seconds elapsed since the last phase change.
struct TlSignalState {
  Phase phase = Phase::kGreen;
  double timer = 0.0;  // s, >= 0
};

/// Context-masking variant. Each variant is a separately trained model; the
/// variant determines which context groups the model may observe.
enum class AblationMode { kAll, kNoFv, kNoTl, kNoFvTl };

inline constexpr int kNumAblationModes = 4;

inline std::string ablation_mode_name(AblationMode m) {
  switch (m) {
    case AblationMode::kAll: return "all";
    case AblationMode::kNoFv: return "nofv";
    case AblationMode::kNoTl: return "notl";
    case AblationMode::kNoFvTl: return "nofvtl";
  }
  return "?";
}

inline AblationMode ablation_mode_from_name(const std::string& s) {
  if (s == "all") return AblationMode::kAll;
  if (s == "nofv") return AblationMode::kNoFv;
  if (s == "notl") return AblationMode::kNoTl;
  if (s == "nofvtl") return AblationMode::kNoFvTl;
  throw ConfigError("unknown ablation mode: " + s);
}

/// Per-step conditioning input. Absent groups are either physically missing
/// (no front vehicle) or masked by the ablation mode.
struct ContextVector {
  std::optional<FvRelativeState> fv;
  std::optional<TlSignalState> tl;
  double tod = 0.0;  // hours since midnight, in [0, 24)
};

/// Phase composition of a prediction window: steady phase, one transition,
/// the full green-yellow-red sweep, or anything else.
enum class ScenarioLabel { kG, kY, kR, kGY, kYR, kRG, kGYR, kOther };

inline constexpr int kNumScenarioLabels = 8;

inline std::string scenario_name(ScenarioLabel l) {
  switch (l) {
    case ScenarioLabel::kG: return "G";
    case ScenarioLabel::kY: return "Y";
    case ScenarioLabel::kR: return "R";
    case ScenarioLabel::kGY: return "GY";
    case ScenarioLabel::kYR: return "YR";
    case ScenarioLabel::kRG: return "RG";
    case ScenarioLabel::kGYR: return "GYR";
    case ScenarioLabel::kOther: return "Other";
  }
  return "?";
}

inline ScenarioLabel scenario_from_name(const std::string& s) {
  for (int i = 0; i < kNumScenarioLabels; ++i) {
    auto l = static_cast<ScenarioLabel>(i);
    if (scenario_name(l) == s) return l;
  }
  throw DomainError("unknown scenario label: " + s);
}

/// One training/evaluation sample: a history window ending at t = 0, the
/// ground-truth future over the prediction horizon, and the aligned contexts.
///
/// Layout (uniform step dt):
///   hist_states[i], hist_contexts[i]     at t = (i - n_tau + 1) * dt, i in [0, n_tau)
///   future_states[k], future_contexts[k] at t = (k + 1) * dt,        k in [0, N)
///   future_accels[k]: acceleration applied over [k*dt, (k+1)*dt) -- the
///   policy target for a history window ending at t = k*dt.
struct Snippet {
  double dt = 0.2;
  double tod = 0.0;
  double tl_position = 0.0;  // stop-bar coordinate in the s axis
  std::vector<VehicleKinState> hist_states;
  std::vector<ContextVector> hist_contexts;
  std::vector<VehicleKinState> future_states;
  std::vector<double> future_accels;
  std::vector<ContextVector> future_contexts;
  ScenarioLabel scenario = ScenarioLabel::kOther;

  std::size_t n_tau() const { return hist_states.size(); }
  std::size_t horizon_steps() const { return future_states.size(); }

  /// Context in effect at forecast step k (policy input time t = k*dt).
  const ContextVector& context_at_step(std::size_t k) const {
    if (k == 0) return hist_contexts.back();
    return future_contexts[k - 1];
  }
};

inline double distance_to_light(const VehicleKinState& x, double tl_position) {
  return tl_position - x.s;
}

}  // namespace tlf
