#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "tlforecast/context.hpp"
#include "tlforecast/driver.hpp"
#include "tlforecast/kinematics.hpp"
#include "tlforecast/scenario.hpp"
#include "tlforecast/signal.hpp"
#include "tlforecast/smoothing.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

struct VehicleTrack {
  std::vector<double> s;
  std::vector<double> v;
  std::vector<double> a;
};

/// One simulated approach to the intersection, sampled at uniform dt. The
/// recorded series satisfy the trapezoidal kinematic step exactly:
///   v[n+1] = v[n] + a[n]*dt,  s[n+1] = s[n] + 0.5*(v[n]+v[n+1])*dt.
struct Episode {
  std::uint64_t id = 0;
  double dt = 0.2;
  double tod = 12.0;
  double tl_position = 0.0;
  std::uint64_t seed = 0;
  SignalCycleConfig signal;
  DriverParams hv_params;
  std::optional<DriverParams> fv_params;
  VehicleTrack hv;
  std::optional<VehicleTrack> fv;
  std::vector<TlSignalState> tl;  // true (undelayed) signal per sample

  std::size_t samples() const { return hv.s.size(); }
  double time_at(std::size_t n) const { return static_cast<double>(n) * dt; }
};

/// Initial conditions for one episode. When not supplied they are drawn from
/// the episode seed.
struct EpisodeInit {
  double hv_start_distance = 100.0;  // d to stop bar at t = 0 (m)
  double hv_start_speed = 12.0;
  double fv_start_gap = 25.0;        // initial range r (m)
  double fv_start_speed = 12.0;
};

namespace detail {

inline EpisodeInit draw_init(const DriverParams& hv,
                             const std::optional<DriverParams>& fv, Rng& rng) {
  EpisodeInit init;
  init.hv_start_distance = rng.uniform(40.0, 160.0);
  init.hv_start_speed = hv.desired_speed * rng.uniform(0.6, 1.0);
  if (fv) {
    init.fv_start_gap = rng.uniform(12.0, 50.0);
    init.fv_start_speed = fv->desired_speed * rng.uniform(0.6, 1.0);
  }
  return init;
}

inline VehicleTrack roll_vehicle(const SignalCycleConfig& cfg,
                                 const DriverParams& params, double s0,
                                 double v0, double tod, double duration,
                                 double dt, Rng& rng,
                                 const VehicleTrack* leader) {
  const auto n_steps = static_cast<std::size_t>(std::llround(duration / dt));
  DriverParams p = params;
  p.desired_speed *= diurnal_speed_factor(tod);
  DriverMemory mem;

  VehicleTrack track;
  track.s.reserve(n_steps + 1);
  track.v.reserve(n_steps + 1);
  track.a.reserve(n_steps + 1);
  VehicleKinState x{s0, v0};
  for (std::size_t n = 0; n <= n_steps; ++n) {
    const double t = static_cast<double>(n) * dt;
    const TlSignalState perceived =
        tl_state_at(cfg, std::max(0.0, t - p.reaction_delay));
    std::optional<FvRelativeState> fv_rel;
    if (leader) {
      fv_rel = FvRelativeState{leader->s[n] - x.s, leader->v[n] - x.v};
    }
    const double a = driver_accel(x, fv_rel, perceived, -x.s, p, mem, rng, dt);
    track.s.push_back(x.s);
    track.v.push_back(x.v);
    track.a.push_back(a);
    if (n < n_steps) x = step_dynamics(x, a, dt);
  }
  return track;
}

}  // namespace detail

/// Generates one episode. All randomness flows from `seed`; identical
/// arguments reproduce the episode bit for bit. A front vehicle, when
/// configured, is rolled out first and never reacts to the host.
inline Episode simulate_episode(const SignalCycleConfig& cfg,
                                const DriverParams& hv_params,
                                const std::optional<DriverParams>& fv_params,
                                double tod, double duration, double dt,
                                std::uint64_t seed,
                                std::optional<EpisodeInit> init = {}) {
  cfg.validate();
  hv_params.validate();
  if (fv_params) fv_params->validate();
  if (!(dt > 0.0)) throw ConfigError("simulate_episode: dt must be > 0");
  if (!(duration > 0.0)) throw ConfigError("simulate_episode: duration must be > 0");
  if (!(tod >= 0.0 && tod < 24.0)) throw ConfigError("simulate_episode: tod outside [0,24)");

  Rng init_rng(Rng::mix(seed, 0));
  if (!init) init = detail::draw_init(hv_params, fv_params, init_rng);

  Episode ep;
  ep.dt = dt;
  ep.tod = tod;
  ep.seed = seed;
  ep.signal = cfg;
  ep.hv_params = hv_params;
  ep.fv_params = fv_params;

  if (fv_params) {
    Rng fv_rng(Rng::mix(seed, 2));
    ep.fv = detail::roll_vehicle(
        cfg, *fv_params, -init->hv_start_distance + init->fv_start_gap,
        init->fv_start_speed, tod, duration, dt, fv_rng, nullptr);
  }
  Rng hv_rng(Rng::mix(seed, 1));
  ep.hv = detail::roll_vehicle(cfg, hv_params, -init->hv_start_distance,
                               init->hv_start_speed, tod, duration, dt, hv_rng,
                               ep.fv ? &*ep.fv : nullptr);

  const auto n = ep.hv.s.size();
  ep.tl.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ep.tl.push_back(tl_state_at(cfg, ep.time_at(i)));
  return ep;
}

/// Gaussian measurement noise on the logged kinematic series, mirroring a
/// real data-logging chain. The result no longer satisfies the exact
/// kinematic relation; smoothing is expected downstream.
inline Episode add_measurement_noise(const Episode& ep, double pos_std,
                                     double speed_std, double accel_std,
                                     std::uint64_t seed) {
  Episode out = ep;
  Rng rng(Rng::mix(seed, ep.id + 17));
  auto corrupt = [&](VehicleTrack& track) {
    for (auto& x : track.s) x += rng.normal(0.0, pos_std);
    for (auto& x : track.v) x = std::max(0.0, x + rng.normal(0.0, speed_std));
    for (auto& x : track.a) x += rng.normal(0.0, accel_std);
  };
  corrupt(out.hv);
  if (out.fv) corrupt(*out.fv);
  return out;
}

/// Least-squares polynomial smoothing of every logged series.
inline Episode smooth_episode(const Episode& ep, int window_len, int degree) {
  Episode out = ep;
  auto clean = [&](VehicleTrack& track) {
    track.s = smooth_signal(track.s, window_len, degree);
    track.v = smooth_signal(track.v, window_len, degree);
    for (auto& x : track.v) x = std::max(0.0, x);
    track.a = smooth_signal(track.a, window_len, degree);
  };
  clean(out.hv);
  if (out.fv) clean(*out.fv);
  return out;
}

namespace detail {

inline ContextVector episode_context(const Episode& ep, std::size_t n) {
  std::optional<FvRelativeState> fv;
  if (ep.fv) {
    fv = FvRelativeState{ep.fv->s[n] - ep.hv.s[n], ep.fv->v[n] - ep.hv.v[n]};
  }
  return make_context(AblationMode::kAll, fv, ep.tl[n], ep.tod);
}

}  // namespace detail

/// Sliding-window snippet extraction. Windows are labeled over the prediction
/// span (history end through horizon end, inclusive). Episodes shorter than
/// one window yield an empty list.
inline std::vector<Snippet> extract_snippets(const Episode& ep, double tau,
                                             double horizon, double dt,
                                             std::size_t stride_steps = 1) {
  if (stride_steps < 1) throw ConfigError("extract_snippets: stride must be >= 1");
  const auto n_tau = static_cast<std::size_t>(std::llround(tau / dt)) + 1;
  const auto n_fut = static_cast<std::size_t>(std::llround(horizon / dt));
  const std::size_t window = n_tau + n_fut;

  std::vector<Snippet> out;
  if (ep.samples() < window) return out;

  for (std::size_t start = 0; start + window <= ep.samples();
       start += stride_steps) {
    const std::size_t anchor = start + n_tau - 1;  // index of t = 0
    Snippet sn;
    sn.dt = dt;
    sn.tod = ep.tod;
    sn.tl_position = ep.tl_position;
    sn.hist_states.reserve(n_tau);
    sn.hist_contexts.reserve(n_tau);
    for (std::size_t i = start; i < start + n_tau; ++i) {
      sn.hist_states.push_back({ep.hv.s[i], ep.hv.v[i]});
      sn.hist_contexts.push_back(detail::episode_context(ep, i));
    }
    sn.future_states.reserve(n_fut);
    sn.future_contexts.reserve(n_fut);
    sn.future_accels.reserve(n_fut);
    std::vector<Phase> phases;
    phases.reserve(n_fut + 1);
    phases.push_back(ep.tl[anchor].phase);
    for (std::size_t k = 1; k <= n_fut; ++k) {
      const std::size_t i = anchor + k;
      sn.future_states.push_back({ep.hv.s[i], ep.hv.v[i]});
      sn.future_contexts.push_back(detail::episode_context(ep, i));
      sn.future_accels.push_back(ep.hv.a[i - 1]);
      phases.push_back(ep.tl[i].phase);
    }
    sn.scenario = classify_scenario(phases);
    out.push_back(std::move(sn));
  }
  return out;
}

}  // namespace tlf
