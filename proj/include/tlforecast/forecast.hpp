#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "tlforecast/context.hpp"
#include "tlforecast/kinematics.hpp"
#include "tlforecast/network.hpp"
#include "tlforecast/signal.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

/// Queryable future-signal source over the prediction horizon (the channel a
/// V2I link provides). Phase is piecewise constant; the timer advances
/// linearly between the sampled support points.
class SpatProvider {
 public:
  static SpatProvider from_cycle(SignalCycleConfig cfg, double t0 = 0.0) {
    SpatProvider sp;
    sp.cycle_ = cfg;
    sp.t0_ = t0;
    return sp;
  }

  /// `samples` are (time, state) pairs with strictly increasing times
  /// covering t = 0.
  static SpatProvider from_series(
      std::vector<std::pair<double, TlSignalState>> samples) {
    if (samples.empty()) throw ConfigError("SpatProvider: empty series");
    SpatProvider sp;
    sp.series_ = std::move(samples);
    return sp;
  }

  TlSignalState at(double t) const {
    if (cycle_) return tl_state_at(*cycle_, t0_ + t);
    std::size_t k = 0;
    while (k + 1 < series_.size() && series_[k + 1].first <= t) ++k;
    TlSignalState st = series_[k].second;
    st.timer += t - series_[k].first;
    return st;
  }

 private:
  std::optional<SignalCycleConfig> cycle_;
  double t0_ = 0.0;
  std::vector<std::pair<double, TlSignalState>> series_;
};

/// Builds the signal oracle for a snippet's prediction window from its
/// recorded ground-truth contexts.
inline SpatProvider spat_from_snippet(const Snippet& sn) {
  std::vector<std::pair<double, TlSignalState>> series;
  series.reserve(sn.horizon_steps() + 1);
  if (!sn.hist_contexts.back().tl) {
    throw ConfigError("snippet carries no signal states");
  }
  series.emplace_back(0.0, *sn.hist_contexts.back().tl);
  for (std::size_t k = 0; k < sn.future_contexts.size(); ++k) {
    if (sn.future_contexts[k].tl) {
      series.emplace_back((k + 1) * sn.dt, *sn.future_contexts[k].tl);
    }
  }
  return SpatProvider::from_series(std::move(series));
}

/// Where the forecaster gets future front-vehicle states.
struct FvSource {
  enum class Kind { kNone, kForecast, kOracle };
  Kind kind = Kind::kNone;
  const ModelWeights* fv_model = nullptr;  // NoFV deterministic policy

  static FvSource none() { return {}; }
  static FvSource forecast(const ModelWeights& nofv_model) {
    return {Kind::kForecast, &nofv_model};
  }
  static FvSource oracle() { return {Kind::kOracle, nullptr}; }
};

/// Closed-loop forecast output. Consecutive states satisfy the kinematic
/// step exactly, given the stored accelerations.
struct ForecastTrajectory {
  std::vector<VehicleKinState> states;  // t = dt .. N*dt
  std::vector<double> accels;           // applied over each step
  std::vector<double> step_log_density; // per-step conditional log-density
  double joint_log_prob = 0.0;          // sum of the per-step terms
  bool fv_dropped = false;  // FV sub-forecast was abandoned mid-horizon
};

/// Monte-Carlo rollout set from the generative policy.
struct RolloutEnsemble {
  std::vector<ForecastTrajectory> trajectories;
  std::uint64_t seed = 0;
  double dt = 0.2;

  std::size_t size() const { return trajectories.size(); }

  std::vector<double> positions_at_step(std::size_t k) const {
    std::vector<double> xs(trajectories.size());
    for (std::size_t m = 0; m < trajectories.size(); ++m) {
      xs[m] = trajectories[m].states[k].s;
    }
    return xs;
  }

  std::vector<double> speeds_at_step(std::size_t k) const {
    std::vector<double> xs(trajectories.size());
    for (std::size_t m = 0; m < trajectories.size(); ++m) {
      xs[m] = trajectories[m].states[k].v;
    }
    return xs;
  }
};

namespace detail {

/// Absolute front-vehicle states over the horizon, from the chosen source.
/// Empty when the snippet has no front vehicle or the source is kNone.
inline std::vector<VehicleKinState> future_fv_states(const Snippet& sn,
                                                     const SpatProvider& spat,
                                                     const FvSource& src,
                                                     double dt, int n_steps);

struct RolloutContextFeed {
  const Snippet* snippet;
  const SpatProvider* spat;
  std::vector<VehicleKinState> fv_states;  // absolute, t = 0 .. N-1 step starts
  bool fv_available = false;

  ContextVector context(int k, const VehicleKinState& hv, bool& fv_dropped) {
    std::optional<FvRelativeState> fv;
    if (fv_available && !fv_dropped) {
      const auto& f = fv_states[k];
      const FvRelativeState rel{f.s - hv.s, f.v - hv.v};
      if (rel.r <= 0.0) {
        // Overtaken front vehicle is physically impossible; drop it from the
        // context for the rest of the horizon.
        fv_dropped = true;
      } else {
        fv = rel;
      }
    }
    const double t = k * snippet->dt;
    return make_context(AblationMode::kAll, fv, spat->at(t), snippet->tod);
  }
};

inline void check_mode_source(const ModelWeights& w, const FvSource& src) {
  const bool wants_fv =
      w.arch.mode == AblationMode::kAll || w.arch.mode == AblationMode::kNoTl;
  if (!wants_fv && src.kind != FvSource::Kind::kNone) {
    throw ConfigError("fv source given, but the model's ablation mode masks the front vehicle");
  }
  if (src.kind == FvSource::Kind::kForecast) {
    if (src.fv_model == nullptr || src.fv_model->arch.mode != AblationMode::kNoFv) {
      throw ConfigError("fv forecasts require a deterministic policy trained in nofv mode");
    }
    if (src.fv_model->arch.head != HeadKind::kDeterministic) {
      throw ConfigError("fv forecasts use the deterministic policy head");
    }
  }
}

}  // namespace detail

/// Deterministic closed-loop forecast: alternates most-probable policy
/// actions with the exact kinematic step for `n_steps`, sliding the history
/// window over the model's own predictions. Context per step comes from the
/// signal oracle, the configured front-vehicle source and the time of day.
inline ForecastTrajectory forecast_deterministic(const ModelWeights& w,
                                                 const Snippet& sn,
                                                 const SpatProvider& spat,
                                                 const FvSource& fv_source,
                                                 double dt, int n_steps) {
  if (w.arch.head != HeadKind::kDeterministic) {
    throw ConfigError("forecast_deterministic needs a deterministic head");
  }
  detail::check_mode_source(w, fv_source);
  if (static_cast<int>(sn.n_tau()) != w.arch.n_tau) {
    throw DomainError("snippet history length does not match the model");
  }

  detail::RolloutContextFeed feed;
  feed.snippet = &sn;
  feed.spat = &spat;
  feed.fv_states = detail::future_fv_states(sn, spat, fv_source, dt, n_steps);
  feed.fv_available = !feed.fv_states.empty();

  std::vector<VehicleKinState> window = sn.hist_states;
  ForecastTrajectory out;
  out.states.reserve(n_steps);
  out.accels.reserve(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    const ContextVector ctx = feed.context(k, window.back(), out.fv_dropped);
    const double a = forward_deterministic(w, window, sn.tl_position, ctx);
    const VehicleKinState next = step_dynamics(window.back(), a, dt);
    out.states.push_back(next);
    out.accels.push_back(a);
    window.erase(window.begin());
    window.push_back(next);
  }
  return out;
}

/// Forecasts the front vehicle by treating it as a host with no vehicle
/// ahead, using a policy trained in nofv mode. Returns absolute states.
inline ForecastTrajectory forecast_fv(const ModelWeights& nofv_model,
                                      const std::vector<VehicleKinState>& fv_hist,
                                      double tl_position, double tod,
                                      const SpatProvider& spat, double dt,
                                      int n_steps) {
  if (nofv_model.arch.mode != AblationMode::kNoFv) {
    throw ConfigError("forecast_fv requires weights trained in nofv mode");
  }
  if (nofv_model.arch.head != HeadKind::kDeterministic) {
    throw ConfigError("forecast_fv uses the deterministic policy head");
  }
  if (static_cast<int>(fv_hist.size()) != nofv_model.arch.n_tau) {
    throw DomainError("front-vehicle history length does not match the model");
  }
  std::vector<VehicleKinState> window = fv_hist;
  ForecastTrajectory out;
  out.states.reserve(n_steps);
  out.accels.reserve(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    const ContextVector ctx = make_context(AblationMode::kNoFv, std::nullopt,
                                           spat.at(k * dt), tod);
    const double a = forward_deterministic(nofv_model, window, tl_position, ctx);
    const VehicleKinState next = step_dynamics(window.back(), a, dt);
    out.states.push_back(next);
    out.accels.push_back(a);
    window.erase(window.begin());
    window.push_back(next);
  }
  return out;
}

/// Front-vehicle state series relative to a host trajectory, r = s_fv - s_hv.
inline std::vector<FvRelativeState> relative_to(
    const std::vector<VehicleKinState>& hv,
    const std::vector<VehicleKinState>& fv) {
  if (hv.size() != fv.size()) throw DomainError("relative_to: length mismatch");
  std::vector<FvRelativeState> out(hv.size());
  for (std::size_t i = 0; i < hv.size(); ++i) {
    out[i] = {fv[i].s - hv[i].s, fv[i].v - hv[i].v};
  }
  return out;
}

/// Reconstructs the front vehicle's absolute history from the host history
/// and the recorded relative states. Empty when any history step lacks a
/// front vehicle.
inline std::vector<VehicleKinState> fv_history(const Snippet& sn) {
  std::vector<VehicleKinState> out;
  out.reserve(sn.n_tau());
  for (std::size_t i = 0; i < sn.n_tau(); ++i) {
    const auto& ctx = sn.hist_contexts[i];
    if (!ctx.fv) return {};
    out.push_back({sn.hist_states[i].s + ctx.fv->r,
                   sn.hist_states[i].v + ctx.fv->r_dot});
  }
  return out;
}

namespace detail {

inline std::vector<VehicleKinState> future_fv_states(const Snippet& sn,
                                                     const SpatProvider& spat,
                                                     const FvSource& src,
                                                     double dt, int n_steps) {
  switch (src.kind) {
    case FvSource::Kind::kNone:
      return {};
    case FvSource::Kind::kOracle: {
      // True future FV states, re-assembled from the ground-truth contexts.
      std::vector<VehicleKinState> out;
      out.reserve(n_steps);
      if (!sn.hist_contexts.back().fv) return {};
      out.push_back({sn.hist_states.back().s + sn.hist_contexts.back().fv->r,
                     sn.hist_states.back().v + sn.hist_contexts.back().fv->r_dot});
      for (int k = 1; k < n_steps; ++k) {
        const auto& ctx = sn.future_contexts[k - 1];
        if (!ctx.fv) return {};
        out.push_back({sn.future_states[k - 1].s + ctx.fv->r,
                       sn.future_states[k - 1].v + ctx.fv->r_dot});
      }
      return out;
    }
    case FvSource::Kind::kForecast: {
      const auto hist = fv_history(sn);
      if (hist.empty()) return {};
      // States at step starts t = 0 .. (N-1)*dt: current state plus the first
      // N-1 forecast steps.
      const auto traj = forecast_fv(*src.fv_model, hist, sn.tl_position,
                                    sn.tod, spat, dt, n_steps - 1);
      std::vector<VehicleKinState> out;
      out.reserve(n_steps);
      out.push_back(hist.back());
      out.insert(out.end(), traj.states.begin(), traj.states.end());
      return out;
    }
  }
  return {};
}

inline ForecastTrajectory one_rollout(const ModelWeights& w, const Snippet& sn,
                                      RolloutContextFeed feed, double dt,
                                      int n_steps, Rng rng) {
  std::vector<VehicleKinState> window = sn.hist_states;
  ForecastTrajectory out;
  out.states.reserve(n_steps);
  out.accels.reserve(n_steps);
  out.step_log_density.reserve(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    const ContextVector ctx = feed.context(k, window.back(), out.fv_dropped);
    const MixtureParams z = forward_probabilistic(w, window, sn.tl_position, ctx);
    const double a = sample_action(z, rng);
    out.step_log_density.push_back(z.log_density(a));
    const VehicleKinState next = step_dynamics(window.back(), a, dt);
    out.states.push_back(next);
    out.accels.push_back(a);
    window.erase(window.begin());
    window.push_back(next);
  }
  // Chain-rule factorization: the joint is the product of the per-step
  // conditionals, i.e. the sum in the log domain.
  for (double ld : out.step_log_density) out.joint_log_prob += ld;
  return out;
}

}  // namespace detail

/// Monte-Carlo closed-loop rollouts from the generative policy. Each sample
/// draws its own stream from (seed, rollout index), so serial and parallel
/// execution produce identical ensembles.
inline RolloutEnsemble rollout_probabilistic(const ModelWeights& w,
                                             const Snippet& sn,
                                             const SpatProvider& spat,
                                             const FvSource& fv_source,
                                             double dt, int n_steps,
                                             int n_samples, std::uint64_t seed,
                                             int threads = 1) {
  if (w.arch.head != HeadKind::kMixture) {
    throw ConfigError("rollout_probabilistic needs a mixture head");
  }
  if (n_samples < 1) throw ConfigError("rollout_probabilistic: need >= 1 sample");
  detail::check_mode_source(w, fv_source);

  detail::RolloutContextFeed feed;
  feed.snippet = &sn;
  feed.spat = &spat;
  feed.fv_states = detail::future_fv_states(sn, spat, fv_source, dt, n_steps);
  feed.fv_available = !feed.fv_states.empty();

  RolloutEnsemble ens;
  ens.seed = seed;
  ens.dt = dt;
  ens.trajectories.resize(n_samples);

  auto run_range = [&](int lo, int hi) {
    for (int m = lo; m < hi; ++m) {
      ens.trajectories[m] = detail::one_rollout(w, sn, feed, dt, n_steps,
                                                Rng(Rng::mix(seed, m)));
    }
  };
  const int nthreads = std::max(1, std::min(threads, n_samples));
  if (nthreads == 1) {
    run_range(0, n_samples);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n_samples + nthreads - 1) / nthreads;
    for (int i = 0; i < nthreads; ++i) {
      pool.emplace_back(run_range, i * chunk,
                        std::min(n_samples, (i + 1) * chunk));
    }
    for (auto& th : pool) th.join();
  }
  return ens;
}

}  // namespace tlf
