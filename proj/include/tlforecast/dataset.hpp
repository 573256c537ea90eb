#pragma once

#include <span>
#include <vector>

#include "tlforecast/context.hpp"
#include "tlforecast/loss.hpp"
#include "tlforecast/scaler.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

/// Fits the feature standardization on everything a policy may observe:
/// host distance/speed over history and future, front-vehicle range state
/// where present, and the signal phase timer.
inline FeatureScaler fit_scaler(std::span<const Snippet> snippets) {
  std::vector<FeatureMoments> m(kNumScaledFeatures);
  auto eat_context = [&](const ContextVector& ctx) {
    if (ctx.fv) {
      m[static_cast<int>(FeatureId::kRange)].add(ctx.fv->r);
      m[static_cast<int>(FeatureId::kRangeRate)].add(ctx.fv->r_dot);
    }
    if (ctx.tl) m[static_cast<int>(FeatureId::kPhaseTimer)].add(ctx.tl->timer);
  };
  for (const auto& sn : snippets) {
    for (const auto& st : sn.hist_states) {
      m[static_cast<int>(FeatureId::kDistToLight)].add(
          distance_to_light(st, sn.tl_position));
      m[static_cast<int>(FeatureId::kSpeed)].add(st.v);
    }
    for (const auto& st : sn.future_states) {
      m[static_cast<int>(FeatureId::kDistToLight)].add(
          distance_to_light(st, sn.tl_position));
      m[static_cast<int>(FeatureId::kSpeed)].add(st.v);
    }
    for (const auto& ctx : sn.hist_contexts) eat_context(ctx);
    for (const auto& ctx : sn.future_contexts) eat_context(ctx);
  }
  FeatureScaler scaler;
  for (int i = 0; i < kNumScaledFeatures; ++i) {
    scaler.mean[i] = m[i].mean();
    scaler.stddev[i] = m[i].stddev();
  }
  return scaler;
}

/// Expands snippets into per-step teacher-forced pairs: for each future step
/// k the pair is (ground-truth history window ending at t = k*dt, context at
/// t = k*dt, logged acceleration over [k*dt, (k+1)*dt)).
inline std::vector<TrainSample> make_training_samples(
    std::span<const Snippet> snippets, AblationMode mode,
    const FeatureScaler& scaler) {
  std::vector<TrainSample> out;
  for (const auto& sn : snippets) {
    const std::size_t n_tau = sn.n_tau();
    const std::size_t n_fut = sn.horizon_steps();
    out.reserve(out.size() + n_fut);
    // Rolling window over [hist | future] ground-truth states.
    std::vector<VehicleKinState> window(sn.hist_states.begin(),
                                        sn.hist_states.end());
    for (std::size_t k = 0; k < n_fut; ++k) {
      TrainSample sample;
      sample.hist.reserve(n_tau * 2);
      for (const auto& st : window) {
        sample.hist.push_back(scaler.scale_one(
            FeatureId::kDistToLight, distance_to_light(st, sn.tl_position)));
        sample.hist.push_back(scaler.scale_one(FeatureId::kSpeed, st.v));
      }
      sample.ctx = encode_context(mask_context(sn.context_at_step(k), mode), scaler);
      sample.target = sn.future_accels[k];
      out.push_back(std::move(sample));
      window.erase(window.begin());
      window.push_back(sn.future_states[k]);
    }
  }
  return out;
}

}  // namespace tlf
