#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include "tlforecast/errors.hpp"
#include "tlforecast/scaler.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

/// Network-boundary context layout. One fixed layout is shared by all four
/// ablation variants; a masked or physically absent group is encoded as zeros
/// with its presence flag at 0.
///
///   [0] fv present   [1] range (scaled)   [2] range rate (scaled)
///   [3] tl present   [4..6] phase one-hot G/Y/R
///   [7] phase timer (scaled)
///   [8] sin(2*pi*tod/24)   [9] cos(2*pi*tod/24)
inline constexpr int kContextDim = 10;

/// Assembles the context a given model variant is allowed to observe.
/// Masked groups are dropped before they are read, so the result depends only
/// on the unmasked inputs.
inline ContextVector make_context(AblationMode mode,
                                  std::optional<FvRelativeState> fv,
                                  std::optional<TlSignalState> tl, double tod) {
  if (!(tod >= 0.0 && tod < 24.0)) {
    throw DomainError("make_context: tod must lie in [0, 24)");
  }
  ContextVector ctx;
  ctx.tod = tod;
  const bool want_fv = mode == AblationMode::kAll || mode == AblationMode::kNoTl;
  const bool want_tl = mode == AblationMode::kAll || mode == AblationMode::kNoFv;
  if (want_fv) ctx.fv = fv;
  if (want_tl) ctx.tl = tl;
  return ctx;
}

/// Re-masks a fully observed context for a specific model variant.
inline ContextVector mask_context(const ContextVector& full, AblationMode mode) {
  return make_context(mode, full.fv, full.tl, full.tod);
}

inline std::array<double, kContextDim> encode_context(
    const ContextVector& ctx, const FeatureScaler& scaler) {
  std::array<double, kContextDim> out{};
  if (ctx.fv) {
    out[0] = 1.0;
    out[1] = scaler.scale_one(FeatureId::kRange, ctx.fv->r);
    out[2] = scaler.scale_one(FeatureId::kRangeRate, ctx.fv->r_dot);
  }
  if (ctx.tl) {
    out[3] = 1.0;
    switch (ctx.tl->phase) {
      case Phase::kGreen: out[4] = 1.0; break;
      case Phase::kYellow: out[5] = 1.0; break;
      case Phase::kRed: out[6] = 1.0; break;
    }
    out[7] = scaler.scale_one(FeatureId::kPhaseTimer, ctx.tl->timer);
  }
  const double angle = 2.0 * std::numbers::pi * ctx.tod / 24.0;
  out[8] = std::sin(angle);
  out[9] = std::cos(angle);
  return out;
}

}  // namespace tlf
