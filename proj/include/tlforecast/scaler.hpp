#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tlforecast/errors.hpp"

namespace tlf {

/// Per-feature standardization fitted on the training split.
/// Feature indices are fixed by FeatureId; flags, one-hot phase bits and the
/// time-of-day sin/cos encoding are never standardized.
enum class FeatureId : int {
  kDistToLight = 0,
  kSpeed = 1,
  kRange = 2,
  kRangeRate = 3,
  kPhaseTimer = 4,
};

inline constexpr int kNumScaledFeatures = 5;

struct FeatureScaler {
  std::vector<double> mean = std::vector<double>(kNumScaledFeatures, 0.0);
  std::vector<double> stddev = std::vector<double>(kNumScaledFeatures, 1.0);

  double scale_one(FeatureId id, double x) const {
    const auto i = static_cast<std::size_t>(id);
    return (x - mean[i]) / stddev[i];
  }

  double unscale_one(FeatureId id, double z) const {
    const auto i = static_cast<std::size_t>(id);
    return z * stddev[i] + mean[i];
  }
};

/// Accumulates one feature column and produces (mean, stddev) with a positive
/// floor on stddev so the scaler stays invertible even for constant columns.
class FeatureMoments {
 public:
  void add(double x) {
    ++n_;
    sum_ += x;
    sum_sq_ += x * x;
  }

  double mean() const { return n_ ? sum_ / static_cast<double>(n_) : 0.0; }

  double stddev() const {
    if (n_ < 2) return 1.0;
    const double m = mean();
    double var = sum_sq_ / static_cast<double>(n_) - m * m;
    if (var < 0.0) var = 0.0;
    const double sd = std::sqrt(var);
    return sd > 1e-8 ? sd : 1.0;
  }

  std::size_t count() const { return n_; }

 private:
  std::size_t n_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

inline std::vector<double> scale(std::span<const double> features,
                                 const FeatureScaler& scaler) {
  if (features.size() != scaler.mean.size()) {
    throw DomainError("scale: feature dimension mismatch");
  }
  std::vector<double> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    out[i] = (features[i] - scaler.mean[i]) / scaler.stddev[i];
  }
  return out;
}

inline std::vector<double> unscale(std::span<const double> scaled,
                                   const FeatureScaler& scaler) {
  if (scaled.size() != scaler.mean.size()) {
    throw DomainError("unscale: feature dimension mismatch");
  }
  std::vector<double> out(scaled.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    out[i] = scaled[i] * scaler.stddev[i] + scaler.mean[i];
  }
  return out;
}

}  // namespace tlf
