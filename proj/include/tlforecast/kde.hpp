#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "tlforecast/errors.hpp"
#include "tlforecast/forecast.hpp"

namespace tlf {

enum class MarginalVariable { kPosition, kSpeed };

/// Rule-of-thumb Gaussian-kernel bandwidth: 1.06 * sigma * M^(-1/5), floored
/// at 1e-3 of the sample range. Returns 0 for degenerate (zero-spread)
/// samples.
inline double silverman_bandwidth(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  const double range = *hi - *lo;
  if (range == 0.0) return 0.0;
  const double h = 1.06 * std::sqrt(var) *
                   std::pow(static_cast<double>(xs.size()), -0.2);
  return std::max(h, 1e-3 * range);
}

/// Gaussian-kernel density estimate at a single point.
inline double kde_value(std::span<const double> xs, double bandwidth, double x) {
  if (bandwidth <= 0.0) throw DomainError("kde_value: bandwidth must be > 0");
  const double norm =
      1.0 / (static_cast<double>(xs.size()) * bandwidth *
             std::sqrt(2.0 * std::numbers::pi));
  double acc = 0.0;
  for (double s : xs) {
    const double u = (x - s) / bandwidth;
    acc += std::exp(-0.5 * u * u);
  }
  return norm * acc;
}

/// Uniform grid spanning the samples plus `pad_bandwidths` bandwidths on each
/// side; wide enough that the density integrates to ~1 over it.
inline std::vector<double> kde_grid(std::span<const double> xs, double bandwidth,
                                    std::size_t n_points = 401,
                                    double pad_bandwidths = 5.0) {
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  const double a = *lo - pad_bandwidths * bandwidth;
  const double b = *hi + pad_bandwidths * bandwidth;
  std::vector<double> grid(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    grid[i] = a + (b - a) * static_cast<double>(i) /
                      static_cast<double>(n_points - 1);
  }
  return grid;
}

struct MarginalDensity {
  bool point_mass = false;  // zero-spread ensemble, no density representation
  double point_value = 0.0;
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
};

/// Kernel density estimate of one forecast variable at step k over the
/// rollout ensemble, evaluated on `grid` (strictly increasing).
inline MarginalDensity marginal_density(const RolloutEnsemble& ens,
                                        std::size_t step,
                                        MarginalVariable variable,
                                        std::vector<double> grid) {
  if (ens.size() < 2) throw DomainError("marginal_density: need >= 2 rollouts");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw DomainError("marginal_density: grid must be strictly increasing");
    }
  }
  const std::vector<double> xs = variable == MarginalVariable::kPosition
                                     ? ens.positions_at_step(step)
                                     : ens.speeds_at_step(step);
  MarginalDensity out;
  out.bandwidth = silverman_bandwidth(xs);
  if (out.bandwidth == 0.0) {
    out.point_mass = true;
    out.point_value = xs.front();
    return out;
  }
  out.grid = std::move(grid);
  out.density.resize(out.grid.size());
  for (std::size_t i = 0; i < out.grid.size(); ++i) {
    out.density[i] = kde_value(xs, out.bandwidth, out.grid[i]);
  }
  return out;
}

/// Same, with an auto-built grid spanning +-5 bandwidths of the sample range.
inline MarginalDensity marginal_density(const RolloutEnsemble& ens,
                                        std::size_t step,
                                        MarginalVariable variable,
                                        std::size_t n_points = 401) {
  if (ens.size() < 2) throw DomainError("marginal_density: need >= 2 rollouts");
  const std::vector<double> xs = variable == MarginalVariable::kPosition
                                     ? ens.positions_at_step(step)
                                     : ens.speeds_at_step(step);
  const double h = silverman_bandwidth(xs);
  if (h == 0.0) {
    MarginalDensity out;
    out.point_mass = true;
    out.point_value = xs.front();
    return out;
  }
  return marginal_density(ens, step, variable, kde_grid(xs, h, n_points));
}

inline double trapezoid_integral(std::span<const double> grid,
                                 std::span<const double> values) {
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
  }
  return acc;
}

/// Indices of grid-interior local maxima, highest first.
inline std::vector<std::size_t> density_modes(const MarginalDensity& d) {
  std::vector<std::size_t> modes;
  for (std::size_t i = 1; i + 1 < d.density.size(); ++i) {
    if (d.density[i] > d.density[i - 1] && d.density[i] >= d.density[i + 1]) {
      modes.push_back(i);
    }
  }
  std::sort(modes.begin(), modes.end(), [&](std::size_t a, std::size_t b) {
    return d.density[a] > d.density[b];
  });
  return modes;
}

/// Keeps the rollouts whose position stays in a region of marginal density
/// >= threshold at every step. Zero-spread steps keep every member.
inline std::vector<std::size_t> filter_by_density_indices(
    const RolloutEnsemble& ens, double threshold) {
  if (ens.size() < 2) throw DomainError("filter_by_density: need >= 2 rollouts");
  const std::size_t n_steps = ens.trajectories.front().states.size();
  std::vector<bool> keep(ens.size(), true);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const auto xs = ens.positions_at_step(k);
    const double h = silverman_bandwidth(xs);
    if (h == 0.0) continue;
    for (std::size_t m = 0; m < ens.size(); ++m) {
      if (keep[m] && kde_value(xs, h, xs[m]) < threshold) keep[m] = false;
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t m = 0; m < ens.size(); ++m) {
    if (keep[m]) kept.push_back(m);
  }
  return kept;
}

inline RolloutEnsemble filter_by_density(const RolloutEnsemble& ens,
                                         double threshold) {
  RolloutEnsemble out;
  out.seed = ens.seed;
  out.dt = ens.dt;
  for (std::size_t m : filter_by_density_indices(ens, threshold)) {
    out.trajectories.push_back(ens.trajectories[m]);
  }
  return out;
}

}  // namespace tlf
