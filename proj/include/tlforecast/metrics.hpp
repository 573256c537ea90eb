#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tlforecast/errors.hpp"
#include "tlforecast/forecast.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

/// Mean absolute error, time-weighted absolute error and the absolute
/// deviation at the final step, for one forecast variable.
struct ErrorStats {
  double mae = 0.0;
  double twae = 0.0;
  double adn = 0.0;
};

struct MetricTriple {
  ErrorStats position;
  ErrorStats speed;
};

namespace detail {

inline ErrorStats error_stats(std::span<const double> abs_err, double dt) {
  ErrorStats st;
  double tw_num = 0.0;
  double tw_den = 0.0;
  for (std::size_t k = 0; k < abs_err.size(); ++k) {
    const double t = static_cast<double>(k + 1) * dt;
    st.mae += abs_err[k];
    tw_num += t * abs_err[k];
    tw_den += t;
  }
  st.mae /= static_cast<double>(abs_err.size());
  st.twae = tw_num / tw_den;
  st.adn = abs_err.back();
  return st;
}

}  // namespace detail

/// Forecast-vs-truth metrics over matching horizons, computed independently
/// for position and speed. Step k corresponds to t = (k+1)*dt.
inline MetricTriple compute_metrics(std::span<const VehicleKinState> forecast,
                                    std::span<const VehicleKinState> truth,
                                    double dt) {
  if (forecast.empty() || forecast.size() != truth.size()) {
    throw DomainError("compute_metrics: forecast/truth length mismatch");
  }
  std::vector<double> pos_err(forecast.size());
  std::vector<double> spd_err(forecast.size());
  for (std::size_t k = 0; k < forecast.size(); ++k) {
    pos_err[k] = std::abs(forecast[k].s - truth[k].s);
    spd_err[k] = std::abs(forecast[k].v - truth[k].v);
  }
  return {detail::error_stats(pos_err, dt), detail::error_stats(spd_err, dt)};
}

inline MetricTriple compute_metrics(const ForecastTrajectory& forecast,
                                    const Snippet& truth) {
  return compute_metrics(forecast.states, truth.future_states, truth.dt);
}

/// Tukey box plot summary: linear-interpolation quartiles, whiskers at the
/// last datum within 1.5*IQR of the box, everything beyond flagged outlier.
struct BoxplotStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;
};

/// Quantile with linear interpolation between order statistics (sorted input).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile: empty data");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

inline BoxplotStats boxplot_stats(std::span<const double> values) {
  if (values.empty()) throw DomainError("boxplot_stats: empty data");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  BoxplotStats st;
  st.q1 = quantile_sorted(sorted, 0.25);
  st.median = quantile_sorted(sorted, 0.5);
  st.q3 = quantile_sorted(sorted, 0.75);
  const double iqr = st.q3 - st.q1;
  const double fence_lo = st.q1 - 1.5 * iqr;
  const double fence_hi = st.q3 + 1.5 * iqr;
  st.whisker_lo = st.q3;
  st.whisker_hi = st.q1;
  bool any = false;
  for (double x : sorted) {
    if (x >= fence_lo && x <= fence_hi) {
      if (!any) {
        st.whisker_lo = x;
        any = true;
      }
      st.whisker_hi = x;
    } else {
      st.outliers.push_back(x);
    }
  }
  return st;
}

}  // namespace tlf
