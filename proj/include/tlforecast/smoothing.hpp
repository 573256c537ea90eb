#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tlforecast/errors.hpp"

namespace tlf {
namespace detail {

/// Solves the small dense system A x = b in place (partial pivoting).
inline std::vector<double> solve_dense(std::vector<double> a,
                                       std::vector<double> b, int n) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    const double d = a[col * n + col];
    if (d == 0.0) throw DomainError("smoothing: singular normal equations");
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / d;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a[r * n + c] * x[c];
    x[r] = acc / a[r * n + r];
  }
  return x;
}

/// Weights w such that w . y equals the value at offset 0 of the
/// least-squares polynomial of `degree` fitted over integer offsets
/// [lo, hi] (lo <= 0 <= hi).
inline std::vector<double> poly_fit_weights(int lo, int hi, int degree) {
  const int npts = hi - lo + 1;
  const int nc = std::min(degree, npts - 1) + 1;
  // Normal equations: M c = V^T y with M = V^T V, V[j][k] = offset_j^k.
  // c0 is linear in y; column-by-column solves give the weight vector.
  std::vector<double> powsum(2 * nc - 1, 0.0);
  for (int j = lo; j <= hi; ++j) {
    double p = 1.0;
    for (int k = 0; k < 2 * nc - 1; ++k) {
      powsum[k] += p;
      p *= j;
    }
  }
  std::vector<double> m(nc * nc);
  for (int r = 0; r < nc; ++r)
    for (int c = 0; c < nc; ++c) m[r * nc + c] = powsum[r + c];

  std::vector<double> w(npts);
  for (int j = 0; j < npts; ++j) {
    std::vector<double> rhs(nc);
    double p = 1.0;
    for (int k = 0; k < nc; ++k) {
      rhs[k] = p;
      p *= (lo + j);
    }
    w[j] = solve_dense(m, rhs, nc)[0];  // e0^T M^{-1} V^T e_j
  }
  return w;
}

}  // namespace detail

/// Least-squares polynomial smoothing: each output point is the center value
/// of the polynomial fitted over a sliding window. Near the ends the window
/// shrinks to the available one-sided samples.
inline std::vector<double> smooth_signal(std::span<const double> series,
                                         int window_len, int degree) {
  if (window_len < 1 || window_len % 2 == 0) {
    throw ConfigError("smooth_signal: window_len must be odd and positive");
  }
  if (degree < 0 || degree >= window_len) {
    throw ConfigError("smooth_signal: need 0 <= degree < window_len");
  }
  const int n = static_cast<int>(series.size());
  const int m = window_len / 2;
  std::vector<double> out(series.size());
  if (n == 0) return out;

  const auto interior = detail::poly_fit_weights(-m, m, degree);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - m) - i;
    const int hi = std::min(n - 1, i + m) - i;
    double acc = 0.0;
    if (lo == -m && hi == m) {
      for (int j = -m; j <= m; ++j) acc += interior[j + m] * series[i + j];
    } else {
      const auto w = detail::poly_fit_weights(lo, hi, degree);
      for (int j = lo; j <= hi; ++j) acc += w[j - lo] * series[i + j];
    }
    out[i] = acc;
  }
  return out;
}

inline std::vector<double> smooth_signal(const std::vector<double>& series,
                                         int window_len, int degree) {
  return smooth_signal(std::span<const double>(series), window_len, degree);
}

}  // namespace tlf
