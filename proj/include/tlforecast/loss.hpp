#pragma once

#include <array>
#include <cmath>
#include <span>
#include <thread>
#include <vector>

#include "tlforecast/network.hpp"

namespace tlf {

/// One teacher-forced training pair, already scaled and encoded.
struct TrainSample {
  std::vector<double> hist;             // n_tau * input_size
  std::array<double, kContextDim> ctx;  // encoded context
  double target = 0.0;                  // acceleration (m/s^2)
};

struct LossValue {
  double sum = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

enum class LossKind { kSquaredError, kNegLogLik };

namespace detail {

/// Per-sample loss and d(loss)/d(raw outputs) for the mixture
/// negative log-likelihood, all in the log domain.
inline double nll_and_dout(std::span<const double> raw, int n, double target,
                           std::span<double> dout) {
  double mx = raw[0];
  for (int k = 1; k < n; ++k) mx = std::max(mx, raw[k]);
  double denom = 0.0;
  for (int k = 0; k < n; ++k) denom += std::exp(raw[k] - mx);
  const double log_denom = mx + std::log(denom);

  std::vector<double> log_resp(n);
  std::vector<double> var(n);
  std::vector<bool> clamped(n);
  double best = -1e300;
  for (int k = 0; k < n; ++k) {
    const double log_pi = raw[k] - log_denom;
    const double raw_var = std::exp(raw[2 * n + k]);
    var[k] = std::clamp(raw_var, kVarFloor, kVarCeil);
    clamped[k] = raw_var < kVarFloor || raw_var > kVarCeil || !std::isfinite(raw_var);
    const double d = target - raw[n + k];
    log_resp[k] = log_pi -
                  0.5 * std::log(2.0 * std::numbers::pi * var[k]) -
                  d * d / (2.0 * var[k]);
    best = std::max(best, log_resp[k]);
  }
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += std::exp(log_resp[k] - best);
  const double log_lik = best + std::log(acc);

  if (!dout.empty()) {
    for (int k = 0; k < n; ++k) {
      const double pi_k = std::exp(raw[k] - log_denom);
      const double gamma = std::exp(log_resp[k] - log_lik);
      const double d = raw[n + k] - target;  // mu - a
      dout[k] = pi_k - gamma;
      dout[n + k] = gamma * d / var[k];
      const double dvar =
          gamma * (0.5 / var[k] - d * d / (2.0 * var[k] * var[k]));
      dout[2 * n + k] = clamped[k] ? 0.0 : dvar * var[k];
    }
  }
  return -log_lik;
}

struct GradShard {
  std::vector<double> grad;
  double loss_sum = 0.0;
};

inline void grad_worker(const ModelWeights& w, const Layout& lay,
                        std::span<const TrainSample> samples, LossKind kind,
                        bool want_grad, GradShard& shard) {
  ForwardTrace tr;
  const int n = w.arch.mixture_components;
  std::vector<double> dout(w.arch.head_output());
  if (want_grad) shard.grad.assign(w.params.size(), 0.0);
  for (const auto& sample : samples) {
    forward_core(w, lay, sample.hist, sample.ctx, tr);
    if (kind == LossKind::kSquaredError) {
      const double err = tr.out[0] - sample.target;
      shard.loss_sum += err * err;
      dout[0] = 2.0 * err;
    } else {
      shard.loss_sum += nll_and_dout(
          tr.out, n, sample.target,
          want_grad ? std::span<double>(dout) : std::span<double>());
    }
    if (want_grad) backward_core(w, lay, tr, dout, shard.grad);
  }
}

inline LossValue batched(const ModelWeights& w,
                         std::span<const TrainSample> batch, LossKind kind,
                         std::span<double> grad_out, int threads) {
  if (batch.empty()) throw DomainError("loss: empty batch");
  if (kind == LossKind::kSquaredError &&
      w.arch.head != HeadKind::kDeterministic) {
    throw DomainError("squared-error loss needs a deterministic head");
  }
  if (kind == LossKind::kNegLogLik && w.arch.head != HeadKind::kMixture) {
    throw DomainError("negative log-likelihood needs a mixture head");
  }
  const bool want_grad = !grad_out.empty();
  const Layout lay(w);

  // The batch is cut into fixed-size chunks summed in index order, so the
  // reduction is bitwise identical for every worker count.
  constexpr std::size_t kChunk = 16;
  const std::size_t nchunks = (batch.size() + kChunk - 1) / kChunk;
  std::vector<GradShard> shards(nchunks);
  auto run_chunks = [&](std::size_t first, std::size_t step) {
    for (std::size_t c = first; c < nchunks; c += step) {
      const std::size_t lo = c * kChunk;
      const std::size_t hi = std::min(batch.size(), lo + kChunk);
      grad_worker(w, lay, batch.subspan(lo, hi - lo), kind, want_grad, shards[c]);
    }
  };
  const auto nworkers = static_cast<std::size_t>(
      std::max(1, std::min<int>(threads, static_cast<int>(nchunks))));
  if (nworkers == 1) {
    run_chunks(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nworkers; ++i) {
      pool.emplace_back(run_chunks, i, nworkers);
    }
    for (auto& th : pool) th.join();
  }

  LossValue loss;
  loss.count = batch.size();
  for (const auto& shard : shards) loss.sum += shard.loss_sum;
  loss.mean = loss.sum / static_cast<double>(loss.count);
  if (want_grad) {
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
    for (const auto& shard : shards) {
      for (std::size_t i = 0; i < grad_out.size(); ++i) {
        grad_out[i] += shard.grad[i];
      }
    }
  }
  return loss;
}

}  // namespace detail

/// Summed squared error of the deterministic policy over a batch (the
/// per-sample mean is reported alongside).
inline LossValue loss_deterministic(const ModelWeights& w,
                                    std::span<const TrainSample> batch,
                                    int threads = 1) {
  return detail::batched(w, batch, LossKind::kSquaredError, {}, threads);
}

/// Summed mixture negative log-likelihood over a batch, log-domain.
inline LossValue loss_nll(const ModelWeights& w,
                          std::span<const TrainSample> batch, int threads = 1) {
  return detail::batched(w, batch, LossKind::kNegLogLik, {}, threads);
}

/// Exact analytic gradient of the summed batch loss with respect to every
/// parameter (backpropagation through time over the full history window).
/// `grad_out` must have the size of the parameter vector.
inline LossValue gradients(const ModelWeights& w,
                           std::span<const TrainSample> batch, LossKind kind,
                           std::span<double> grad_out, int threads = 1) {
  if (grad_out.size() != w.params.size()) {
    throw DomainError("gradients: output buffer size mismatch");
  }
  return detail::batched(w, batch, kind, grad_out, threads);
}

}  // namespace tlf
