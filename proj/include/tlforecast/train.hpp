#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tlforecast/dataset.hpp"
#include "tlforecast/loss.hpp"
#include "tlforecast/network.hpp"

namespace tlf {

struct TrainConfig {
  double learning_rate = 2e-3;
  double beta1 = 0.9;   // first-moment decay
  double beta2 = 0.999; // second-moment decay
  double epsilon = 1e-8;
  int batch_size = 64;
  int epochs = 30;
  // Step schedule: the learning rate is multiplied by lr_decay_factor after
  // 60% and again after 85% of the epoch budget.
  double lr_decay_factor = 0.5;
  double grad_clip_norm = 5.0;
  double validation_fraction = 0.15;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (!(learning_rate > 0 && beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1)) {
      throw ConfigError("train config: rates must lie in (0, 1)");
    }
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
      throw ConfigError("train config: validation_fraction outside [0, 1)");
    }
  }
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // per-sample mean over the epoch
  double val_loss = 0.0;
};

struct TrainResult {
  ModelWeights weights;  // best-validation weights
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

namespace detail {

/// Adaptive-moment update with bias correction.
struct AdamState {
  std::vector<double> m, v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void update(std::span<double> params, std::span<const double> grad,
              const TrainConfig& cfg) {
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      params[i] -= cfg.learning_rate * (m[i] / c1) /
                   (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
  }
};

inline void clip_global_norm(std::span<double> grad, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (double& g : grad) g *= f;
  }
}

}  // namespace detail

/// Trains one policy on pre-built sample sets. Minimizes the batch-mean loss
/// with adaptive-moment updates and global-norm gradient clipping; returns
/// the weights with the best validation loss across epochs. A fixed seed
/// reproduces the result bit for bit.
inline TrainResult train_on_samples(const std::vector<TrainSample>& train_set,
                                    const std::vector<TrainSample>& val_set,
                                    ModelWeights w, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training set");
  const LossKind kind = w.arch.head == HeadKind::kDeterministic
                            ? LossKind::kSquaredError
                            : LossKind::kNegLogLik;

  detail::AdamState adam(w.params.size());
  std::vector<double> grad(w.params.size());
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(Rng::mix(cfg.seed, 0x5875));

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<TrainSample> batch;
  batch.reserve(cfg.batch_size);

  TrainConfig step_cfg = cfg;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch == cfg.epochs * 6 / 10 + 1 || epoch == cfg.epochs * 17 / 20 + 1) {
      step_cfg.learning_rate *= cfg.lr_decay_factor;
    }
    shuffle_rng.shuffle(order);
    double epoch_sum = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      batch.clear();
      const std::size_t hi = std::min(order.size(), at + cfg.batch_size);
      for (std::size_t i = at; i < hi; ++i) batch.push_back(train_set[order[i]]);
      const LossValue loss =
          gradients(w, batch, kind, grad, cfg.threads);
      if (!std::isfinite(loss.sum)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                                std::to_string(epoch),
                            epoch);
      }
      epoch_sum += loss.sum;
      epoch_count += loss.count;
      // Optimize the batch mean: same minimizer as the summed loss, but the
      // step size stays comparable across batch sizes.
      const double inv = 1.0 / static_cast<double>(loss.count);
      for (auto& g : grad) g *= inv;
      detail::clip_global_norm(grad, cfg.grad_clip_norm);
      adam.update(w.params, grad, step_cfg);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_sum / static_cast<double>(epoch_count);
    log.val_loss =
        val_set.empty()
            ? log.train_loss
            : (kind == LossKind::kSquaredError
                   ? loss_deterministic(w, val_set, cfg.threads).mean
                   : loss_nll(w, val_set, cfg.threads).mean);
    if (!std::isfinite(log.val_loss)) {
      throw TrainingError("validation loss non-finite at epoch " +
                              std::to_string(epoch),
                          epoch);
    }
    result.log.push_back(log);
    if (log.val_loss < result.best_val_loss) {
      result.best_val_loss = log.val_loss;
      result.best_epoch = epoch;
      result.weights = w;
    }
  }
  return result;
}

/// Trains from snippets with an explicit validation set. The scaler is fitted
/// on the training snippets and stored with the weights.
inline TrainResult train(std::span<const Snippet> train_snippets,
                         std::span<const Snippet> val_snippets,
                         const PolicyArchitecture& arch,
                         const TrainConfig& cfg) {
  if (train_snippets.empty()) throw ConfigError("train: no training snippets");
  ModelWeights w = ModelWeights::build(arch);
  w.scaler = fit_scaler(train_snippets);
  w.init(cfg.seed);
  const auto train_set = make_training_samples(train_snippets, arch.mode, w.scaler);
  const auto val_set = make_training_samples(val_snippets, arch.mode, w.scaler);
  return train_on_samples(train_set, val_set, std::move(w), cfg);
}

/// Trains from a single dataset, holding out `validation_fraction` of the
/// snippets (deterministic seeded pick) for epoch selection.
inline TrainResult train(std::span<const Snippet> dataset,
                         const PolicyArchitecture& arch,
                         const TrainConfig& cfg) {
  if (dataset.empty()) throw ConfigError("train: empty dataset");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(Rng::mix(cfg.seed, 0x5911));
  rng.shuffle(order);
  const auto n_val =
      static_cast<std::size_t>(cfg.validation_fraction * dataset.size());
  std::vector<Snippet> val, tr;
  val.reserve(n_val);
  tr.reserve(dataset.size() - n_val);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : tr).push_back(dataset[order[i]]);
  }
  return train(tr, val, arch, cfg);
}

}  // namespace tlf
