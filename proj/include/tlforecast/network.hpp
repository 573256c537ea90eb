#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tlforecast/context.hpp"
#include "tlforecast/errors.hpp"
#include "tlforecast/rng.hpp"
#include "tlforecast/scaler.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

enum class HeadKind { kDeterministic, kMixture };

/// Shape of one policy model: a double-stacked gated recurrent encoder over
/// the host-vehicle history, whose final hidden state is concatenated with
/// the encoded context and fed to a small output network. The head is either
/// a scalar acceleration regressor or a Gaussian-mixture parameter head.
struct PolicyArchitecture {
  int input_size = 2;  // per-step history features: distance-to-light, speed
  int context_size = kContextDim;
  int hidden_size = 32;
  int num_layers = 2;  // contract: exactly two stacked recurrent layers
  HeadKind head = HeadKind::kDeterministic;
  std::vector<int> head_hidden = {32, 16};
  int mixture_components = 2;
  int n_tau = 11;  // history steps (tau / dt + 1)
  AblationMode mode = AblationMode::kAll;

  int head_input() const { return hidden_size + context_size; }
  int head_output() const {
    return head == HeadKind::kDeterministic ? 1 : 3 * mixture_components;
  }
  std::vector<int> head_dims() const {
    std::vector<int> dims{head_input()};
    dims.insert(dims.end(), head_hidden.begin(), head_hidden.end());
    dims.push_back(head_output());
    return dims;
  }

  void validate() const {
    if (num_layers != 2) throw ConfigError("architecture: encoder is double-stacked (2 layers)");
    if (hidden_size < 1 || n_tau < 1 || input_size < 1) {
      throw ConfigError("architecture: sizes must be positive");
    }
    if (head == HeadKind::kMixture && mixture_components < 1) {
      throw ConfigError("architecture: mixture needs >= 1 component");
    }
  }
};

struct ParamSection {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;  // 0 marks a bias vector

  std::size_t size() const {
    return static_cast<std::size_t>(rows) * std::max(cols, 1);
  }
};

/// All trainable parameters of one architecture, flattened into a single
/// vector with a named-section index, plus the feature scaler and ablation
/// mode the model was trained with.
struct ModelWeights {
  PolicyArchitecture arch;
  FeatureScaler scaler;
  std::vector<ParamSection> sections;
  std::vector<double> params;

  static ModelWeights build(const PolicyArchitecture& arch) {
    arch.validate();
    ModelWeights w;
    w.arch = arch;
    std::size_t offset = 0;
    auto add = [&](std::string name, int rows, int cols) {
      w.sections.push_back({std::move(name), offset, rows, cols});
      offset += w.sections.back().size();
    };
    const int h = arch.hidden_size;
    for (int l = 0; l < arch.num_layers; ++l) {
      const int in = l == 0 ? arch.input_size : h;
      const std::string tag = "lstm" + std::to_string(l);
      add(tag + ".W", 4 * h, in);
      add(tag + ".U", 4 * h, h);
      add(tag + ".b", 4 * h, 0);
    }
    const auto dims = arch.head_dims();
    for (std::size_t j = 0; j + 1 < dims.size(); ++j) {
      const std::string tag = "head" + std::to_string(j);
      add(tag + ".W", dims[j + 1], dims[j]);
      add(tag + ".b", dims[j + 1], 0);
    }
    w.params.assign(offset, 0.0);
    return w;
  }

  /// Uniform +-1/sqrt(fan_in) matrices, zero biases.
  void init(std::uint64_t seed) {
    Rng rng(Rng::mix(seed, 0xb0075));
    for (const auto& sec : sections) {
      if (sec.cols == 0) continue;
      const double bound = 1.0 / std::sqrt(static_cast<double>(sec.cols));
      for (std::size_t i = 0; i < sec.size(); ++i) {
        params[sec.offset + i] = rng.uniform(-bound, bound);
      }
    }
  }

  std::span<double> section(std::string_view name) {
    for (const auto& sec : sections) {
      if (sec.name == name) return {params.data() + sec.offset, sec.size()};
    }
    throw DomainError("unknown parameter section: " + std::string(name));
  }

  std::span<const double> section(std::string_view name) const {
    for (const auto& sec : sections) {
      if (sec.name == name) return {params.data() + sec.offset, sec.size()};
    }
    throw DomainError("unknown parameter section: " + std::string(name));
  }

  bool finite() const {
    return std::all_of(params.begin(), params.end(),
                       [](double x) { return std::isfinite(x); });
  }
};

/// Gaussian-mixture head output: weights on the simplex, means and positive
/// variances (one-dimensional components).
struct MixtureParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  /// log p(a) via log-sum-exp over components.
  double log_density(double a) const {
    double best = -1e300;
    std::vector<double> terms(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double d = a - means[k];
      terms[k] = std::log(weights[k]) -
                 0.5 * std::log(2.0 * std::numbers::pi * variances[k]) -
                 d * d / (2.0 * variances[k]);
      best = std::max(best, terms[k]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
  }
};

namespace detail {

inline constexpr double kVarFloor = 1e-6;
inline constexpr double kVarCeil = 1e4;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Resolved section offsets for the fixed architecture; avoids name lookups
/// in inner loops.
struct Layout {
  int h = 0;
  std::vector<int> lstm_in;
  std::vector<std::size_t> lstm_w, lstm_u, lstm_b;
  std::vector<int> head_dims;
  std::vector<std::size_t> head_w, head_b;

  explicit Layout(const ModelWeights& w) {
    const auto& arch = w.arch;
    h = arch.hidden_size;
    std::size_t idx = 0;
    for (int l = 0; l < arch.num_layers; ++l) {
      lstm_in.push_back(l == 0 ? arch.input_size : h);
      lstm_w.push_back(w.sections[idx++].offset);
      lstm_u.push_back(w.sections[idx++].offset);
      lstm_b.push_back(w.sections[idx++].offset);
    }
    head_dims = arch.head_dims();
    for (std::size_t j = 0; j + 1 < head_dims.size(); ++j) {
      head_w.push_back(w.sections[idx++].offset);
      head_b.push_back(w.sections[idx++].offset);
    }
  }
};

struct LstmLayerTrace {
  std::vector<double> x;                       // n_tau * in
  std::vector<double> i, f, g, o, c, tc, hh;   // n_tau * h each
};

struct ForwardTrace {
  std::vector<LstmLayerTrace> layers;
  std::vector<std::vector<double>> head_act;  // act[0] = [h_top, ctx]
  std::vector<double> out;
};

/// y += M x with M stored row-major (rows x cols).
inline void matvec_acc(const double* m, const double* x, double* y, int rows,
                       int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = m + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

/// y += M^T d.
inline void matvec_t_acc(const double* m, const double* d, double* y, int rows,
                         int cols) {
  for (int r = 0; r < rows; ++r) {
    const double dr = d[r];
    if (dr == 0.0) continue;
    const double* row = m + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) y[c] += dr * row[c];
  }
}

/// G += d x^T (outer product accumulate).
inline void outer_acc(double* g, const double* d, const double* x, int rows,
                      int cols) {
  for (int r = 0; r < rows; ++r) {
    const double dr = d[r];
    if (dr == 0.0) continue;
    double* row = g + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) row[c] += dr * x[c];
  }
}

inline void forward_core(const ModelWeights& w, const Layout& lay,
                         std::span<const double> hist,
                         std::span<const double> ctx, ForwardTrace& tr) {
  const auto& arch = w.arch;
  const int h = lay.h;
  const int n_tau = arch.n_tau;
  const double* p = w.params.data();

  tr.layers.resize(arch.num_layers);
  for (int l = 0; l < arch.num_layers; ++l) {
    auto& trace = tr.layers[l];
    const int in = lay.lstm_in[l];
    trace.x.assign(static_cast<std::size_t>(n_tau) * in, 0.0);
    if (l == 0) {
      std::copy(hist.begin(), hist.end(), trace.x.begin());
    } else {
      std::copy(tr.layers[l - 1].hh.begin(), tr.layers[l - 1].hh.end(),
                trace.x.begin());
    }
    const std::size_t nh = static_cast<std::size_t>(n_tau) * h;
    trace.i.assign(nh, 0.0);
    trace.f.assign(nh, 0.0);
    trace.g.assign(nh, 0.0);
    trace.o.assign(nh, 0.0);
    trace.c.assign(nh, 0.0);
    trace.tc.assign(nh, 0.0);
    trace.hh.assign(nh, 0.0);

    std::vector<double> pre(4 * h);
    for (int t = 0; t < n_tau; ++t) {
      const double* xt = trace.x.data() + static_cast<std::size_t>(t) * in;
      const double* hprev =
          t > 0 ? trace.hh.data() + static_cast<std::size_t>(t - 1) * h : nullptr;
      const double* cprev =
          t > 0 ? trace.c.data() + static_cast<std::size_t>(t - 1) * h : nullptr;
      for (int r = 0; r < 4 * h; ++r) pre[r] = p[lay.lstm_b[l] + r];
      matvec_acc(p + lay.lstm_w[l], xt, pre.data(), 4 * h, in);
      if (hprev) matvec_acc(p + lay.lstm_u[l], hprev, pre.data(), 4 * h, h);

      const std::size_t at = static_cast<std::size_t>(t) * h;
      for (int j = 0; j < h; ++j) {
        const double iv = sigmoid(pre[j]);
        const double fv = sigmoid(pre[h + j]);
        const double gv = std::tanh(pre[2 * h + j]);
        const double ov = sigmoid(pre[3 * h + j]);
        const double cv = iv * gv + (cprev ? fv * cprev[j] : 0.0);
        const double tcv = std::tanh(cv);
        trace.i[at + j] = iv;
        trace.f[at + j] = fv;
        trace.g[at + j] = gv;
        trace.o[at + j] = ov;
        trace.c[at + j] = cv;
        trace.tc[at + j] = tcv;
        trace.hh[at + j] = ov * tcv;
      }
    }
  }

  // Head over [final hidden of top layer, encoded context].
  const auto& top = tr.layers[arch.num_layers - 1];
  tr.head_act.assign(lay.head_dims.size(), {});
  auto& a0 = tr.head_act[0];
  a0.assign(lay.head_dims[0], 0.0);
  std::copy(top.hh.end() - h, top.hh.end(), a0.begin());
  std::copy(ctx.begin(), ctx.end(), a0.begin() + h);
  const std::size_t nlayers = lay.head_w.size();
  for (std::size_t j = 0; j < nlayers; ++j) {
    const int rows = lay.head_dims[j + 1];
    const int cols = lay.head_dims[j];
    auto& aj = tr.head_act[j + 1];
    aj.assign(rows, 0.0);
    for (int r = 0; r < rows; ++r) aj[r] = p[lay.head_b[j] + r];
    matvec_acc(p + lay.head_w[j], tr.head_act[j].data(), aj.data(), rows, cols);
    if (j + 1 < nlayers) {
      for (auto& v : aj) v = std::tanh(v);
    }
  }
  tr.out = tr.head_act.back();
}

/// Backpropagation from d(loss)/d(raw head outputs) through the head and
/// through time over both recurrent layers. Accumulates into `grad` (flat,
/// same layout as the parameter vector).
inline void backward_core(const ModelWeights& w, const Layout& lay,
                          const ForwardTrace& tr, std::span<const double> dout,
                          std::span<double> grad) {
  const auto& arch = w.arch;
  const int h = lay.h;
  const int n_tau = arch.n_tau;
  const double* p = w.params.data();
  double* gp = grad.data();

  // Head.
  const std::size_t nlayers = lay.head_w.size();
  std::vector<double> dact(dout.begin(), dout.end());
  for (std::size_t jj = nlayers; jj-- > 0;) {
    const int rows = lay.head_dims[jj + 1];
    const int cols = lay.head_dims[jj];
    std::vector<double> dpre(dact);
    if (jj + 1 < nlayers) {
      const auto& aout = tr.head_act[jj + 1];
      for (int r = 0; r < rows; ++r) dpre[r] *= 1.0 - aout[r] * aout[r];
    }
    outer_acc(gp + lay.head_w[jj], dpre.data(), tr.head_act[jj].data(), rows,
              cols);
    for (int r = 0; r < rows; ++r) gp[lay.head_b[jj] + r] += dpre[r];
    dact.assign(cols, 0.0);
    matvec_t_acc(p + lay.head_w[jj], dpre.data(), dact.data(), rows, cols);
  }

  // Recurrent stack, backward in time; the top layer is processed first at
  // each step so its input gradient can flow into the layer below at the
  // same timestep.
  const int L = arch.num_layers;
  std::vector<std::vector<double>> dh_carry(L, std::vector<double>(h, 0.0));
  std::vector<std::vector<double>> dc_carry(L, std::vector<double>(h, 0.0));
  std::vector<double> dx_below(static_cast<std::size_t>(h), 0.0);
  std::vector<double> dpre(4 * h);

  for (int t = n_tau - 1; t >= 0; --t) {
    for (int l = L - 1; l >= 0; --l) {
      const auto& trl = tr.layers[l];
      const int in = lay.lstm_in[l];
      const std::size_t at = static_cast<std::size_t>(t) * h;
      std::vector<double>& dh = dh_carry[l];
      if (l == L - 1 && t == n_tau - 1) {
        for (int j = 0; j < h; ++j) dh[j] += dact[j];
      }
      if (l < L - 1) {
        for (int j = 0; j < h; ++j) dh[j] += dx_below[j];
      }

      const double* cprev =
          t > 0 ? trl.c.data() + static_cast<std::size_t>(t - 1) * h : nullptr;
      for (int j = 0; j < h; ++j) {
        const double iv = trl.i[at + j];
        const double fv = trl.f[at + j];
        const double gv = trl.g[at + j];
        const double ov = trl.o[at + j];
        const double tcv = trl.tc[at + j];
        const double dc =
            dh[j] * ov * (1.0 - tcv * tcv) + dc_carry[l][j];
        const double do_ = dh[j] * tcv;
        dpre[j] = dc * gv * iv * (1.0 - iv);                        // input gate
        dpre[h + j] = (cprev ? dc * cprev[j] : 0.0) * fv * (1.0 - fv);  // forget
        dpre[2 * h + j] = dc * iv * (1.0 - gv * gv);                // candidate
        dpre[3 * h + j] = do_ * ov * (1.0 - ov);                    // output gate
        dc_carry[l][j] = dc * fv;
      }

      const double* xt = trl.x.data() + static_cast<std::size_t>(t) * in;
      outer_acc(gp + lay.lstm_w[l], dpre.data(), xt, 4 * h, in);
      for (int r = 0; r < 4 * h; ++r) gp[lay.lstm_b[l] + r] += dpre[r];
      if (t > 0) {
        const double* hprev = trl.hh.data() + static_cast<std::size_t>(t - 1) * h;
        outer_acc(gp + lay.lstm_u[l], dpre.data(), hprev, 4 * h, h);
      }

      std::fill(dh.begin(), dh.end(), 0.0);
      if (t > 0) matvec_t_acc(p + lay.lstm_u[l], dpre.data(), dh.data(), 4 * h, h);
      if (l > 0) {
        std::fill(dx_below.begin(), dx_below.end(), 0.0);
        matvec_t_acc(p + lay.lstm_w[l], dpre.data(), dx_below.data(), 4 * h, in);
      }
    }
  }
}

inline MixtureParams mixture_from_raw(std::span<const double> raw, int n) {
  MixtureParams z;
  z.weights.resize(n);
  z.means.resize(n);
  z.variances.resize(n);
  double mx = raw[0];
  for (int k = 1; k < n; ++k) mx = std::max(mx, raw[k]);
  double denom = 0.0;
  for (int k = 0; k < n; ++k) denom += std::exp(raw[k] - mx);
  for (int k = 0; k < n; ++k) {
    z.weights[k] = std::exp(raw[k] - mx) / denom;
    z.means[k] = raw[n + k];
    z.variances[k] = std::clamp(std::exp(raw[2 * n + k]), kVarFloor, kVarCeil);
  }
  return z;
}

}  // namespace detail

/// Per-step history features at the network boundary: scaled distance to the
/// stop bar and scaled speed, oldest step first.
inline std::vector<double> build_history_input(const ModelWeights& w,
                                               std::span<const VehicleKinState> hist,
                                               double tl_position) {
  if (static_cast<int>(hist.size()) != w.arch.n_tau) {
    throw DomainError("history length does not match the model's n_tau");
  }
  std::vector<double> x;
  x.reserve(hist.size() * 2);
  for (const auto& st : hist) {
    x.push_back(w.scaler.scale_one(FeatureId::kDistToLight,
                                   distance_to_light(st, tl_position)));
    x.push_back(w.scaler.scale_one(FeatureId::kSpeed, st.v));
  }
  return x;
}

/// Most-probable-action policy: returns the next longitudinal acceleration.
/// The context is re-masked for the model's ablation mode, so inputs the
/// variant must not observe cannot influence the result.
inline double forward_deterministic(const ModelWeights& w,
                                    std::span<const VehicleKinState> hist,
                                    double tl_position,
                                    const ContextVector& ctx) {
  if (w.arch.head != HeadKind::kDeterministic) {
    throw DomainError("forward_deterministic: model has a mixture head");
  }
  const auto x = build_history_input(w, hist, tl_position);
  const auto c = encode_context(mask_context(ctx, w.arch.mode), w.scaler);
  detail::Layout lay(w);
  detail::ForwardTrace tr;
  detail::forward_core(w, lay, x, c, tr);
  return tr.out[0];
}

/// Generative policy head: Gaussian-mixture parameters for the next action.
inline MixtureParams forward_probabilistic(const ModelWeights& w,
                                           std::span<const VehicleKinState> hist,
                                           double tl_position,
                                           const ContextVector& ctx) {
  if (w.arch.head != HeadKind::kMixture) {
    throw DomainError("forward_probabilistic: model has a deterministic head");
  }
  const auto x = build_history_input(w, hist, tl_position);
  const auto c = encode_context(mask_context(ctx, w.arch.mode), w.scaler);
  detail::Layout lay(w);
  detail::ForwardTrace tr;
  detail::forward_core(w, lay, x, c, tr);
  return detail::mixture_from_raw(tr.out, w.arch.mixture_components);
}

/// Draws one acceleration: categorical over the mixture weights, then a
/// Gaussian draw from the chosen component.
inline double sample_action(const MixtureParams& z, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t pick = z.weights.size() - 1;
  for (std::size_t k = 0; k < z.weights.size(); ++k) {
    cum += z.weights[k];
    if (u < cum) {
      pick = k;
      break;
    }
  }
  return z.means[pick] + std::sqrt(z.variances[pick]) * rng.normal();
}

}  // namespace tlf
