#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlforecast/ablation.hpp"
#include "tlforecast/corpus.hpp"
#include "tlforecast/train.hpp"

namespace tlf {

/// How episodes become snippet sets: smoothing, horizons, strides, caps and
/// the near-intersection corridor. Windows anchored far past the stop bar
/// describe free driving the signal no longer influences; the corridor keeps
/// the sets focused on the forecasting problem.
struct SnippetPlan {
  double tau = 2.0;
  double horizon = 5.0;        // prediction window for every scenario but GYR
  double long_horizon = 15.0;  // prediction window for GYR
  std::size_t train_stride = 5;
  std::size_t eval_stride = 5;
  std::size_t max_train_snippets = 12000;
  std::size_t max_val_snippets = 2500;
  std::size_t max_eval_per_scenario = 400;
  int smooth_window = 11;
  int smooth_degree = 2;
  // Accepted anchor-time distance to the stop bar (m), training and eval.
  double train_d_min = -60.0;
  double train_d_max = 160.0;
  double eval_d_min = -10.0;
  double eval_d_max = 120.0;
};

/// Deterministic even-spaced subsample down to `max` elements.
template <typename T>
void subsample_evenly(std::vector<T>& xs, std::size_t max) {
  if (max == 0 || xs.size() <= max) return;
  std::vector<T> kept;
  kept.reserve(max);
  const double step = static_cast<double>(xs.size()) / static_cast<double>(max);
  for (std::size_t i = 0; i < max; ++i) {
    kept.push_back(std::move(xs[static_cast<std::size_t>(i * step)]));
  }
  xs = std::move(kept);
}

struct PreparedCorpus {
  std::vector<Snippet> train;      // horizon-length, labels != Other
  std::vector<Snippet> val;        // same
  std::vector<Snippet> test;       // eval snippets: short horizons plus GYR at the long horizon
};

namespace detail {

/// Caps are enforced while collecting so large corpora never materialize an
/// unbounded snippet set; 0 disables a cap.
inline void collect_snippets(std::span<const Episode* const> episodes,
                             const SnippetPlan& plan, double dt, double horizon,
                             bool keep_gyr_only, std::size_t stride,
                             double d_min, double d_max,
                             std::size_t per_scenario_cap, std::size_t global_cap,
                             std::vector<Snippet>& out) {
  std::array<std::size_t, kNumScenarioLabels> counts{};
  for (const Episode* ep : episodes) {
    if (global_cap && out.size() >= global_cap) break;
    Episode cleaned = smooth_episode(*ep, plan.smooth_window, plan.smooth_degree);
    for (auto& sn : extract_snippets(cleaned, plan.tau, horizon, dt, stride)) {
      if (sn.scenario == ScenarioLabel::kOther) continue;
      if (keep_gyr_only && sn.scenario != ScenarioLabel::kGYR) continue;
      // The long-horizon set carries GYR alone; the short set gets the rest.
      if (!keep_gyr_only && sn.scenario == ScenarioLabel::kGYR) continue;
      const double d_anchor =
          distance_to_light(sn.hist_states.back(), sn.tl_position);
      if (d_anchor < d_min || d_anchor > d_max) continue;
      auto& count = counts[static_cast<int>(sn.scenario)];
      if (per_scenario_cap && count >= per_scenario_cap) continue;
      if (global_cap && out.size() >= global_cap) break;
      ++count;
      out.push_back(std::move(sn));
    }
  }
}

/// Trims an episode list to roughly what a snippet cap needs, evenly spaced
/// to preserve driver/signal diversity.
inline void trim_episodes_for_cap(std::vector<const Episode*>& episodes,
                                  const SnippetPlan& plan, double dt,
                                  double horizon, std::size_t stride,
                                  std::size_t snippet_cap) {
  if (snippet_cap == 0 || episodes.empty()) return;
  const auto n_tau = static_cast<std::size_t>(std::llround(plan.tau / dt)) + 1;
  const auto n_fut = static_cast<std::size_t>(std::llround(horizon / dt));
  const std::size_t samples = episodes.front()->samples();
  if (samples < n_tau + n_fut) return;
  const std::size_t per_ep = (samples - n_tau - n_fut) / stride + 1;
  // Generous slack: corridor and label filters cut the per-episode yield
  // well below the raw window count. Collection still stops at the cap.
  const auto need = static_cast<std::size_t>(
      4.0 * static_cast<double>(snippet_cap) / static_cast<double>(per_ep) + 2.0);
  std::vector<const Episode*> picked = episodes;
  subsample_evenly(picked, need);
  episodes = std::move(picked);
}

}  // namespace detail

/// Smooths, windows and splits a corpus into train/val/eval snippet sets.
/// The split is by episode id hash (70/15/15), so no sliding window spans
/// two sets. Caps bound both memory and downstream work.
inline PreparedCorpus prepare_corpus(const std::vector<Episode>& corpus,
                                     const SnippetPlan& plan, double dt) {
  CorpusSplit split = split_by_episode(corpus, 0.70, 0.15);
  PreparedCorpus prep;
  detail::trim_episodes_for_cap(split.train, plan, dt, plan.horizon,
                                plan.train_stride, plan.max_train_snippets);
  detail::collect_snippets(split.train, plan, dt, plan.horizon, false,
                           plan.train_stride, plan.train_d_min, plan.train_d_max,
                           0, plan.max_train_snippets, prep.train);
  detail::trim_episodes_for_cap(split.val, plan, dt, plan.horizon,
                                plan.train_stride, plan.max_val_snippets);
  detail::collect_snippets(split.val, plan, dt, plan.horizon, false,
                           plan.train_stride, plan.train_d_min, plan.train_d_max,
                           0, plan.max_val_snippets, prep.val);
  detail::collect_snippets(split.test, plan, dt, plan.horizon, false,
                           plan.eval_stride, plan.eval_d_min, plan.eval_d_max,
                           plan.max_eval_per_scenario, 0, prep.test);
  detail::collect_snippets(split.test, plan, dt, plan.long_horizon, true,
                           plan.eval_stride, plan.eval_d_min, plan.eval_d_max,
                           plan.max_eval_per_scenario, 0, prep.test);
  return prep;
}

/// Plain-text training log, one line per epoch.
inline std::string format_training_log(const TrainResult& result) {
  std::string out = "epoch train_loss val_loss\n";
  for (const auto& e : result.log) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d %.17g %.17g\n", e.epoch, e.train_loss,
                  e.val_loss);
    out += buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "# best_epoch %d\n", result.best_epoch);
  out += buf;
  return out;
}

// --- Snippet JSON interchange (standalone snippet files) ---

inline nlohmann::json snippet_to_json(const Snippet& sn) {
  nlohmann::json j;
  j["dt"] = sn.dt;
  j["tod"] = sn.tod;
  j["tl_position"] = sn.tl_position;
  j["scenario"] = scenario_name(sn.scenario);
  auto ctx_json = [](const ContextVector& ctx) {
    nlohmann::json c;
    if (ctx.fv) c["fv"] = {{"r", ctx.fv->r}, {"r_dot", ctx.fv->r_dot}};
    if (ctx.tl) {
      c["tl"] = {{"phase", std::string(1, phase_char(ctx.tl->phase))},
                 {"timer", ctx.tl->timer}};
    }
    c["tod"] = ctx.tod;
    return c;
  };
  j["history"] = nlohmann::json::array();
  for (std::size_t i = 0; i < sn.hist_states.size(); ++i) {
    j["history"].push_back({{"s", sn.hist_states[i].s},
                            {"v", sn.hist_states[i].v},
                            {"ctx", ctx_json(sn.hist_contexts[i])}});
  }
  j["future"] = nlohmann::json::array();
  for (std::size_t k = 0; k < sn.future_states.size(); ++k) {
    j["future"].push_back({{"s", sn.future_states[k].s},
                           {"v", sn.future_states[k].v},
                           {"a", sn.future_accels[k]},
                           {"ctx", ctx_json(sn.future_contexts[k])}});
  }
  return j;
}

inline Snippet snippet_from_json(const nlohmann::json& j) {
  Snippet sn;
  sn.dt = j.at("dt").get<double>();
  sn.tod = j.at("tod").get<double>();
  sn.tl_position = j.at("tl_position").get<double>();
  sn.scenario = scenario_from_name(j.at("scenario").get<std::string>());
  auto ctx_from = [](const nlohmann::json& c) {
    ContextVector ctx;
    if (c.contains("fv")) {
      ctx.fv = FvRelativeState{c["fv"].at("r").get<double>(),
                               c["fv"].at("r_dot").get<double>()};
    }
    if (c.contains("tl")) {
      ctx.tl = TlSignalState{
          phase_from_char(c["tl"].at("phase").get<std::string>().at(0)),
          c["tl"].at("timer").get<double>()};
    }
    ctx.tod = c.at("tod").get<double>();
    return ctx;
  };
  for (const auto& h : j.at("history")) {
    sn.hist_states.push_back({h.at("s").get<double>(), h.at("v").get<double>()});
    sn.hist_contexts.push_back(ctx_from(h.at("ctx")));
  }
  for (const auto& f : j.at("future")) {
    sn.future_states.push_back({f.at("s").get<double>(), f.at("v").get<double>()});
    sn.future_accels.push_back(f.at("a").get<double>());
    sn.future_contexts.push_back(ctx_from(f.at("ctx")));
  }
  if (sn.hist_states.empty() || sn.future_states.empty()) {
    throw ConfigError("snippet file: empty history or future");
  }
  return sn;
}

/// Plot-ready forecast dump: header comments, then one line per
/// (rollout, step). The density column is empty for deterministic output.
inline std::string format_forecast_file(
    const std::vector<ForecastTrajectory>& trajectories, double dt,
    std::uint64_t seed, const std::string& mode, std::size_t n_samples) {
  std::ostringstream out;
  out << "# seed=" << seed << " mode=" << mode << " samples=" << n_samples
      << " dt=" << detail::fmt_g17(dt) << "\n";
  out << "rollout_id,step,t,s,v,a,step_log_density\n";
  for (std::size_t m = 0; m < trajectories.size(); ++m) {
    const auto& tr = trajectories[m];
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      out << m << ',' << (k + 1) << ','
          << detail::fmt_g17(static_cast<double>(k + 1) * dt) << ','
          << detail::fmt_g17(tr.states[k].s) << ','
          << detail::fmt_g17(tr.states[k].v) << ','
          << detail::fmt_g17(tr.accels[k]) << ',';
      if (!tr.step_log_density.empty()) {
        out << detail::fmt_g17(tr.step_log_density[k]);
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace tlf
