#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tlforecast/pipeline.hpp"
#include "tlforecast/tlforecast.hpp"
#include "tlforecast/weights_io.hpp"

namespace tlf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

inline bool verbose() {
  const char* v = std::getenv("TLF_VERBOSE");
  return v != nullptr && v[0] != '\0' && v[0] != '0';
}

inline void info(const std::string& msg) {
  if (verbose()) std::cerr << "[tlforecast] " << msg << "\n";
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("failed writing: " + path);
}

struct GenerateArgs {
  std::string out_dir;
  GeneratorConfig cfg;
};

inline int cmd_generate(const GenerateArgs& args) {
  args.cfg.validate();
  std::filesystem::create_directories(args.out_dir);
  info("generating " + std::to_string(args.cfg.episodes) + " episodes");
  const auto corpus = generate_corpus(args.cfg, 2);
  write_corpus(corpus, args.out_dir + "/corpus.csv");
  write_text(args.out_dir + "/generator.cfg", serialize_generator_config(args.cfg));
  write_text(args.out_dir + "/manifest.txt",
             format_manifest(args.cfg, corpus, 2.0, 5.0, 15.0, 5));
  info("wrote corpus to " + args.out_dir);
  return kExitOk;
}

struct TrainArgs {
  std::string corpus_path;
  std::string out_path;
  std::string log_path;
  std::string mode = "all";
  std::string head = "det";
  int components = 2;
  int hidden = 32;
  SnippetPlan plan;
  TrainConfig cfg;
};

inline int cmd_train(const TrainArgs& args) {
  if (args.head != "det" && args.head != "mdn") {
    throw ConfigError("train: head must be det or mdn");
  }
  const AblationMode mode = ablation_mode_from_name(args.mode);
  info("reading corpus " + args.corpus_path);
  const auto corpus = read_corpus(args.corpus_path);
  if (corpus.empty()) throw ConfigError("train: corpus has no episodes");
  const auto prep = prepare_corpus(corpus, args.plan, corpus.front().dt);
  if (prep.train.empty()) throw ConfigError("train: no training snippets");

  PolicyArchitecture arch;
  arch.mode = mode;
  arch.hidden_size = args.hidden;
  arch.head = args.head == "det" ? HeadKind::kDeterministic : HeadKind::kMixture;
  arch.mixture_components = args.components;
  arch.n_tau = static_cast<int>(std::llround(args.plan.tau / corpus.front().dt)) + 1;

  info("training on " + std::to_string(prep.train.size()) + " snippets");
  const TrainResult result = train(prep.train, prep.val, arch, args.cfg);
  save_weights(result.weights, args.out_path);
  if (!args.log_path.empty()) {
    write_text(args.log_path, format_training_log(result));
  }
  info("best validation loss " + std::to_string(result.best_val_loss) +
       " at epoch " + std::to_string(result.best_epoch));
  return kExitOk;
}

struct ForecastArgs {
  std::string weights_path;
  std::string fv_weights_path;
  std::string corpus_path;
  std::string snippet_path;
  std::string out_path;
  std::uint64_t episode_id = 0;
  double anchor = 2.0;   // time of history end within the episode
  double horizon = 5.0;
  double tau = 2.0;
  int samples = 0;       // 0 -> deterministic forecast
  std::uint64_t seed = 1;
  std::string fv = "auto";  // none|forecast|oracle|auto
  bool density = false;
  int smooth_window = 11;
  int smooth_degree = 2;
};

inline Snippet load_snippet(const ForecastArgs& args, double& dt) {
  if (!args.snippet_path.empty()) {
    std::ifstream in(args.snippet_path);
    if (!in) throw ConfigError("cannot open snippet file: " + args.snippet_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("snippet file: ") + e.what());
    }
    Snippet sn = snippet_from_json(j);
    dt = sn.dt;
    return sn;
  }
  if (args.corpus_path.empty()) {
    throw ConfigError("forecast: need --corpus with --episode, or --snippet");
  }
  const auto corpus = read_corpus(args.corpus_path);
  const Episode* ep = nullptr;
  for (const auto& e : corpus) {
    if (e.id == args.episode_id) ep = &e;
  }
  if (ep == nullptr) {
    throw ConfigError("forecast: episode " + std::to_string(args.episode_id) +
                      " not found in corpus");
  }
  dt = ep->dt;
  Episode cleaned = smooth_episode(*ep, args.smooth_window, args.smooth_degree);
  const auto offset =
      static_cast<std::size_t>(std::llround((args.anchor - args.tau) / dt));
  auto snippets = extract_snippets(cleaned, args.tau, args.horizon, dt, 1);
  if (snippets.empty() || offset >= snippets.size()) {
    throw ConfigError("forecast: anchor/horizon exceed the episode length");
  }
  return snippets[offset];
}

inline int cmd_forecast(const ForecastArgs& args) {
  const ModelWeights w = load_weights(args.weights_path);
  double dt = 0.2;
  const Snippet sn = load_snippet(args, dt);
  const int n_steps = static_cast<int>(std::llround(args.horizon / dt));
  if (n_steps < 1 || n_steps > static_cast<int>(sn.horizon_steps())) {
    throw ConfigError("forecast: horizon exceeds the snippet future");
  }
  const SpatProvider spat = spat_from_snippet(sn);

  std::string fv_kind = args.fv;
  if (fv_kind == "auto") {
    const bool wants_fv = w.arch.mode == AblationMode::kAll ||
                          w.arch.mode == AblationMode::kNoTl;
    fv_kind = wants_fv && !args.fv_weights_path.empty() ? "forecast" : "none";
  }
  std::optional<ModelWeights> fv_model;
  FvSource src = FvSource::none();
  if (fv_kind == "forecast") {
    if (args.fv_weights_path.empty()) {
      throw ConfigError("forecast: --fv forecast requires --fv-weights");
    }
    fv_model = load_weights(args.fv_weights_path);
    src = FvSource::forecast(*fv_model);
  } else if (fv_kind == "oracle") {
    src = FvSource::oracle();
  } else if (fv_kind != "none") {
    throw ConfigError("forecast: --fv must be none, forecast, oracle or auto");
  }

  std::vector<ForecastTrajectory> trajectories;
  RolloutEnsemble ens;
  if (args.samples > 0) {
    ens = rollout_probabilistic(w, sn, spat, src, dt, n_steps, args.samples,
                                args.seed, 2);
    trajectories = ens.trajectories;
  } else {
    trajectories.push_back(forecast_deterministic(w, sn, spat, src, dt, n_steps));
  }
  write_text(args.out_path,
             format_forecast_file(trajectories, dt, args.seed,
                                  ablation_mode_name(w.arch.mode),
                                  trajectories.size()));

  if (args.density) {
    if (args.samples < 2) {
      throw ConfigError("forecast: --density needs --samples >= 2");
    }
    std::ostringstream out;
    out << "step,t,variable,x,density\n";
    for (int k = 0; k < n_steps; ++k) {
      for (int v = 0; v < 2; ++v) {
        const auto var = v == 0 ? MarginalVariable::kPosition : MarginalVariable::kSpeed;
        const auto d = marginal_density(ens, k, var, std::size_t{201});
        if (d.point_mass) continue;
        for (std::size_t i = 0; i < d.grid.size(); ++i) {
          out << (k + 1) << ',' << tlf::detail::fmt_g17((k + 1) * dt) << ','
              << (v == 0 ? "position" : "speed") << ','
              << tlf::detail::fmt_g17(d.grid[i]) << ','
              << tlf::detail::fmt_g17(d.density[i]) << "\n";
        }
      }
    }
    write_text(args.out_path + ".density.csv", out.str());
  }
  return kExitOk;
}

struct AblateArgs {
  std::string corpus_path;
  std::string weights_all, weights_nofv, weights_notl, weights_nofvtl;
  std::string out_dir;
  SnippetPlan plan;
  int threads = 2;
};

inline int cmd_ablate(const AblateArgs& args) {
  const ModelWeights all = load_weights(args.weights_all);
  const ModelWeights nofv = load_weights(args.weights_nofv);
  const ModelWeights notl = load_weights(args.weights_notl);
  const ModelWeights nofvtl = load_weights(args.weights_nofvtl);
  AblationModels models{&all, &nofv, &notl, &nofvtl};
  models.validate();

  const auto corpus = read_corpus(args.corpus_path);
  if (corpus.empty()) throw ConfigError("ablate: corpus has no episodes");
  const double dt = corpus.front().dt;
  const auto prep = prepare_corpus(corpus, args.plan, dt);
  if (prep.test.empty()) throw ConfigError("ablate: no evaluation snippets");
  info("evaluating " + std::to_string(prep.test.size()) + " snippets x 4 modes");

  const AblationReport report = run_ablation(models, prep.test, dt, args.threads);
  std::filesystem::create_directories(args.out_dir);
  emit_report(report, ReportFormat::kDelimitedTable, args.out_dir + "/report.csv");
  emit_report(report, ReportFormat::kStructuredText, args.out_dir + "/report.json");
  write_text(args.out_dir + "/ledger.csv", format_snippet_ledger(report));
  return kExitOk;
}

inline void add_plan_flags(CLI::App* cmd, SnippetPlan& plan) {
  cmd->add_option("--tau", plan.tau, "history window length (s)");
  cmd->add_option("--horizon", plan.horizon, "prediction window (s)");
  cmd->add_option("--long-horizon", plan.long_horizon,
                  "prediction window for the full-sweep scenario (s)");
  cmd->add_option("--train-stride", plan.train_stride, "training window stride (steps)");
  cmd->add_option("--eval-stride", plan.eval_stride, "evaluation window stride (steps)");
  cmd->add_option("--max-train-snippets", plan.max_train_snippets, "cap on training snippets");
  cmd->add_option("--max-per-scenario", plan.max_eval_per_scenario,
                  "cap on evaluation snippets per scenario");
  cmd->add_option("--smooth-window", plan.smooth_window, "smoothing window (odd steps)");
  cmd->add_option("--smooth-degree", plan.smooth_degree, "smoothing polynomial degree");
  cmd->add_option("--train-d-min", plan.train_d_min,
                  "training corridor: min anchor distance to the bar (m)");
  cmd->add_option("--train-d-max", plan.train_d_max,
                  "training corridor: max anchor distance to the bar (m)");
  cmd->add_option("--eval-d-min", plan.eval_d_min,
                  "evaluation corridor: min anchor distance to the bar (m)");
  cmd->add_option("--eval-d-max", plan.eval_d_max,
                  "evaluation corridor: max anchor distance to the bar (m)");
}

}  // namespace detail

/// Entry point shared by the binary and the test suite.
inline int run(std::vector<std::string> args) {
  CLI::App app{"synthetic human-policy trajectory forecasting near traffic lights"};
  app.require_subcommand(1);

  detail::GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate", "simulate a synthetic corpus");
  cmd_gen->set_config("--config");
  cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
  cmd_gen->add_option("--episodes", gen.cfg.episodes, "episode count");
  cmd_gen->add_option("--seed", gen.cfg.seed, "master seed");
  cmd_gen->add_option("--dt", gen.cfg.dt, "sample period (s)");
  cmd_gen->add_option("--duration", gen.cfg.duration, "episode length (s)");
  cmd_gen->add_option("--fv-probability", gen.cfg.fv_probability,
                      "probability an episode has a front vehicle");
  cmd_gen->add_option("--dilemma-fraction", gen.cfg.dilemma_fraction,
                      "fraction of episodes staged into the yellow dilemma band");
  cmd_gen->add_option("--position-noise", gen.cfg.position_noise_std,
                      "logged position noise std (m)");
  cmd_gen->add_option("--speed-noise", gen.cfg.speed_noise_std,
                      "logged speed noise std (m/s)");
  cmd_gen->add_option("--accel-noise", gen.cfg.accel_noise_std,
                      "logged accel noise std (m/s^2)");
  cmd_gen->add_option("--yellow-pass-min", gen.cfg.yellow_pass_min,
                      "lower bound of the pass propensity draw");
  cmd_gen->add_option("--yellow-pass-max", gen.cfg.yellow_pass_max,
                      "upper bound of the pass propensity draw");

  detail::TrainArgs tr;
  auto* cmd_tr = app.add_subcommand("train", "train one policy variant");
  cmd_tr->set_config("--config");
  cmd_tr->add_option("--corpus", tr.corpus_path, "corpus csv")->required();
  cmd_tr->add_option("--out", tr.out_path, "weight file to write")->required();
  cmd_tr->add_option("--log", tr.log_path, "training log to write");
  cmd_tr->add_option("--mode", tr.mode, "all|nofv|notl|nofvtl");
  cmd_tr->add_option("--head", tr.head, "det|mdn");
  cmd_tr->add_option("--components", tr.components, "mixture components");
  cmd_tr->add_option("--hidden", tr.hidden, "recurrent hidden size");
  cmd_tr->add_option("--epochs", tr.cfg.epochs, "training epochs");
  cmd_tr->add_option("--batch", tr.cfg.batch_size, "batch size");
  cmd_tr->add_option("--lr", tr.cfg.learning_rate, "learning rate");
  cmd_tr->add_option("--seed", tr.cfg.seed, "training seed");
  cmd_tr->add_option("--threads", tr.cfg.threads, "gradient worker threads");
  detail::add_plan_flags(cmd_tr, tr.plan);

  detail::ForecastArgs fc;
  auto* cmd_fc = app.add_subcommand("forecast", "forecast one snippet");
  cmd_fc->set_config("--config");
  cmd_fc->add_option("--weights", fc.weights_path, "policy weight file")->required();
  cmd_fc->add_option("--fv-weights", fc.fv_weights_path,
                     "nofv policy for front-vehicle sub-forecasts");
  cmd_fc->add_option("--corpus", fc.corpus_path, "corpus csv");
  cmd_fc->add_option("--episode", fc.episode_id, "episode id within the corpus");
  cmd_fc->add_option("--anchor", fc.anchor, "history end time within the episode (s)");
  cmd_fc->add_option("--snippet", fc.snippet_path, "standalone snippet json");
  cmd_fc->add_option("--horizon", fc.horizon, "prediction window (s)");
  cmd_fc->add_option("--tau", fc.tau, "history window (s)");
  cmd_fc->add_option("--samples", fc.samples,
                     "rollout count; 0 gives the deterministic forecast");
  cmd_fc->add_option("--seed", fc.seed, "rollout seed");
  cmd_fc->add_option("--fv", fc.fv, "none|forecast|oracle|auto");
  cmd_fc->add_flag("--density", fc.density, "emit per-step density grids");
  cmd_fc->add_option("--out", fc.out_path, "forecast file to write")->required();

  detail::AblateArgs ab;
  auto* cmd_ab = app.add_subcommand("ablate", "run the four-variant comparison");
  cmd_ab->set_config("--config");
  cmd_ab->add_option("--corpus", ab.corpus_path, "corpus csv")->required();
  cmd_ab->add_option("--weights-all", ab.weights_all, "all-context weights")->required();
  cmd_ab->add_option("--weights-nofv", ab.weights_nofv, "nofv weights")->required();
  cmd_ab->add_option("--weights-notl", ab.weights_notl, "notl weights")->required();
  cmd_ab->add_option("--weights-nofvtl", ab.weights_nofvtl, "nofvtl weights")->required();
  cmd_ab->add_option("--out", ab.out_dir, "report directory")->required();
  cmd_ab->add_option("--threads", ab.threads, "evaluation threads");
  detail::add_plan_flags(cmd_ab, ab.plan);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (cmd_gen->parsed()) return detail::cmd_generate(gen);
    if (cmd_tr->parsed()) return detail::cmd_train(tr);
    if (cmd_fc->parsed()) return detail::cmd_forecast(fc);
    if (cmd_ab->parsed()) return detail::cmd_ablate(ab);
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace tlf::cli
