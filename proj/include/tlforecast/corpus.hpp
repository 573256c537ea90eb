#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tlforecast/simulate.hpp"

namespace tlf {

/// Key=value configuration for the synthetic corpus generator. Scalar ranges
/// are sampled per episode from the master seed.
struct GeneratorConfig {
  std::uint64_t episodes = 1000;
  std::uint64_t seed = 1;
  double dt = 0.2;
  double duration = 60.0;

  double g_dur_min = 25.0, g_dur_max = 35.0;
  double y_dur_min = 2.5, y_dur_max = 4.0;
  double r_dur_min = 25.0, r_dur_max = 35.0;

  double fv_probability = 0.5;
  double desired_speed_min = 11.0, desired_speed_max = 17.0;
  double max_accel_min = 1.4, max_accel_max = 2.2;
  double comfortable_decel_min = 2.0, comfortable_decel_max = 3.0;
  double min_gap_min = 2.0, min_gap_max = 3.0;
  double headway_min = 1.0, headway_max = 1.6;
  double reaction_delay_min = 0.2, reaction_delay_max = 0.7;
  double yellow_pass_min = 0.3, yellow_pass_max = 0.7;
  double driver_noise_std = 0.05;

  // Fraction of episodes staged so the yellow onset catches the host inside
  // the dilemma band.
  double dilemma_fraction = 0.1;

  // Measurement noise injected into the logged series.
  double position_noise_std = 0.1;
  double speed_noise_std = 0.1;
  double accel_noise_std = 0.1;

  void validate() const {
    if (episodes < 1) throw ConfigError("generator: episodes must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("generator: dt must be > 0");
    if (!(duration > 0.0)) throw ConfigError("generator: duration must be > 0");
    if (!(y_dur_min >= 0.5 && y_dur_max >= y_dur_min)) {
      throw ConfigError("generator: bad yellow duration range");
    }
    if (!(fv_probability >= 0.0 && fv_probability <= 1.0)) {
      throw ConfigError("generator: fv_probability outside [0,1]");
    }
    if (!(dilemma_fraction >= 0.0 && dilemma_fraction <= 1.0)) {
      throw ConfigError("generator: dilemma_fraction outside [0,1]");
    }
  }
};

namespace detail {

inline const std::vector<std::pair<std::string, double GeneratorConfig::*>>&
generator_fields() {
  static const std::vector<std::pair<std::string, double GeneratorConfig::*>> f = {
      {"dt", &GeneratorConfig::dt},
      {"duration", &GeneratorConfig::duration},
      {"g_dur_min", &GeneratorConfig::g_dur_min},
      {"g_dur_max", &GeneratorConfig::g_dur_max},
      {"y_dur_min", &GeneratorConfig::y_dur_min},
      {"y_dur_max", &GeneratorConfig::y_dur_max},
      {"r_dur_min", &GeneratorConfig::r_dur_min},
      {"r_dur_max", &GeneratorConfig::r_dur_max},
      {"fv_probability", &GeneratorConfig::fv_probability},
      {"desired_speed_min", &GeneratorConfig::desired_speed_min},
      {"desired_speed_max", &GeneratorConfig::desired_speed_max},
      {"max_accel_min", &GeneratorConfig::max_accel_min},
      {"max_accel_max", &GeneratorConfig::max_accel_max},
      {"comfortable_decel_min", &GeneratorConfig::comfortable_decel_min},
      {"comfortable_decel_max", &GeneratorConfig::comfortable_decel_max},
      {"min_gap_min", &GeneratorConfig::min_gap_min},
      {"min_gap_max", &GeneratorConfig::min_gap_max},
      {"headway_min", &GeneratorConfig::headway_min},
      {"headway_max", &GeneratorConfig::headway_max},
      {"reaction_delay_min", &GeneratorConfig::reaction_delay_min},
      {"reaction_delay_max", &GeneratorConfig::reaction_delay_max},
      {"yellow_pass_min", &GeneratorConfig::yellow_pass_min},
      {"yellow_pass_max", &GeneratorConfig::yellow_pass_max},
      {"driver_noise_std", &GeneratorConfig::driver_noise_std},
      {"dilemma_fraction", &GeneratorConfig::dilemma_fraction},
      {"position_noise_std", &GeneratorConfig::position_noise_std},
      {"speed_noise_std", &GeneratorConfig::speed_noise_std},
      {"accel_noise_std", &GeneratorConfig::accel_noise_std},
  };
  return f;
}

inline std::string fmt_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

inline std::string serialize_generator_config(const GeneratorConfig& cfg) {
  std::ostringstream out;
  out << "episodes = " << cfg.episodes << "\n";
  out << "seed = " << cfg.seed << "\n";
  for (const auto& [name, member] : detail::generator_fields()) {
    out << name << " = " << detail::fmt_g17(cfg.*member) << "\n";
  }
  return out.str();
}

inline GeneratorConfig parse_generator_config(std::istream& in) {
  GeneratorConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ConfigError("generator config line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "episodes") {
        cfg.episodes = std::stoull(value);
        continue;
      }
      if (key == "seed") {
        cfg.seed = std::stoull(value);
        continue;
      }
      bool found = false;
      for (const auto& [name, member] : detail::generator_fields()) {
        if (key == name) {
          cfg.*member = std::stod(value);
          found = true;
          break;
        }
      }
      if (!found) throw ConfigError("generator config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw ConfigError("generator config: bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError("generator config: value out of range for '" + key + "'");
    }
  }
  return cfg;
}

inline std::uint64_t generator_config_hash(const GeneratorConfig& cfg) {
  const std::string canon = serialize_generator_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline DriverParams draw_driver(const GeneratorConfig& g, Rng& rng) {
  DriverParams p;
  p.desired_speed = rng.uniform(g.desired_speed_min, g.desired_speed_max);
  p.max_accel = rng.uniform(g.max_accel_min, g.max_accel_max);
  p.comfortable_decel = rng.uniform(g.comfortable_decel_min, g.comfortable_decel_max);
  p.min_gap = rng.uniform(g.min_gap_min, g.min_gap_max);
  p.headway_time = rng.uniform(g.headway_min, g.headway_max);
  p.reaction_delay = rng.uniform(g.reaction_delay_min, g.reaction_delay_max);
  p.yellow_pass_propensity = rng.uniform(g.yellow_pass_min, g.yellow_pass_max);
  p.noise_std = g.driver_noise_std;
  return p;
}

}  // namespace detail

/// Draws and simulates episode `index` of the corpus. Pure in
/// (config, index), so generation parallelizes over indices without affecting
/// the result.
inline Episode generate_episode(const GeneratorConfig& g, std::uint64_t index) {
  Rng rng(Rng::mix(g.seed, index * 2 + 1));

  SignalCycleConfig cfg;
  cfg.g_dur = rng.uniform(g.g_dur_min, g.g_dur_max);
  cfg.y_dur = rng.uniform(g.y_dur_min, g.y_dur_max);
  cfg.r_dur = rng.uniform(g.r_dur_min, g.r_dur_max);
  cfg.cycle_offset = rng.uniform(0.0, cfg.cycle());

  DriverParams hv = detail::draw_driver(g, rng);
  hv.dilemma_band_lo = cfg.y_dur - 1.0;
  hv.dilemma_band_hi = cfg.y_dur + 2.0;
  std::optional<DriverParams> fv;
  const bool dilemma = rng.uniform() < g.dilemma_fraction;
  if (!dilemma && rng.uniform() < g.fv_probability) {
    fv = detail::draw_driver(g, rng);
    fv->dilemma_band_lo = cfg.y_dur - 1.0;
    fv->dilemma_band_hi = cfg.y_dur + 2.0;
  }
  const double tod = rng.uniform(0.0, 24.0);

  std::optional<EpisodeInit> init;
  if (dilemma) {
    // Stage the approach so the yellow onset catches the host with a
    // time-to-stop-bar inside the dilemma band.
    EpisodeInit ei;
    const double v0 = hv.desired_speed * diurnal_speed_factor(tod);
    ei.hv_start_distance = rng.uniform(70.0, 130.0);
    ei.hv_start_speed = v0;
    const double target_tts = rng.uniform(cfg.y_dur - 0.5, cfg.y_dur + 1.5);
    double t_y = ei.hv_start_distance / v0 - target_tts;
    t_y = std::clamp(t_y, 3.0, cfg.g_dur - 0.5);
    cfg.cycle_offset = cfg.g_dur - t_y;
    init = ei;
  }

  Episode ep = simulate_episode(cfg, hv, fv, tod, g.duration, g.dt,
                                Rng::mix(g.seed, index * 2), init);
  ep.id = index;
  return ep;
}

/// The full synthetic corpus, with measurement noise applied to the logged
/// series (the raw simulation is exact; the logs are not).
inline std::vector<Episode> generate_corpus(const GeneratorConfig& g,
                                            int threads = 1) {
  g.validate();
  std::vector<Episode> corpus(g.episodes);
  auto work = [&](std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t i = lo; i < hi; ++i) {
      Episode ep = generate_episode(g, i);
      corpus[i] = add_measurement_noise(ep, g.position_noise_std,
                                        g.speed_noise_std, g.accel_noise_std,
                                        Rng::mix(g.seed, 0x6015e + i));
    }
  };
  const int nthreads = std::max(1, threads);
  if (nthreads == 1 || g.episodes < 2) {
    work(0, g.episodes);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (g.episodes + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
      const std::uint64_t lo = t * chunk;
      const std::uint64_t hi = std::min<std::uint64_t>(g.episodes, lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return corpus;
}

/// Corpus file: one line per timestep with a header row; front-vehicle
/// fields are empty when no front vehicle is present.
inline void write_corpus(const std::vector<Episode>& corpus, std::ostream& out) {
  out << "episode_id,t,s_hv,v_hv,a_hv,s_fv,v_fv,phase,timer,tod\n";
  for (const auto& ep : corpus) {
    for (std::size_t n = 0; n < ep.samples(); ++n) {
      out << ep.id << ',' << detail::fmt_g17(ep.time_at(n)) << ','
          << detail::fmt_g17(ep.hv.s[n]) << ',' << detail::fmt_g17(ep.hv.v[n])
          << ',' << detail::fmt_g17(ep.hv.a[n]) << ',';
      if (ep.fv) {
        out << detail::fmt_g17(ep.fv->s[n]) << ',' << detail::fmt_g17(ep.fv->v[n]);
      } else {
        out << ',';
      }
      out << ',' << phase_char(ep.tl[n].phase) << ','
          << detail::fmt_g17(ep.tl[n].timer) << ',' << detail::fmt_g17(ep.tod)
          << "\n";
    }
  }
}

inline void write_corpus(const std::vector<Episode>& corpus,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open corpus file for writing: " + path);
  write_corpus(corpus, out);
  if (!out) throw ConfigError("failed writing corpus file: " + path);
}

inline std::vector<Episode> read_corpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("corpus file: empty");
  if (line.rfind("episode_id,", 0) != 0) {
    throw ConfigError("corpus file: missing header row");
  }
  std::vector<Episode> corpus;
  Episode* cur = nullptr;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<std::string, 10> f;
    std::size_t field = 0, at = 0;
    while (field < 10) {
      const auto comma = line.find(',', at);
      if (comma == std::string::npos) {
        f[field++] = line.substr(at);
        break;
      }
      f[field++] = line.substr(at, comma - at);
      at = comma + 1;
    }
    if (field != 10) {
      throw ConfigError("corpus file line " + std::to_string(lineno) +
                        ": expected 10 fields");
    }
    try {
      const std::uint64_t id = std::stoull(f[0]);
      if (cur == nullptr || cur->id != id) {
        corpus.emplace_back();
        cur = &corpus.back();
        cur->id = id;
        cur->tod = std::stod(f[9]);
        if (!f[5].empty()) cur->fv.emplace();
      }
      cur->hv.s.push_back(std::stod(f[2]));
      cur->hv.v.push_back(std::stod(f[3]));
      cur->hv.a.push_back(std::stod(f[4]));
      if (cur->fv) {
        if (f[5].empty() || f[6].empty()) {
          throw ConfigError("corpus file line " + std::to_string(lineno) +
                            ": front vehicle vanished mid-episode");
        }
        cur->fv->s.push_back(std::stod(f[5]));
        cur->fv->v.push_back(std::stod(f[6]));
        cur->fv->a.push_back(0.0);  // not logged
      }
      if (f[7].empty()) {
        throw ConfigError("corpus file line " + std::to_string(lineno) +
                          ": missing phase");
      }
      cur->tl.push_back({phase_from_char(f[7][0]), std::stod(f[8])});
      if (cur->samples() == 2) cur->dt = std::stod(f[1]);
    } catch (const std::invalid_argument&) {
      throw ConfigError("corpus file line " + std::to_string(lineno) +
                        ": malformed number");
    } catch (const std::out_of_range&) {
      throw ConfigError("corpus file line " + std::to_string(lineno) +
                        ": number out of range");
    }
  }
  return corpus;
}

inline std::vector<Episode> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus file: " + path);
  return read_corpus(in);
}

/// Episode-level split by seeded id hash, so overlapping windows never leak
/// across train/val/test.
struct CorpusSplit {
  std::vector<const Episode*> train, val, test;
};

inline CorpusSplit split_by_episode(const std::vector<Episode>& corpus,
                                    double train_frac, double val_frac,
                                    std::uint64_t salt = 0x5eed) {
  if (!(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac <= 1.0)) {
    throw ConfigError("split: fractions must satisfy 0 < train, train+val <= 1");
  }
  CorpusSplit split;
  for (const auto& ep : corpus) {
    const double u = static_cast<double>(Rng::mix(ep.id, salt) >> 11) * 0x1.0p-53;
    if (u < train_frac) {
      split.train.push_back(&ep);
    } else if (u < train_frac + val_frac) {
      split.val.push_back(&ep);
    } else {
      split.test.push_back(&ep);
    }
  }
  return split;
}

/// Scenario census over sliding windows; used for the corpus manifest and as
/// an independent recount oracle in tests.
inline std::map<std::string, std::size_t> count_scenarios(
    const std::vector<Episode>& corpus, double tau, double horizon, double dt,
    std::size_t stride) {
  std::map<std::string, std::size_t> counts;
  for (int i = 0; i < kNumScenarioLabels; ++i) {
    counts[scenario_name(static_cast<ScenarioLabel>(i))] = 0;
  }
  for (const auto& ep : corpus) {
    for (const auto& sn : extract_snippets(ep, tau, horizon, dt, stride)) {
      ++counts[scenario_name(sn.scenario)];
    }
  }
  return counts;
}

/// Manifest: seed, config hash and scenario counts, as key=value text.
inline std::string format_manifest(const GeneratorConfig& g,
                                   const std::vector<Episode>& corpus,
                                   double tau, double horizon,
                                   double long_horizon, std::size_t stride) {
  std::ostringstream out;
  out << "episodes = " << corpus.size() << "\n";
  out << "seed = " << g.seed << "\n";
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(generator_config_hash(g)));
  out << "config_hash = " << hash << "\n";
  out << "snippet_stride_steps = " << stride << "\n";
  for (const auto& [name, count] : count_scenarios(corpus, tau, horizon, g.dt, stride)) {
    out << "count_T" << detail::fmt_g17(horizon) << "_" << name << " = "
        << count << "\n";
  }
  for (const auto& [name, count] :
       count_scenarios(corpus, tau, long_horizon, g.dt, stride)) {
    out << "count_T" << detail::fmt_g17(long_horizon) << "_" << name << " = "
        << count << "\n";
  }
  return out.str();
}

}  // namespace tlf
