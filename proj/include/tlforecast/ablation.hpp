#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tlforecast/forecast.hpp"
#include "tlforecast/metrics.hpp"
#include "tlforecast/types.hpp"

namespace tlf {

/// The four context-ablated deterministic policies under comparison.
struct AblationModels {
  const ModelWeights* all = nullptr;
  const ModelWeights* nofv = nullptr;
  const ModelWeights* notl = nullptr;
  const ModelWeights* nofvtl = nullptr;

  const ModelWeights* by_mode(AblationMode m) const {
    switch (m) {
      case AblationMode::kAll: return all;
      case AblationMode::kNoFv: return nofv;
      case AblationMode::kNoTl: return notl;
      case AblationMode::kNoFvTl: return nofvtl;
    }
    return nullptr;
  }

  void validate() const {
    const std::array<AblationMode, 4> modes = {
        AblationMode::kAll, AblationMode::kNoFv, AblationMode::kNoTl,
        AblationMode::kNoFvTl};
    for (AblationMode m : modes) {
      const auto* w = by_mode(m);
      if (w == nullptr) {
        throw ConfigError("ablation: missing model for mode " + ablation_mode_name(m));
      }
      if (w->arch.mode != m) {
        throw ConfigError("ablation: model registered under mode " +
                          ablation_mode_name(m) + " was trained in mode " +
                          ablation_mode_name(w->arch.mode));
      }
      if (w->arch.head != HeadKind::kDeterministic) {
        throw ConfigError("ablation compares the deterministic policies");
      }
    }
  }
};

struct SnippetRecord {
  std::int64_t snippet_id = 0;
  ScenarioLabel scenario = ScenarioLabel::kOther;
  AblationMode mode = AblationMode::kAll;
  MetricTriple metrics;

  friend bool operator==(const SnippetRecord& a, const SnippetRecord& b) {
    auto tie = [](const SnippetRecord& r) {
      return std::tuple(r.snippet_id, r.scenario, r.mode, r.metrics.position.mae,
                        r.metrics.position.twae, r.metrics.position.adn,
                        r.metrics.speed.mae, r.metrics.speed.twae,
                        r.metrics.speed.adn);
    };
    return tie(a) == tie(b);
  }
};

struct ReportCell {
  std::size_t count = 0;
  MetricTriple mean;
  BoxplotStats adn_position;
  BoxplotStats adn_speed;
};

/// Scenario-by-mode ablation summary. The per-snippet records are the source
/// of truth; every aggregate is recomputable from them.
struct AblationReport {
  std::string note =
      "per-snippet metrics averaged over snippets; scenario Y is short-horizon "
      "and excluded from the headline grid";
  double dt = 0.2;
  std::vector<SnippetRecord> records;

  const ReportCell& cell(ScenarioLabel s, AblationMode m) const {
    return cells_[static_cast<int>(s)][static_cast<int>(m)];
  }

  void rebuild_cells() {
    for (auto& row : cells_) row.fill(ReportCell{});
    std::array<std::array<std::vector<const SnippetRecord*>, kNumAblationModes>,
               kNumScenarioLabels>
        buckets;
    for (const auto& r : records) {
      buckets[static_cast<int>(r.scenario)][static_cast<int>(r.mode)].push_back(&r);
    }
    for (int s = 0; s < kNumScenarioLabels; ++s) {
      for (int m = 0; m < kNumAblationModes; ++m) {
        const auto& bucket = buckets[s][m];
        auto& cell = cells_[s][m];
        cell.count = bucket.size();
        if (bucket.empty()) continue;
        std::vector<double> adn_pos, adn_spd;
        adn_pos.reserve(bucket.size());
        adn_spd.reserve(bucket.size());
        for (const auto* r : bucket) {
          cell.mean.position.mae += r->metrics.position.mae;
          cell.mean.position.twae += r->metrics.position.twae;
          cell.mean.position.adn += r->metrics.position.adn;
          cell.mean.speed.mae += r->metrics.speed.mae;
          cell.mean.speed.twae += r->metrics.speed.twae;
          cell.mean.speed.adn += r->metrics.speed.adn;
          adn_pos.push_back(r->metrics.position.adn);
          adn_spd.push_back(r->metrics.speed.adn);
        }
        const double inv = 1.0 / static_cast<double>(bucket.size());
        cell.mean.position.mae *= inv;
        cell.mean.position.twae *= inv;
        cell.mean.position.adn *= inv;
        cell.mean.speed.mae *= inv;
        cell.mean.speed.twae *= inv;
        cell.mean.speed.adn *= inv;
        cell.adn_position = boxplot_stats(adn_pos);
        cell.adn_speed = boxplot_stats(adn_spd);
      }
    }
  }

  friend bool operator==(const AblationReport& a, const AblationReport& b) {
    return a.note == b.note && a.dt == b.dt && a.records == b.records;
  }

 private:
  std::array<std::array<ReportCell, kNumAblationModes>, kNumScenarioLabels>
      cells_{};
};

/// Runs the four policies over a labeled test set. Each mode forecasts with
/// its legal context sources: the signal oracle comes from the snippet's
/// recorded future states (the V2I assumption), and modes that observe the
/// front vehicle get it from the nofv sub-forecast. Horizons follow each
/// snippet's own future length.
inline AblationReport run_ablation(const AblationModels& models,
                                   const std::vector<Snippet>& testset,
                                   double dt, int threads = 1) {
  models.validate();
  const std::array<AblationMode, 4> modes = {
      AblationMode::kAll, AblationMode::kNoFv, AblationMode::kNoTl,
      AblationMode::kNoFvTl};

  AblationReport report;
  report.dt = dt;
  report.records.resize(testset.size() * modes.size());

  auto eval_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Snippet& sn = testset[i];
      const SpatProvider spat = spat_from_snippet(sn);
      const int n_steps = static_cast<int>(sn.horizon_steps());
      for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        const AblationMode mode = modes[mi];
        const ModelWeights& w = *models.by_mode(mode);
        const bool uses_fv =
            mode == AblationMode::kAll || mode == AblationMode::kNoTl;
        const FvSource src =
            uses_fv ? FvSource::forecast(*models.nofv) : FvSource::none();
        const auto forecast =
            forecast_deterministic(w, sn, spat, src, dt, n_steps);
        SnippetRecord rec;
        rec.snippet_id = static_cast<std::int64_t>(i);
        rec.scenario = sn.scenario;
        rec.mode = mode;
        rec.metrics = compute_metrics(forecast, sn);
        report.records[i * modes.size() + mi] = rec;
      }
    }
  };

  const int nthreads =
      std::max(1, std::min<int>(threads, static_cast<int>(testset.size())));
  if (nthreads <= 1) {
    eval_range(0, testset.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (testset.size() + nthreads - 1) / nthreads;
    for (int i = 0; i < nthreads; ++i) {
      const std::size_t lo = i * chunk;
      const std::size_t hi = std::min(testset.size(), lo + chunk);
      pool.emplace_back(eval_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  report.rebuild_cells();
  return report;
}

enum class ReportFormat { kDelimitedTable, kStructuredText };

namespace detail {

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline const std::array<ScenarioLabel, 6>& headline_scenarios() {
  static const std::array<ScenarioLabel, 6> s = {
      ScenarioLabel::kG, ScenarioLabel::kR, ScenarioLabel::kGY,
      ScenarioLabel::kYR, ScenarioLabel::kRG, ScenarioLabel::kGYR};
  return s;
}

inline const std::array<AblationMode, 4>& mode_order() {
  static const std::array<AblationMode, 4> m = {
      AblationMode::kAll, AblationMode::kNoFv, AblationMode::kNoTl,
      AblationMode::kNoFvTl};
  return m;
}

}  // namespace detail

/// Grid of scenario x mode x metric plus the ADN box-plot statistics, as a
/// plain delimited table. Field order is deterministic; rerunning on the
/// same report reproduces the bytes exactly.
inline std::string format_report_delimited(const AblationReport& report) {
  std::ostringstream out;
  out << "# ablation report\n";
  out << "# " << report.note << "\n";
  out << "# dt=" << detail::fmt_double(report.dt) << "\n";
  out << "section,scenario,mode,count,pos_mae,pos_twae,pos_adn,spd_mae,spd_twae,spd_adn\n";
  auto grid_row = [&](const char* section, ScenarioLabel s) {
    for (AblationMode m : detail::mode_order()) {
      const auto& cell = report.cell(s, m);
      out << section << ',' << scenario_name(s) << ',' << ablation_mode_name(m)
          << ',' << cell.count;
      if (cell.count == 0) {
        out << ",,,,,,\n";
        continue;
      }
      out << ',' << detail::fmt_double(cell.mean.position.mae) << ','
          << detail::fmt_double(cell.mean.position.twae) << ','
          << detail::fmt_double(cell.mean.position.adn) << ','
          << detail::fmt_double(cell.mean.speed.mae) << ','
          << detail::fmt_double(cell.mean.speed.twae) << ','
          << detail::fmt_double(cell.mean.speed.adn) << "\n";
    }
  };
  for (ScenarioLabel s : detail::headline_scenarios()) grid_row("headline", s);
  grid_row("short_horizon", ScenarioLabel::kY);

  out << "boxplot,scenario,mode,variable,q1,median,q3,whisker_lo,whisker_hi,outliers\n";
  for (ScenarioLabel s : detail::headline_scenarios()) {
    for (AblationMode m : detail::mode_order()) {
      const auto& cell = report.cell(s, m);
      if (cell.count == 0) continue;
      for (int v = 0; v < 2; ++v) {
        const BoxplotStats& st = v == 0 ? cell.adn_position : cell.adn_speed;
        out << "boxplot," << scenario_name(s) << ',' << ablation_mode_name(m)
            << ',' << (v == 0 ? "pos_adn" : "spd_adn") << ','
            << detail::fmt_double(st.q1) << ',' << detail::fmt_double(st.median)
            << ',' << detail::fmt_double(st.q3) << ','
            << detail::fmt_double(st.whisker_lo) << ','
            << detail::fmt_double(st.whisker_hi) << ',' << st.outliers.size()
            << "\n";
      }
    }
  }
  return out.str();
}

/// Structured form: parses back into an equal report.
inline std::string format_report_structured(const AblationReport& report) {
  nlohmann::json j;
  j["note"] = report.note;
  j["dt"] = report.dt;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : report.records) {
    recs.push_back({{"id", r.snippet_id},
                    {"scenario", scenario_name(r.scenario)},
                    {"mode", ablation_mode_name(r.mode)},
                    {"pos", {r.metrics.position.mae, r.metrics.position.twae,
                             r.metrics.position.adn}},
                    {"spd", {r.metrics.speed.mae, r.metrics.speed.twae,
                             r.metrics.speed.adn}}});
  }
  j["records"] = recs;
  return j.dump(1);
}

inline AblationReport parse_report_structured(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report parse: ") + e.what());
  }
  AblationReport report;
  report.note = j.at("note").get<std::string>();
  report.dt = j.at("dt").get<double>();
  for (const auto& jr : j.at("records")) {
    SnippetRecord r;
    r.snippet_id = jr.at("id").get<std::int64_t>();
    r.scenario = scenario_from_name(jr.at("scenario").get<std::string>());
    r.mode = ablation_mode_from_name(jr.at("mode").get<std::string>());
    const auto& pos = jr.at("pos");
    const auto& spd = jr.at("spd");
    r.metrics.position = {pos[0].get<double>(), pos[1].get<double>(),
                          pos[2].get<double>()};
    r.metrics.speed = {spd[0].get<double>(), spd[1].get<double>(),
                       spd[2].get<double>()};
    report.records.push_back(r);
  }
  report.rebuild_cells();
  return report;
}

/// Machine-readable per-snippet ledger for downstream plotting.
inline std::string format_snippet_ledger(const AblationReport& report) {
  std::ostringstream out;
  out << "snippet_id,scenario,mode,pos_mae,pos_twae,pos_adn,spd_mae,spd_twae,spd_adn\n";
  for (const auto& r : report.records) {
    out << r.snippet_id << ',' << scenario_name(r.scenario) << ','
        << ablation_mode_name(r.mode) << ','
        << detail::fmt_double(r.metrics.position.mae) << ','
        << detail::fmt_double(r.metrics.position.twae) << ','
        << detail::fmt_double(r.metrics.position.adn) << ','
        << detail::fmt_double(r.metrics.speed.mae) << ','
        << detail::fmt_double(r.metrics.speed.twae) << ','
        << detail::fmt_double(r.metrics.speed.adn) << "\n";
  }
  return out.str();
}

inline void emit_report(const AblationReport& report, ReportFormat format,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open report file for writing: " + path);
  const std::string text = format == ReportFormat::kDelimitedTable
                               ? format_report_delimited(report)
                               : format_report_structured(report);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("failed writing report file: " + path);
}

}  // namespace tlf
