#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "tlforecast/ablation.hpp"
#include "tlforecast/metrics.hpp"
#include "tlforecast/rng.hpp"

using namespace tlf;

namespace {

std::vector<VehicleKinState> states_from_positions(const std::vector<double>& xs) {
  std::vector<VehicleKinState> out;
  for (double x : xs) out.push_back({x, 0.0});
  return out;
}

SnippetRecord make_record(std::int64_t id, ScenarioLabel s, AblationMode m,
                          double seedv) {
  SnippetRecord r;
  r.snippet_id = id;
  r.scenario = s;
  r.mode = m;
  r.metrics.position = {seedv, seedv * 1.5, seedv * 2.0};
  r.metrics.speed = {seedv * 0.1, seedv * 0.15, seedv * 0.2};
  return r;
}

}  // namespace

TEST_CASE("constant error collapses all three metrics", "[metrics]") {
  const auto truth = states_from_positions({1.0, 2.0, 3.0, 4.0});
  const auto forecast = states_from_positions({2.0, 3.0, 4.0, 5.0});
  const auto m = compute_metrics(forecast, truth, 0.2);
  CHECK(m.position.mae == Catch::Approx(1.0));
  CHECK(m.position.twae == Catch::Approx(1.0));
  CHECK(m.position.adn == Catch::Approx(1.0));
  CHECK(m.speed.mae == 0.0);
}

TEST_CASE("metric arithmetic on a two-step window", "[metrics]") {
  // errors {1, 2} at t = {0.2, 0.4}
  const auto truth = states_from_positions({0.0, 0.0});
  const auto forecast = states_from_positions({1.0, 2.0});
  const auto m = compute_metrics(forecast, truth, 0.2);
  CHECK(m.position.mae == Catch::Approx(1.5));
  CHECK(m.position.twae == Catch::Approx((0.2 * 1.0 + 0.4 * 2.0) / 0.6));
  CHECK(std::abs(m.position.twae - 5.0 / 3.0) < 1e-12);
  CHECK(m.position.adn == Catch::Approx(2.0));
}

TEST_CASE("zero error gives zero metrics", "[metrics]") {
  const auto truth = states_from_positions({3.0, 4.0, 5.5});
  const auto m = compute_metrics(truth, truth, 0.2);
  CHECK(m.position.mae == 0.0);
  CHECK(m.position.twae == 0.0);
  CHECK(m.position.adn == 0.0);
  CHECK_THROWS_AS(
      compute_metrics(truth, states_from_positions({1.0}), 0.2),
      DomainError);
}

TEST_CASE("adn is exactly the last per-step deviation", "[metrics]") {
  Rng rng(40);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + rng.uniform_int(30);
    std::vector<VehicleKinState> truth(n), forecast(n);
    for (int k = 0; k < n; ++k) {
      truth[k] = {rng.uniform(-50.0, 50.0), rng.uniform(0.0, 20.0)};
      forecast[k] = {rng.uniform(-50.0, 50.0), rng.uniform(0.0, 20.0)};
    }
    const auto m = compute_metrics(forecast, truth, 0.2);
    CHECK(m.position.adn == std::abs(forecast.back().s - truth.back().s));
    CHECK(m.speed.adn == std::abs(forecast.back().v - truth.back().v));
  }
}

TEST_CASE("mae is permutation-invariant, twae is not", "[metrics]") {
  Rng rng(41);
  std::vector<double> errs = {0.5, 1.5, 2.5, 4.0, 7.0};
  auto build = [&](const std::vector<double>& e) {
    std::vector<VehicleKinState> f;
    for (double x : e) f.push_back({x, 0.0});
    return f;
  };
  const auto truth = states_from_positions(std::vector<double>(errs.size(), 0.0));

  auto increasing = errs;
  auto decreasing = errs;
  std::sort(decreasing.rbegin(), decreasing.rend());
  const auto mi = compute_metrics(build(increasing), truth, 0.2);
  const auto md = compute_metrics(build(decreasing), truth, 0.2);
  CHECK(mi.position.mae == Catch::Approx(md.position.mae));
  CHECK(mi.position.twae > md.position.twae);

  // Bounds: min <= MAE, TWAE <= max for nonnegative errors.
  CHECK(mi.position.mae >= 0.5);
  CHECK(mi.position.mae <= 7.0);
  CHECK(mi.position.twae >= 0.5);
  CHECK(mi.position.twae <= 7.0);
}

TEST_CASE("boxplot quartiles use linear interpolation", "[metrics]") {
  std::vector<double> values(100);
  for (int i = 0; i < 100; ++i) values[i] = i + 1;
  const auto st = boxplot_stats(values);
  CHECK(st.median == Catch::Approx(50.5));
  CHECK(st.q1 == Catch::Approx(25.75));
  CHECK(st.q3 == Catch::Approx(75.25));
  CHECK(st.whisker_lo == 1.0);
  CHECK(st.whisker_hi == 100.0);
  CHECK(st.outliers.empty());
}

TEST_CASE("boxplot handles degenerate data", "[metrics]") {
  const std::vector<double> equal(12, 3.0);
  const auto st = boxplot_stats(equal);
  CHECK(st.q1 == 3.0);
  CHECK(st.median == 3.0);
  CHECK(st.q3 == 3.0);
  CHECK(st.whisker_lo == 3.0);
  CHECK(st.whisker_hi == 3.0);
  CHECK(st.outliers.empty());
  CHECK_THROWS_AS(boxplot_stats(std::vector<double>{}), DomainError);
}

TEST_CASE("boxplot flags far points as outliers", "[metrics]") {
  std::vector<double> values(99, 0.0);
  values.push_back(100.0);
  const auto st = boxplot_stats(values);
  REQUIRE(st.outliers.size() == 1);
  CHECK(st.outliers[0] == 100.0);
  CHECK(st.whisker_hi == 0.0);
}

TEST_CASE("report aggregation is associative over shards", "[metrics]") {
  Rng rng(42);
  std::vector<SnippetRecord> records;
  for (int i = 0; i < 120; ++i) {
    records.push_back(make_record(
        i, static_cast<ScenarioLabel>(rng.uniform_int(kNumScenarioLabels)),
        static_cast<AblationMode>(rng.uniform_int(kNumAblationModes)),
        rng.uniform(0.1, 20.0)));
  }
  AblationReport whole;
  whole.records = records;
  whole.rebuild_cells();

  AblationReport merged;
  merged.records.assign(records.begin(), records.begin() + 47);
  std::vector<SnippetRecord> tail(records.begin() + 47, records.end());
  merged.records.insert(merged.records.end(), tail.begin(), tail.end());
  merged.rebuild_cells();

  for (int s = 0; s < kNumScenarioLabels; ++s) {
    for (int m = 0; m < kNumAblationModes; ++m) {
      const auto& a = whole.cell(static_cast<ScenarioLabel>(s),
                                 static_cast<AblationMode>(m));
      const auto& b = merged.cell(static_cast<ScenarioLabel>(s),
                                  static_cast<AblationMode>(m));
      CHECK(a.count == b.count);
      CHECK(a.mean.position.adn == b.mean.position.adn);
      if (a.count > 0) {
        CHECK(a.adn_position.median == b.adn_position.median);
        CHECK(a.adn_position.q1 == b.adn_position.q1);
        CHECK(a.adn_position.q3 == b.adn_position.q3);
      }
    }
  }
}

TEST_CASE("structured report round-trips to an equal report", "[metrics]") {
  Rng rng(43);
  AblationReport report;
  for (int i = 0; i < 60; ++i) {
    report.records.push_back(make_record(
        i, static_cast<ScenarioLabel>(rng.uniform_int(kNumScenarioLabels)),
        static_cast<AblationMode>(rng.uniform_int(kNumAblationModes)),
        rng.uniform(1e-6, 300.0)));
  }
  report.rebuild_cells();
  const std::string text = format_report_structured(report);
  const AblationReport parsed = parse_report_structured(text);
  CHECK(parsed == report);
  CHECK(format_report_structured(parsed) == text);
}

TEST_CASE("report emission is deterministic and shaped", "[metrics]") {
  Rng rng(44);
  AblationReport report;
  for (int i = 0; i < 30; ++i) {
    for (int m = 0; m < kNumAblationModes; ++m) {
      report.records.push_back(make_record(i, ScenarioLabel::kRG,
                                           static_cast<AblationMode>(m),
                                           rng.uniform(0.1, 5.0)));
    }
  }
  report.rebuild_cells();
  const std::string a = format_report_delimited(report);
  const std::string b = format_report_delimited(report);
  CHECK(a == b);

  // Empty buckets still get rows, with blank metric fields.
  CHECK(a.find("headline,G,all,0,,,,,,") != std::string::npos);
  CHECK(a.find("headline,RG,nofvtl,30,") != std::string::npos);
  // 7 scenario groups x 4 modes in the grid.
  std::size_t rows = 0, at = 0;
  while ((at = a.find("\nheadline,", at)) != std::string::npos) {
    ++rows;
    ++at;
  }
  std::size_t short_rows = 0;
  at = 0;
  while ((at = a.find("\nshort_horizon,", at)) != std::string::npos) {
    ++short_rows;
    ++at;
  }
  CHECK(rows == 24);
  CHECK(short_rows == 4);

  const std::string ledger = format_snippet_ledger(report);
  CHECK(std::count(ledger.begin(), ledger.end(), '\n') ==
        1 + static_cast<long>(report.records.size()));
}
