#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "tlforecast/corpus.hpp"
#include "tlforecast/driver.hpp"
#include "tlforecast/simulate.hpp"
#include "tlforecast/smoothing.hpp"

using namespace tlf;

namespace {

DriverParams quiet_driver() {
  DriverParams p;
  p.noise_std = 0.0;
  return p;
}

}  // namespace

TEST_CASE("driver holds the desired speed on a free green road", "[sim]") {
  DriverParams p = quiet_driver();
  DriverMemory mem;
  Rng rng(1);
  const double a = driver_accel({0.0, p.desired_speed}, std::nullopt,
                                {Phase::kGreen, 10.0}, 500.0, p, mem, rng, 0.2);
  CHECK(std::abs(a) <= 0.05);
}

TEST_CASE("driver brakes for a red light ahead", "[sim]") {
  DriverParams p = quiet_driver();
  DriverMemory mem;
  Rng rng(1);
  const double a = driver_accel({-30.0, 10.0}, std::nullopt,
                                {Phase::kRed, 8.0}, 30.0, p, mem, rng, 0.2);
  CHECK(a < 0.0);
}

TEST_CASE("driver departs from rest once the light turns green", "[sim]") {
  DriverParams p = quiet_driver();
  DriverMemory mem;
  Rng rng(1);
  const double a = driver_accel({-1.0, 0.0}, std::nullopt,
                                {Phase::kGreen, 0.5}, 1.0, p, mem, rng, 0.2);
  CHECK(a > 0.0);
}

TEST_CASE("driver never reverses within one step", "[sim]") {
  DriverParams p = quiet_driver();
  DriverMemory mem;
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const double v = rng.uniform(0.0, 2.0);
    const double d = rng.uniform(0.1, 5.0);
    const double a = driver_accel({-d, v}, std::nullopt, {Phase::kRed, 20.0}, d,
                                  p, mem, rng, 0.2);
    CHECK(v + a * 0.2 >= -1e-12);
  }
}

TEST_CASE("episodes satisfy the exact kinematic relation", "[sim]") {
  const SignalCycleConfig cfg{30.0, 3.0, 30.0, 12.0};
  const auto ep = simulate_episode(cfg, DriverParams{}, DriverParams{}, 9.5,
                                   60.0, 0.2, 77);
  REQUIRE(ep.samples() == 301);
  auto check_track = [&](const VehicleTrack& track) {
    for (std::size_t n = 0; n + 1 < track.s.size(); ++n) {
      const double v1 = track.v[n] + track.a[n] * ep.dt;
      const double s1 = track.s[n] + 0.5 * (track.v[n] + v1) * ep.dt;
      CHECK(track.v[n + 1] == v1);
      CHECK(track.s[n + 1] == s1);
      CHECK(track.v[n] >= 0.0);
    }
  };
  check_track(ep.hv);
  REQUIRE(ep.fv.has_value());
  check_track(*ep.fv);
}

TEST_CASE("identical seeds reproduce episodes bit for bit", "[sim]") {
  const SignalCycleConfig cfg{28.0, 3.5, 31.0, 5.0};
  const auto a = simulate_episode(cfg, DriverParams{}, DriverParams{}, 14.0,
                                  50.0, 0.2, 7);
  const auto b = simulate_episode(cfg, DriverParams{}, DriverParams{}, 14.0,
                                  50.0, 0.2, 7);
  CHECK(a.hv.s == b.hv.s);
  CHECK(a.hv.v == b.hv.v);
  CHECK(a.hv.a == b.hv.a);
  REQUIRE(a.fv.has_value());
  CHECK(a.fv->s == b.fv->s);

  const auto c = simulate_episode(cfg, DriverParams{}, DriverParams{}, 14.0,
                                  50.0, 0.2, 8);
  CHECK(a.hv.s != c.hv.s);
}

TEST_CASE("compliant drivers are stopped deep into red", "[sim]") {
  // No pass propensity: across 100 seeded episodes the host never moves when
  // the light has been red a while and it is at the bar.
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DriverParams p;
    p.yellow_pass_propensity = 0.0;
    p.noise_std = 0.02;
    const SignalCycleConfig cfg{25.0, 3.0, 30.0,
                                static_cast<double>(seed % 50)};
    const auto ep = simulate_episode(cfg, p, std::nullopt, 12.0, 60.0, 0.2, seed);
    for (std::size_t n = 0; n < ep.samples(); ++n) {
      const double d_tl = -ep.hv.s[n];
      if (ep.tl[n].phase == Phase::kRed && ep.tl[n].timer > 5.0 && d_tl > 0.0 &&
          d_tl < 1.0) {
        CHECK(ep.hv.v[n] == 0.0);
      }
    }
  }
}

TEST_CASE("host never collides with a slower front vehicle", "[sim]") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    DriverParams hv;
    hv.desired_speed = 16.0;
    DriverParams fv;
    fv.desired_speed = 9.0;  // slower leader forces real car-following
    const SignalCycleConfig cfg{30.0, 3.0, 25.0, static_cast<double>(seed)};
    const auto ep = simulate_episode(cfg, hv, fv, 15.0, 60.0, 0.2, 1000 + seed);
    REQUIRE(ep.fv.has_value());
    double min_r = 1e9;
    for (std::size_t n = 0; n < ep.samples(); ++n) {
      min_r = std::min(min_r, ep.fv->s[n] - ep.hv.s[n]);
    }
    CHECK(min_r > hv.min_gap / 2.0);
  }
}

TEST_CASE("snippet extraction counts and labels", "[sim]") {
  const SignalCycleConfig cfg{100.0, 3.0, 30.0, 0.0};  // long green
  DriverParams p = quiet_driver();
  const auto ep = simulate_episode(cfg, p, std::nullopt, 10.0, 10.0, 0.2, 3);
  REQUIRE(ep.samples() == 51);

  const auto snippets = extract_snippets(ep, 2.0, 5.0, 0.2, 1);
  CHECK(snippets.size() == 16);  // (10 - 7) / 0.2 + 1 windows
  for (const auto& sn : snippets) {
    CHECK(sn.n_tau() == 11);
    CHECK(sn.horizon_steps() == 25);
    CHECK(sn.scenario == ScenarioLabel::kG);  // whole episode inside green
  }

  const auto ep7 = simulate_episode(cfg, p, std::nullopt, 10.0, 7.0, 0.2, 3);
  CHECK(extract_snippets(ep7, 2.0, 5.0, 0.2, 1).size() == 1);
  const auto ep6 = simulate_episode(cfg, p, std::nullopt, 10.0, 6.8, 0.2, 3);
  CHECK(extract_snippets(ep6, 2.0, 5.0, 0.2, 1).empty());
}

TEST_CASE("snippet windows pick up phase transitions", "[sim]") {
  const SignalCycleConfig cfg{10.0, 3.0, 12.0, 0.0};
  DriverParams p = quiet_driver();
  const auto ep = simulate_episode(cfg, p, std::nullopt, 10.0, 50.0, 0.2, 11);
  bool saw_gy = false, saw_yr = false, saw_rg = false;
  for (const auto& sn : extract_snippets(ep, 2.0, 5.0, 0.2, 1)) {
    saw_gy |= sn.scenario == ScenarioLabel::kGY;
    saw_yr |= sn.scenario == ScenarioLabel::kYR;
    saw_rg |= sn.scenario == ScenarioLabel::kRG;
  }
  CHECK(saw_gy);
  CHECK(saw_yr);
  CHECK(saw_rg);
}

TEST_CASE("smoothing reproduces polynomials", "[sim]") {
  std::vector<double> constant(40, 3.25);
  const auto sc = smooth_signal(constant, 11, 2);
  for (double x : sc) CHECK(x == Catch::Approx(3.25).margin(1e-9));

  std::vector<double> quad(60);
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const double t = 0.1 * static_cast<double>(i);
    quad[i] = 2.0 - 1.5 * t + 0.25 * t * t;
  }
  const auto sq = smooth_signal(quad, 11, 2);
  for (std::size_t i = 0; i < quad.size(); ++i) {
    CHECK(std::abs(sq[i] - quad[i]) < 1e-9);
  }
}

TEST_CASE("smoothing attenuates white noise", "[sim]") {
  Rng rng(99);
  std::vector<double> noise(4000);
  for (auto& x : noise) x = rng.normal();
  const auto sm = smooth_signal(noise, 11, 2);
  double sq = 0.0;
  for (double x : sm) sq += x * x;
  const double out_std = std::sqrt(sq / static_cast<double>(sm.size()));
  CHECK(out_std < 0.6);
}

TEST_CASE("smoothing rejects bad configuration", "[sim]") {
  const std::vector<double> xs(20, 1.0);
  CHECK_THROWS_AS(smooth_signal(xs, 10, 2), ConfigError);
  CHECK_THROWS_AS(smooth_signal(xs, 11, 11), ConfigError);
}

TEST_CASE("corpus files round-trip", "[sim]") {
  GeneratorConfig g;
  g.episodes = 5;
  g.seed = 21;
  g.duration = 20.0;
  const auto corpus = generate_corpus(g);
  REQUIRE(corpus.size() == 5);

  std::ostringstream buf;
  write_corpus(corpus, buf);
  std::istringstream in(buf.str());
  const auto loaded = read_corpus(in);
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded[i].id == corpus[i].id);
    CHECK(loaded[i].dt == corpus[i].dt);
    CHECK(loaded[i].tod == corpus[i].tod);
    CHECK(loaded[i].hv.s == corpus[i].hv.s);
    CHECK(loaded[i].hv.v == corpus[i].hv.v);
    CHECK(loaded[i].hv.a == corpus[i].hv.a);
    CHECK(loaded[i].fv.has_value() == corpus[i].fv.has_value());
    if (loaded[i].fv) {
      CHECK(loaded[i].fv->s == corpus[i].fv->s);
      CHECK(loaded[i].fv->v == corpus[i].fv->v);
    }
    REQUIRE(loaded[i].tl.size() == corpus[i].tl.size());
    for (std::size_t n = 0; n < corpus[i].tl.size(); ++n) {
      CHECK(loaded[i].tl[n].phase == corpus[i].tl[n].phase);
      CHECK(loaded[i].tl[n].timer == corpus[i].tl[n].timer);
    }
  }
}

TEST_CASE("generator config round-trips and hashes stably", "[sim]") {
  GeneratorConfig g;
  g.episodes = 123;
  g.seed = 9;
  g.dilemma_fraction = 0.25;
  g.y_dur_max = 3.7;
  const std::string text = serialize_generator_config(g);
  std::istringstream in(text);
  const GeneratorConfig parsed = parse_generator_config(in);
  CHECK(serialize_generator_config(parsed) == text);
  CHECK(generator_config_hash(parsed) == generator_config_hash(g));

  std::istringstream bad("episodes = nope\n");
  CHECK_THROWS_AS(parse_generator_config(bad), ConfigError);
}

TEST_CASE("episode split is stable and leak-free", "[sim]") {
  GeneratorConfig g;
  g.episodes = 200;
  g.duration = 10.0;
  const auto corpus = generate_corpus(g);
  const auto split = split_by_episode(corpus, 0.7, 0.15);
  CHECK(split.train.size() + split.val.size() + split.test.size() == corpus.size());
  CHECK(split.train.size() > 100);
  CHECK_FALSE(split.test.empty());
  const auto again = split_by_episode(corpus, 0.7, 0.15);
  CHECK(split.train.size() == again.train.size());
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    CHECK(split.train[i]->id == again.train[i]->id);
  }
}

TEST_CASE("default corpus covers the scenario taxonomy", "[sim]") {
  GeneratorConfig g;
  g.episodes = 500;
  g.seed = 5;
  const auto corpus = generate_corpus(g, 2);
  const auto counts = count_scenarios(corpus, 2.0, 5.0, g.dt, 5);
  for (const char* label : {"G", "R", "GY", "YR", "RG"}) {
    INFO(label);
    CHECK(counts.at(label) >= 5);
  }
  const auto long_counts = count_scenarios(corpus, 2.0, 15.0, g.dt, 5);
  CHECK(long_counts.at("GYR") >= 5);
}
