#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "tlforecast/forecast.hpp"
#include "tlforecast/kde.hpp"
#include "tlforecast/kinematics.hpp"
#include "tlforecast/simulate.hpp"

using namespace tlf;

namespace {

using Mat2 = std::array<double, 4>;
using Vec2 = std::array<double, 2>;

Mat2 matmul(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

Vec2 matvec(const Mat2& a, const Vec2& x) {
  return {a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]};
}

/// Closed-form multistep propagation: products of the one-step transition
/// matrices applied to the initial state plus each held acceleration.
Vec2 closed_form_state(const Vec2& x0, const std::vector<double>& accels,
                       double dt) {
  const Mat2 a = {1.0, dt, 0.0, 1.0};
  const Vec2 b = {0.5 * dt * dt, dt};
  const std::size_t n = accels.size();
  Vec2 acc{0.0, 0.0};
  Mat2 prod = {1.0, 0.0, 0.0, 1.0};  // running product of A over [j+1, N)
  for (std::size_t j = n; j-- > 0;) {
    const Vec2 term = matvec(prod, {b[0] * accels[j], b[1] * accels[j]});
    acc = {acc[0] + term[0], acc[1] + term[1]};
    prod = matmul(prod, a);
  }
  const Vec2 head = matvec(prod, x0);
  return {head[0] + acc[0], head[1] + acc[1]};
}

ModelWeights zero_policy(HeadKind head, AblationMode mode = AblationMode::kAll) {
  PolicyArchitecture arch;
  arch.head = head;
  arch.mode = mode;
  arch.hidden_size = 6;
  arch.head_hidden = {6};
  return ModelWeights::build(arch);
}

Snippet cruising_snippet(double v0, int n_future) {
  Snippet sn;
  sn.dt = 0.2;
  sn.tod = 12.0;
  sn.tl_position = 0.0;
  double s = -80.0;
  for (int i = 0; i < 11; ++i) {
    sn.hist_states.push_back({s, v0});
    ContextVector ctx;
    ctx.tl = TlSignalState{Phase::kGreen, 5.0 + 0.2 * i};
    ctx.tod = sn.tod;
    sn.hist_contexts.push_back(ctx);
    s += v0 * sn.dt;
  }
  for (int k = 0; k < n_future; ++k) {
    s += v0 * sn.dt;
    sn.future_states.push_back({s, v0});
    sn.future_accels.push_back(0.0);
    ContextVector ctx;
    ctx.tl = TlSignalState{Phase::kGreen, 7.2 + 0.2 * k};
    ctx.tod = sn.tod;
    sn.future_contexts.push_back(ctx);
  }
  sn.scenario = ScenarioLabel::kG;
  return sn;
}

}  // namespace

TEST_CASE("kinematic step arithmetic", "[rollout]") {
  const auto a = step_dynamics({0.0, 10.0}, 2.0, 0.2);
  CHECK(a.s == Catch::Approx(2.04));
  CHECK(a.v == Catch::Approx(10.4));

  const auto rest = step_dynamics({5.0, 0.0}, 0.0, 0.2);
  CHECK(rest.s == 5.0);
  CHECK(rest.v == 0.0);

  const auto stop = step_dynamics({0.0, 0.1}, -2.0, 0.2);
  CHECK(stop.v == 0.0);
  CHECK(stop.s == Catch::Approx(0.0025));
}

TEST_CASE("iterated steps equal the closed-form expansion", "[rollout]") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const double dt = 0.2;
    const int n = 1 + rng.uniform_int(100);
    const double v0 = rng.uniform(40.0, 80.0);  // stays clear of the rest clamp
    std::vector<double> accels(n);
    for (auto& a : accels) a = rng.uniform(-1.0, 1.0);

    VehicleKinState x{rng.uniform(-100.0, 100.0), v0};
    const Vec2 expected = closed_form_state({x.s, x.v}, accels, dt);
    for (double a : accels) x = step_dynamics(x, a, dt);
    CHECK(std::abs(x.s - expected[0]) < 1e-9);
    CHECK(std::abs(x.v - expected[1]) < 1e-9);
  }
}

TEST_CASE("spat providers agree when they carry the same schedule", "[rollout]") {
  const SignalCycleConfig cfg{16.0, 3.0, 20.0, 7.0};
  const auto cyclic = SpatProvider::from_cycle(cfg, 10.0);
  std::vector<std::pair<double, TlSignalState>> samples;
  for (int k = 0; k <= 25; ++k) {
    samples.emplace_back(k * 0.2, tl_state_at(cfg, 10.0 + k * 0.2));
  }
  const auto sampled = SpatProvider::from_series(samples);
  for (int k = 0; k <= 25; ++k) {
    const auto a = cyclic.at(k * 0.2);
    const auto b = sampled.at(k * 0.2);
    CHECK(a.phase == b.phase);
    CHECK(a.timer == Catch::Approx(b.timer).margin(1e-9));
  }
}

TEST_CASE("a zero policy propagates constant velocity", "[rollout]") {
  const auto w = zero_policy(HeadKind::kDeterministic);
  const auto sn = cruising_snippet(10.0, 25);
  const auto spat = spat_from_snippet(sn);
  const auto traj =
      forecast_deterministic(w, sn, spat, FvSource::none(), sn.dt, 25);
  REQUIRE(traj.states.size() == 25);  // N = T/dt covers 5 s at 0.2 s
  const double s0 = sn.hist_states.back().s;
  for (int k = 0; k < 25; ++k) {
    CHECK(traj.states[k].s ==
          Catch::Approx(s0 + 10.0 * (k + 1) * sn.dt).margin(1e-9));
    CHECK(traj.states[k].v == Catch::Approx(10.0));
  }
}

TEST_CASE("deterministic forecasts are pure", "[rollout]") {
  auto w = zero_policy(HeadKind::kDeterministic);
  w.init(99);
  const auto sn = cruising_snippet(8.0, 25);
  const auto spat = spat_from_snippet(sn);
  const auto a = forecast_deterministic(w, sn, spat, FvSource::none(), sn.dt, 25);
  const auto b = forecast_deterministic(w, sn, spat, FvSource::none(), sn.dt, 25);
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    CHECK(a.states[k].s == b.states[k].s);
    CHECK(a.states[k].v == b.states[k].v);
  }
}

TEST_CASE("oracle and cycle signal channels give identical forecasts", "[rollout]") {
  // Information equivalence: the forecast depends on the carried values, not
  // on which channel supplied them.
  const SignalCycleConfig cfg{12.0, 3.0, 14.0, 0.0};
  DriverParams p;
  p.noise_std = 0.0;
  const auto ep = simulate_episode(cfg, p, std::nullopt, 9.0, 40.0, 0.2, 5);
  const auto snippets = extract_snippets(ep, 2.0, 5.0, 0.2, 1);
  REQUIRE(snippets.size() > 40);
  const Snippet& sn = snippets[30];
  const double t0 = (30 + 10) * 0.2;  // anchor time of this window

  auto w = zero_policy(HeadKind::kDeterministic);
  w.init(7);
  const auto via_truth = forecast_deterministic(
      w, sn, spat_from_snippet(sn), FvSource::none(), sn.dt, 25);
  const auto via_cycle = forecast_deterministic(
      w, sn, SpatProvider::from_cycle(cfg, t0), FvSource::none(), sn.dt, 25);
  for (std::size_t k = 0; k < via_truth.states.size(); ++k) {
    CHECK(via_truth.states[k].s == via_cycle.states[k].s);
    CHECK(via_truth.states[k].v == via_cycle.states[k].v);
  }
}

TEST_CASE("mode and source consistency is enforced", "[rollout]") {
  const auto nofv = zero_policy(HeadKind::kDeterministic, AblationMode::kNoFv);
  const auto all = zero_policy(HeadKind::kDeterministic, AblationMode::kAll);
  const auto sn = cruising_snippet(10.0, 25);
  const auto spat = spat_from_snippet(sn);

  CHECK_THROWS_AS(forecast_deterministic(nofv, sn, spat, FvSource::oracle(),
                                         sn.dt, 25),
                  ConfigError);
  CHECK_THROWS_AS(forecast_deterministic(all, sn, spat, FvSource::forecast(all),
                                         sn.dt, 25),
                  ConfigError);
  CHECK_THROWS_AS(forecast_fv(all, sn.hist_states, 0.0, 12.0, spat, 0.2, 10),
                  ConfigError);
}

TEST_CASE("fv sub-forecast tracks a cruising leader", "[rollout]") {
  // Relative conversion: r = s_fv - s_hv stays positive for a leader ahead.
  const auto nofv = zero_policy(HeadKind::kDeterministic, AblationMode::kNoFv);
  const auto sn = cruising_snippet(10.0, 25);
  const auto spat = spat_from_snippet(sn);
  std::vector<VehicleKinState> fv_hist;
  for (const auto& st : sn.hist_states) fv_hist.push_back({st.s + 30.0, st.v});

  const auto fv_traj = forecast_fv(nofv, fv_hist, 0.0, sn.tod, spat, sn.dt, 25);
  const auto hv_traj =
      forecast_deterministic(nofv, sn, spat, FvSource::none(), sn.dt, 25);
  const auto rel = relative_to(hv_traj.states, fv_traj.states);
  for (const auto& r : rel) CHECK(r.r > 0.0);
}

TEST_CASE("chain-rule factorization holds exactly", "[rollout]") {
  ForecastTrajectory toy;
  toy.step_log_density = {std::log(0.5), std::log(0.25)};
  double joint = 0.0;
  for (double ld : toy.step_log_density) joint += ld;
  CHECK(std::exp(joint) == Catch::Approx(0.125));

  auto w = zero_policy(HeadKind::kMixture);
  w.init(3);
  const auto sn = cruising_snippet(9.0, 25);
  const auto spat = spat_from_snippet(sn);
  const auto ens =
      rollout_probabilistic(w, sn, spat, FvSource::none(), sn.dt, 25, 64, 17);
  REQUIRE(ens.size() == 64);
  for (const auto& tr : ens.trajectories) {
    double sum = 0.0;
    for (double ld : tr.step_log_density) sum += ld;
    CHECK(std::abs(tr.joint_log_prob - sum) < 1e-9);
    for (const auto& st : tr.states) CHECK(st.v >= 0.0);
  }
}

TEST_CASE("rollouts are reproducible and thread-invariant", "[rollout]") {
  auto w = zero_policy(HeadKind::kMixture);
  w.init(5);
  const auto sn = cruising_snippet(11.0, 25);
  const auto spat = spat_from_snippet(sn);
  const auto a = rollout_probabilistic(w, sn, spat, FvSource::none(), sn.dt,
                                       25, 40, 9, 1);
  const auto b = rollout_probabilistic(w, sn, spat, FvSource::none(), sn.dt,
                                       25, 40, 9, 2);
  for (std::size_t m = 0; m < a.size(); ++m) {
    CHECK(a.trajectories[m].joint_log_prob == b.trajectories[m].joint_log_prob);
    CHECK(a.trajectories[m].states.back().s == b.trajectories[m].states.back().s);
  }
  const auto c = rollout_probabilistic(w, sn, spat, FvSource::none(), sn.dt,
                                       25, 40, 10, 1);
  CHECK(a.trajectories[0].states.back().s != c.trajectories[0].states.back().s);
}

TEST_CASE("gaussian kernel reference values", "[rollout]") {
  const std::vector<double> cluster(32, 0.0);
  CHECK(kde_value(cluster, 1.0, 0.0) ==
        Catch::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));

  const std::vector<double> pair = {-1.0, 1.0};
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(0.0, 4.0);
    CHECK(kde_value(pair, 1.0, x) == Catch::Approx(kde_value(pair, 1.0, -x)));
  }
}

TEST_CASE("marginal densities integrate to one", "[rollout]") {
  auto w = zero_policy(HeadKind::kMixture);
  w.init(21);
  const auto sn = cruising_snippet(10.0, 25);
  const auto spat = spat_from_snippet(sn);
  for (int m : {10, 100, 1000}) {
    const auto ens = rollout_probabilistic(w, sn, spat, FvSource::none(), sn.dt,
                                           25, m, 77, 2);
    for (std::size_t step : {std::size_t{5}, std::size_t{24}}) {
      const auto d = marginal_density(ens, step, MarginalVariable::kPosition,
                                      std::size_t{801});
      REQUIRE_FALSE(d.point_mass);
      CHECK(trapezoid_integral(d.grid, d.density) ==
            Catch::Approx(1.0).margin(0.02));
    }
  }
}

TEST_CASE("degenerate ensembles report a point mass", "[rollout]") {
  RolloutEnsemble ens;
  ens.dt = 0.2;
  for (int m = 0; m < 8; ++m) {
    ForecastTrajectory tr;
    for (int k = 0; k < 5; ++k) tr.states.push_back({42.0, 0.0});
    ens.trajectories.push_back(tr);
  }
  const auto d = marginal_density(ens, 3, MarginalVariable::kPosition,
                                  std::size_t{101});
  CHECK(d.point_mass);
  CHECK(d.point_value == 42.0);
}

TEST_CASE("density filtering keeps everything at threshold zero", "[rollout]") {
  auto w = zero_policy(HeadKind::kMixture);
  w.init(31);
  const auto sn = cruising_snippet(10.0, 25);
  const auto spat = spat_from_snippet(sn);
  const auto ens = rollout_probabilistic(w, sn, spat, FvSource::none(), sn.dt,
                                         25, 100, 13);
  CHECK(filter_by_density_indices(ens, 0.0).size() == 100);
  CHECK(filter_by_density_indices(ens, 1e9).empty());
  const auto some = filter_by_density_indices(ens, 0.01);
  CHECK_FALSE(some.empty());
}
