#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "hqm/model.hpp"
#include "hqm/oracle.hpp"
#include "hqm/regulator.hpp"

using namespace hqm;

namespace {

ScenarioSpec small_scenario() {
  ScenarioSpec s;
  s.tick_seconds = 5.0;
  s.horizon = 720;
  s.section_length_m = 861.1;
  s.noncav_vph = 1270;
  s.cav_vph = 2500;
  s.seed = 4;
  return s;
}

// Vehicles inside at the end of tick s, recounted from the records.
std::pair<double, double> recount(const ObservationSeries& obs, double at, double condensed) {
  double m = 0, n = 0;
  for (const auto& r : obs.vehicles) {
    if (r.release_s <= at && at < r.passage_s) (r.platoon ? n : m) += r.platoon ? condensed : 1.0;
  }
  return {m, n};
}

}  // namespace

TEST_CASE("schedule interpolates and clamps") {
  const auto ramp = Schedule::ramp(100, 60, 1000);
  CHECK(ramp.at(-5) == 100);
  CHECK(ramp.at(500) == doctest::Approx(80));
  CHECK(ramp.at(2000) == 60);
  CHECK(Schedule::constant(3).at(1e9) == 3);
  CHECK_THROWS_AS(Schedule({{1, 1}, {1, 2}}), ParameterError);
}

TEST_CASE("nominal traverse time") {
  CHECK(nominal_traverse_time(1000, 100) == doctest::Approx(36.0));
  CHECK(nominal_traverse_time(1000, 60) == doctest::Approx(60.0));
  CHECK(nominal_traverse_time(1000, 200) == doctest::Approx(nominal_traverse_time(1000, 100) / 2));
  CHECK_THROWS_AS(nominal_traverse_time(0, 100), DomainError);
  CHECK_THROWS_AS(nominal_traverse_time(1000, 0), DomainError);
}

TEST_CASE("gen_demand") {
  SUBCASE("zero rates give zero demand") {
    auto s = small_scenario();
    s.noncav_vph = 0;
    s.cav_vph = 0;
    for (const auto& in : gen_demand(s).inflows) {
      CHECK(in.a == 0.0);
      CHECK(in.b == 0);
    }
  }
  SUBCASE("one platoon per 100 ticks on average") {
    ScenarioSpec s;
    s.tick_seconds = 1.0;
    s.horizon = 200000;
    s.noncav_vph = 0;
    s.cav_vph = 10 * 36.0;  // 36 platoons per hour
    const auto d = gen_demand(s);
    double platoons = 0;
    for (const auto& in : d.inflows) platoons += in.b / 10;
    const double p = 0.01;
    const double sigma = std::sqrt(p * (1 - p) / s.horizon);
    CHECK(std::abs(platoons / s.horizon - p) <= 3 * sigma);
  }
  SUBCASE("fixed seed reproduces the series") {
    CHECK(gen_demand(small_scenario()) == gen_demand(small_scenario()));
    auto other = small_scenario();
    other.seed = 5;
    CHECK_FALSE(gen_demand(other) == gen_demand(small_scenario()));
  }
  SUBCASE("arrival laws") {
    auto s = small_scenario();
    s.noncav_law = ArrivalLaw::gamma;
    const auto g = gen_demand(s);
    CHECK(std::any_of(g.inflows.begin(), g.inflows.end(), [](const auto& in) { return in.a != std::floor(in.a); }));
    s.platoon_law = ArrivalLaw::poisson;
    s.cav_vph = 20000;
    const auto p = gen_demand(s);
    CHECK(std::any_of(p.inflows.begin(), p.inflows.end(), [](const auto& in) { return in.b > 10; }));
    s.platoon_law = ArrivalLaw::bernoulli;
    CHECK_THROWS_AS(gen_demand(s), ParameterError);
  }
  SUBCASE("negative rates are rejected") {
    auto s = small_scenario();
    s.noncav_vph = -1;
    CHECK_THROWS_AS(gen_demand(s), ParameterError);
  }
}

TEST_CASE("synthetic oracle") {
  const auto s = small_scenario();
  const auto demand = gen_demand(s);
  const auto truth = true_model_params(s);
  const auto exact = synthetic_hqm_oracle(truth, demand, 0.0, 1);
  const auto traj = simulate(truth, demand);
  for (std::size_t t = 0; t < demand.horizon(); ++t) {
    REQUIRE(exact.m[t] == traj.m_hat[static_cast<Index>(t)]);
    REQUIRE(exact.n[t] == traj.n_hat[static_cast<Index>(t)]);
  }
  const auto noisy_a = synthetic_hqm_oracle(truth, demand, 2.0, 9);
  const auto noisy_b = synthetic_hqm_oracle(truth, demand, 2.0, 9);
  CHECK(noisy_a.m == noisy_b.m);
  CHECK(noisy_a.n == noisy_b.n);
  CHECK(noisy_a.m != exact.m);
  for (double v : noisy_a.m) CHECK(v >= 0.0);
  CHECK_THROWS_AS(synthetic_hqm_oracle(truth, demand, -1.0, 1), ParameterError);
}

TEST_CASE("edbm hand cases") {
  ScenarioSpec s;
  s.tick_seconds = 1.0;
  s.horizon = 60;
  s.section_length_m = 100;
  s.truth = {3600.0, 0.9, 2.0, 10};

  SUBCASE("a lone vehicle is not delayed") {
    DemandSeries d{std::vector<Inflow<double>>(60), 1.0, 10};
    d.inflows[0].a = 1.0;
    const auto obs = edbm_simulate(s, d);
    REQUIRE(obs.vehicles.size() == 1);
    CHECK(obs.vehicles[0].delay_s() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("two simultaneous platoons pass 5 s apart") {
    DemandSeries d{std::vector<Inflow<double>>(60), 1.0, 10};
    d.inflows[0].b = 20;
    const auto obs = edbm_simulate(s, d);
    REQUIRE(obs.vehicles.size() == 2);
    CHECK(obs.vehicles[1].passage_s - obs.vehicles[0].passage_s == doctest::Approx(5.0));
  }
}

TEST_CASE("edbm properties") {
  auto s = small_scenario();
  s.blocking_factor = 1.5;
  const auto demand = gen_demand(s);
  const double condensed = s.truth.platoon_size / s.truth.condensation;

  for (double delta : {0.0, 4.0}) {
    const auto obs = edbm_simulate(s, demand, HeadwayPolicy{delta});
    CAPTURE(delta);

    SUBCASE("counts equal entered minus passed") {
      for (std::size_t t = 0; t < demand.horizon(); t += 7) {
        const auto [m, n] = recount(obs, (t + 1) * s.tick_seconds, condensed);
        CHECK(obs.m[t] == doctest::Approx(m));
        CHECK(obs.n[t] == doctest::Approx(n));
      }
    }
    SUBCASE("FIFO within each class") {
      double last_vehicle = -1, last_platoon = -1, entry_vehicle = -1, entry_platoon = -1;
      std::vector<VehicleRecord> by_passage = obs.vehicles;
      for (const auto& r : by_passage) {
        auto& last = r.platoon ? last_platoon : last_vehicle;
        auto& entry = r.platoon ? entry_platoon : entry_vehicle;
        CHECK(r.passage_s >= last);
        CHECK(r.entry_s >= entry);
        last = r.passage_s;
        entry = r.entry_s;
      }
    }
    SUBCASE("server never exceeds capacity") {
      auto recs = obs.vehicles;
      std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.passage_s < b.passage_s; });
      for (std::size_t k = 1; k < recs.size(); ++k) {
        const double service = recs[k - 1].platoon ? 3600.0 * condensed / s.truth.capacity_vph
                                                   : 3600.0 / s.truth.capacity_vph;
        CHECK(recs[k].passage_s - recs[k - 1].passage_s >= service - 1e-9);
      }
    }
    SUBCASE("platoon passages respect the headway") {
      double last = -1e18;
      for (const auto& r : obs.vehicles) {
        if (!r.platoon) continue;
        CHECK(r.passage_s - last >= delta - 1e-9);
        last = r.passage_s;
      }
    }
    SUBCASE("delays are non-negative and the run is reproducible") {
      for (const auto& r : obs.vehicles) CHECK(r.delay_s() >= -1e-9);
      const auto again = edbm_simulate(s, demand, HeadwayPolicy{delta});
      CHECK(again.m == obs.m);
      CHECK(again.n == obs.n);
    }
  }
}

TEST_CASE("edbm: light demand sees almost no delay") {
  auto s = small_scenario();
  s.noncav_vph = 200;
  s.cav_vph = 200;
  const auto obs = edbm_simulate(s, gen_demand(s));
  CHECK(average_delay(obs.vehicles) < 0.2);
}

TEST_CASE("edbm rejects mismatched inputs") {
  auto s = small_scenario();
  DemandSeries d{std::vector<Inflow<double>>(10), 5.0, 5};
  CHECK_THROWS_AS(edbm_simulate(s, d), StructuralError);
  s.truth.capacity_vph = 0.0;
  CHECK_THROWS_AS(edbm_simulate(s, gen_demand(small_scenario())), ParameterError);
}
