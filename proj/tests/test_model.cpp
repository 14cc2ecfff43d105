#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "hqm/model.hpp"
#include "reference.hpp"

using namespace hqm;

namespace {

HqmParams<double> params(int T, double rho, double F, double gamma, int l = 10, double dt = 1.0) {
  return {T, rho, F, gamma, l, dt};
}

}  // namespace

TEST_CASE("new_state is the empty highway") {
  for (int T : {1, 3, 37}) {
    const auto s = new_state(params(T, 0.5, 3600, 2));
    CHECK(s.cells() == T);
    CHECK(s.x.isZero());
    CHECK(s.y.isZero());
  }
  CHECK_THROWS_AS(new_state(params(0, 0.5, 3600, 2)), ParameterError);
}

TEST_CASE("discharge examples") {
  const auto p = params(3, 0.5, 3600, 2);
  auto d = discharge(0.0, 0.0, p);
  CHECK(d.f == 0.0);
  CHECK(d.g == 0.0);

  d = discharge(5.0, 5.0, p);
  CHECK(d.f == doctest::Approx(0.5));
  CHECK(d.g == 0.0);

  d = discharge(0.3, 10.0, p);
  CHECK(d.f == doctest::Approx(0.3));
  CHECK(d.g == 0.0);

  // F_tick = 6 with dt = 1 s.
  d = discharge(0.5, 10.0, params(3, 1.0, 21600, 2));
  CHECK(d.f == doctest::Approx(0.5));
  CHECK(d.g == doctest::Approx(5.0));
}

TEST_CASE("discharge rejects bad inputs") {
  CHECK_THROWS_AS(discharge(-1.0, 0.0, params(3, 0.5, 3600, 2)), DomainError);
  CHECK_THROWS_AS(discharge(0.0, 0.0, params(3, 1.5, 3600, 2)), ParameterError);
  CHECK_THROWS_AS(discharge(0.0, 0.0, params(3, 0.5, 3600, 1.0)), ParameterError);
  CHECK_THROWS_AS(discharge(0.0, 0.0, params(3, 0.5, -1, 2)), ParameterError);
}

TEST_CASE("residual exactly one platoon discharges it despite rounding") {
  // cap - f = 10/3 up to floating-point error.
  const auto p = params(2, 0.0, 12000, 3);
  const auto d = discharge(0.0, 10.0 / 3.0, p);
  CHECK(d.g == doctest::Approx(10.0 / 3.0));
}

TEST_CASE("step examples") {
  const auto p = params(3, 0.5, 3600, 2);
  auto [s1, d1] = step(new_state(p), Inflow<double>{2.0, 0}, p);
  CHECK(s1.x == Vector<double>::Map(std::vector<double>{0, 0, 2}.data(), 3));
  CHECK(s1.y.isZero());
  CHECK(d1.f == 0.0);
  CHECK(d1.g == 0.0);

  auto [s2, d2] = step(new_state(p), Inflow<double>{0.0, 10}, p);
  CHECK(s2.y[2] == doctest::Approx(5.0));
  CHECK(s2.y[0] == 0.0);
  CHECK(s2.y[1] == 0.0);

  HqmState<double> s{Vector<double>::Zero(3), Vector<double>::Zero(3)};
  s.x[1] = 3.0;
  auto [s3, d3] = step(s, Inflow<double>{}, p);
  CHECK(s3.x[0] == 3.0);
  CHECK(s3.x[1] == 0.0);
  CHECK(s3.x[2] == 0.0);
  CHECK(d3.f == 0.0);
  auto [s4, d4] = step(s3, Inflow<double>{}, p);
  CHECK(d4.f == doctest::Approx(0.5));
  CHECK(s4.x[0] == doctest::Approx(2.5));
}

TEST_CASE("T = 1 accumulates arrivals in the bottleneck cell") {
  const auto p = params(1, 0.5, 3600, 2);
  auto [s, d] = step(new_state(p), Inflow<double>{2.0, 10}, p);
  CHECK(s.x[0] == 2.0);
  CHECK(s.y[0] == 5.0);
  auto [s2, d2] = step(s, Inflow<double>{}, p);
  CHECK(d2.f == doctest::Approx(0.5));
  CHECK(s2.x[0] == doctest::Approx(1.5));
}

TEST_CASE("step validates shapes and inflow") {
  const auto p = params(3, 0.5, 3600, 2);
  CHECK_THROWS_AS(step(new_state(params(4, 0.5, 3600, 2)), Inflow<double>{}, p), StructuralError);
  CHECK_THROWS_AS(step(new_state(p), Inflow<double>{-1.0, 0}, p), ParameterError);
  CHECK_THROWS_AS(step(new_state(p), Inflow<double>{0.0, 5}, p), ParameterError);
}

TEST_CASE("counts sums cells") {
  HqmState<double> s{Vector<double>(3), Vector<double>(3)};
  s.x << 1, 2, 0;
  s.y << 5, 0, 5;
  const auto c = counts(s);
  CHECK(c.m_hat == 3.0);
  CHECK(c.n_hat == 10.0);
  CHECK(counts(new_state(params(4, 0.5, 3600, 2))).total() == 0.0);

  const auto p = params(10, 0.5, 3600, 2);
  DemandSeries demand{std::vector<Inflow<double>>(5, Inflow<double>{1.0, 0}), 1.0, 10};
  const auto traj = simulate(p, demand);
  CHECK(traj.m_hat[4] == 5.0);
}

TEST_CASE("simulate: zero demand stays empty") {
  DemandSeries demand{std::vector<Inflow<double>>(100), 1.0, 10};
  const auto traj = simulate(params(5, 0.5, 3600, 2), demand);
  CHECK(traj.m_hat.isZero());
  CHECK(traj.n_hat.isZero());
}

TEST_CASE("simulate: steady pipeline holds a*T") {
  const int T = 12;
  const double a = 0.4;  // below rho * F_tick = 0.5
  const auto p = params(T, 0.5, 3600, 2);
  DemandSeries demand{std::vector<Inflow<double>>(200, Inflow<double>{a, 0}), 1.0, 10};
  const auto traj = simulate(p, demand);
  for (Index t = 2 * T; t < traj.size(); ++t) CHECK(traj.m_hat[t] == doctest::Approx(a * T));
}

TEST_CASE("simulate validates its inputs") {
  const auto p = params(3, 0.5, 3600, 2);
  CHECK_THROWS_AS(simulate(p, DemandSeries{{}, 1.0, 10}), DomainError);
  CHECK_THROWS_AS(simulate(p, DemandSeries{{Inflow<double>{}}, 1.0, 5}), StructuralError);
  CHECK_THROWS_AS(simulate(p, DemandSeries{{Inflow<double>{}}, 1.0, 10}, new_state(params(2, 0.5, 3600, 2))),
                  StructuralError);
}

TEST_CASE("simulate agrees with the reference update") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> T_dist(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = params(T_dist(rng), u(rng), 2000 + 20000 * u(rng), 1.5 + 3 * u(rng), 10, 1 + 9 * u(rng));
    DemandSeries demand{{}, p.tick_seconds, 10};
    for (int t = 0; t < 300; ++t) demand.inflows.push_back({4 * u(rng), u(rng) < 0.3 ? 10 : 0});
    const auto traj = simulate(p, demand);
    test::Reference ref(p);
    for (int t = 0; t < 300; ++t) {
      const auto [f, g] = ref.tick(demand.inflows[t].a, demand.inflows[t].b);
      double m = 0, n = 0;
      for (std::size_t k = 0; k < ref.x.size(); ++k) {
        m += ref.x[k];
        n += ref.y[k];
      }
      REQUIRE(traj.f[t] == doctest::Approx(f).epsilon(1e-12));
      REQUIRE(traj.g[t] == doctest::Approx(g).epsilon(1e-12));
      REQUIRE(traj.m_hat[t] == doctest::Approx(m).epsilon(1e-9));
      REQUIRE(traj.n_hat[t] == doctest::Approx(n).epsilon(1e-9));
    }
  }
}

TEST_CASE("full priority blocks platoon discharge") {
  const auto p = params(3, 1.0, 7200, 2);  // F_tick = 2
  const auto d = discharge(3.0, 10.0, p);
  CHECK(d.f == 2.0);
  CHECK(d.g == 0.0);
}

TEST_CASE("single-precision instantiation") {
  const HqmParams<float> p{4, 0.5f, 7200.f, 2.f, 10, 5.f};
  DemandSeries demand{std::vector<Inflow<double>>(50, Inflow<double>{2.0, 10}), 5.0, 10};
  const auto tf = simulate(p, demand);
  const auto td = simulate(p.cast<double>(), demand);
  for (Index t = 0; t < tf.size(); ++t) {
    CHECK(tf.m_hat[t] == doctest::Approx(td.m_hat[t]).epsilon(1e-4));
    CHECK(tf.n_hat[t] == doctest::Approx(td.n_hat[t]).epsilon(1e-4));
  }
}
