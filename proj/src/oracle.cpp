#include "hqm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "hqm/error.hpp"
#include "hqm/model.hpp"

namespace hqm {

Schedule::Schedule(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
  if (knots_.empty()) throw ParameterError("schedule needs at least one knot");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i].first > knots_[i - 1].first)) throw ParameterError("schedule knots must be strictly increasing");
}

Schedule Schedule::constant(double value) { return Schedule({{0.0, value}}); }

Schedule Schedule::ramp(double from, double to, double duration_s) {
  if (!(duration_s > 0.0)) return constant(to);
  return Schedule({{0.0, from}, {duration_s, to}});
}

double Schedule::at(double seconds) const {
  if (seconds <= knots_.front().first) return knots_.front().second;
  if (seconds >= knots_.back().first) return knots_.back().second;
  const auto hi = std::upper_bound(knots_.begin(), knots_.end(), seconds,
                                   [](double s, const auto& k) { return s < k.first; });
  const auto lo = hi - 1;
  const double w = (seconds - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

double ScenarioSpec::penetration() const {
  const double total = noncav_vph + cav_vph;
  return total > 0.0 ? cav_vph / total : 0.0;
}

void validate(const ScenarioSpec& s) {
  auto fail = [](const std::string& what) { throw ParameterError("scenario: " + what); };
  if (!(s.section_length_m > 0.0)) fail("section_length must be > 0");
  if (s.horizon < 1) fail("horizon must be >= 1");
  if (!(s.tick_seconds > 0.0)) fail("tick_seconds must be > 0");
  for (const auto& [t, v] : s.freeflow_kmh.knots())
    if (!(v > 0.0)) fail("free-flow speed must be > 0 everywhere");
  for (const auto& [t, v] : s.demand_profile.knots())
    if (!(v >= 0.0)) fail("demand profile must be non-negative");
  if (!(s.noncav_vph >= 0.0) || !(s.cav_vph >= 0.0)) fail("demand rates must be non-negative");
  if (!(s.noise >= 0.0)) fail("noise must be >= 0");
  if (!(s.blocking_factor >= 1.0)) fail("blocking_factor must be >= 1");
  if (s.noncav_law == ArrivalLaw::bernoulli) fail("non-CAV arrivals must be poisson or gamma");
  if (s.noncav_law == ArrivalLaw::gamma && !(s.gamma_shape > 0.0)) fail("gamma_shape must be > 0");
  if (s.platoon_law == ArrivalLaw::gamma) fail("platoon arrivals must be bernoulli or poisson");
  if (!(s.truth.capacity_vph >= 0.0)) fail("capacity must be >= 0");
  if (s.truth.priority < 0.0 || s.truth.priority > 1.0) fail("priority must lie in [0, 1]");
  if (!(s.truth.condensation > 1.0)) fail("condensation must be > 1");
  if (s.truth.platoon_size < 1) fail("platoon_size must be >= 1");
}

double nominal_traverse_time(double length_m, double speed_kmh) {
  if (!(length_m > 0.0) || !(speed_kmh > 0.0))
    throw DomainError("nominal traverse time needs positive length and speed");
  return length_m / (speed_kmh / 3.6);
}

DemandSeries gen_demand(const ScenarioSpec& scenario) {
  validate(scenario);
  const double dt = scenario.tick_seconds;
  const int l = scenario.truth.platoon_size;
  DemandSeries demand{{}, dt, l};
  demand.inflows.reserve(scenario.horizon);

  Rng rng(scenario.seed);
  for (std::size_t t = 0; t < scenario.horizon; ++t) {
    const double scale = scenario.demand_profile.at(static_cast<double>(t) * dt);
    const double mean_a = scenario.noncav_vph * scale * dt / kSecondsPerHour;
    const double p_platoon = scenario.cav_vph * scale * dt / (kSecondsPerHour * l);
    if (p_platoon > 1.0 && scenario.platoon_law == ArrivalLaw::bernoulli)
      throw ParameterError("scenario: CAV rate exceeds one platoon per tick; lower cav_vph or tick_seconds");
    Inflow<double> in;
    if (mean_a > 0.0) {
      if (scenario.noncav_law == ArrivalLaw::gamma) {
        const double k = scenario.gamma_shape;
        in.a = std::gamma_distribution<double>(k, mean_a / k)(rng);
      } else {
        in.a = static_cast<double>(std::poisson_distribution<int>(mean_a)(rng));
      }
    }
    if (p_platoon > 0.0) {
      const int platoons = scenario.platoon_law == ArrivalLaw::poisson
                               ? std::poisson_distribution<int>(p_platoon)(rng)
                               : static_cast<int>(std::bernoulli_distribution(p_platoon)(rng));
      in.b = platoons * l;
    }
    demand.inflows.push_back(in);
  }
  return demand;
}

ObservationSeries synthetic_hqm_oracle(const HqmParams<double>& truth, const DemandSeries& demand, double noise,
                                       std::uint64_t seed) {
  if (!(noise >= 0.0)) throw ParameterError("oracle noise must be >= 0");
  const auto traj = simulate(truth, demand);
  ObservationSeries obs;
  obs.m.assign(traj.m_hat.data(), traj.m_hat.data() + traj.size());
  obs.n.assign(traj.n_hat.data(), traj.n_hat.data() + traj.size());
  if (noise > 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);
    for (std::size_t t = 0; t < obs.size(); ++t) {
      obs.m[t] = std::max(0.0, obs.m[t] + gauss(rng));
      obs.n[t] = std::max(0.0, obs.n[t] + gauss(rng));
    }
  }
  return obs;
}

namespace {

// Independent stream for server decisions so they do not alias demand draws.
constexpr std::uint64_t kServerStream = 0x9e3779b97f4a7c15ULL;

struct Unit {
  double entry;
  double release;
  double free_flow;
  double arrival;
};

// Expands per-tick demand into individual entries at uniformly random instants
// within their tick. Fractional non-CAV mass is carried over to later ticks.
std::vector<double> entry_times(const DemandSeries& demand, bool platoons, Rng& rng) {
  std::vector<double> times;
  std::uniform_real_distribution<double> offset(0.0, 1.0);
  const double dt = demand.tick_seconds;
  double carried = 0.0;
  std::vector<double> tick;
  for (std::size_t t = 0; t < demand.horizon(); ++t) {
    const auto& in = demand.inflows[t];
    long count = 0;
    if (platoons) {
      count = in.b / demand.platoon_size;
    } else {
      carried += in.a;
      count = static_cast<long>(std::floor(carried + 1e-9));
      carried -= static_cast<double>(count);
    }
    tick.clear();
    for (long k = 0; k < count; ++k) tick.push_back((static_cast<double>(t) + offset(rng)) * dt);
    std::sort(tick.begin(), tick.end());
    times.insert(times.end(), tick.begin(), tick.end());
  }
  return times;
}

std::vector<Unit> schedule_units(const std::vector<double>& entries, const ScenarioSpec& scenario, double gap) {
  std::vector<Unit> units;
  units.reserve(entries.size());
  double last_release = -std::numeric_limits<double>::infinity();
  double last_arrival = -std::numeric_limits<double>::infinity();
  for (double e : entries) {
    const double release = std::max(e, last_release + gap);
    const double ff = nominal_traverse_time(scenario.section_length_m, scenario.freeflow_kmh.at(release));
    // FIFO within a class: nobody overtakes on the approach.
    const double arrival = std::max(release + ff, last_arrival);
    units.push_back({e, release, ff, arrival});
    last_release = release;
    last_arrival = arrival;
  }
  return units;
}

}  // namespace

ObservationSeries edbm_simulate(const ScenarioSpec& scenario, const DemandSeries& demand,
                                std::optional<HeadwayPolicy> headway) {
  validate(scenario);
  validate(demand);
  if (!(scenario.truth.capacity_vph > 0.0)) throw ParameterError("edbm: capacity must be > 0");
  if (demand.platoon_size != scenario.truth.platoon_size)
    throw StructuralError("edbm: demand platoon size differs from scenario platoon size");
  const double delta = headway ? headway->delta_s : 0.0;
  if (!(delta >= 0.0)) throw ParameterError("edbm: headway must be >= 0");

  const auto& truth = scenario.truth;
  const double service_vehicle = kSecondsPerHour / truth.capacity_vph;
  const double service_platoon = truth.platoon_size * kSecondsPerHour / (truth.condensation * truth.capacity_vph);

  Rng rng(scenario.seed ^ kServerStream);
  const auto vehicle_entries = entry_times(demand, false, rng);
  const auto platoon_entries = entry_times(demand, true, rng);
  const auto vehicles = schedule_units(vehicle_entries, scenario, 0.0);
  const auto platoons = schedule_units(platoon_entries, scenario, delta);

  ObservationSeries obs;
  obs.vehicles.reserve(vehicles.size() + platoons.size());
  std::bernoulli_distribution pick_vehicle(truth.priority);

  const double inf = std::numeric_limits<double>::infinity();
  double now = 0.0;
  double last_platoon_passage = -inf;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < vehicles.size() || j < platoons.size()) {
    const double vehicle_ready = i < vehicles.size() ? vehicles[i].arrival : inf;
    const double platoon_ready = j < platoons.size() ? std::max(platoons[j].arrival, last_platoon_passage + delta) : inf;
    now = std::max(now, std::min(vehicle_ready, platoon_ready));
    const bool vehicle_ok = vehicle_ready <= now;
    const bool platoon_ok = platoon_ready <= now;

    bool serve_vehicle = vehicle_ok;
    if (vehicle_ok && platoon_ok) serve_vehicle = pick_vehicle(rng);

    if (serve_vehicle) {
      const auto& u = vehicles[i++];
      obs.vehicles.push_back({false, 1, u.entry, u.release, u.free_flow, u.arrival, now});
      // A platoon queued at the lane drop obstructs the remaining lanes.
      const bool blocked = platoon_ok;
      now += service_vehicle * (blocked ? scenario.blocking_factor : 1.0);
    } else {
      const auto& u = platoons[j++];
      obs.vehicles.push_back({true, truth.platoon_size, u.entry, u.release, u.free_flow, u.arrival, now});
      last_platoon_passage = now;
      now += service_platoon;
    }
  }

  // Vehicles on the section at the end of each tick: release <= sample < passage.
  const std::size_t horizon = demand.horizon();
  const double dt = demand.tick_seconds;
  std::vector<double> dm(horizon + 1, 0.0);
  std::vector<double> dn(horizon + 1, 0.0);
  const double condensed = truth.platoon_size / truth.condensation;
  for (const auto& r : obs.vehicles) {
    // First sample index s with (s + 1) dt >= release, first with (s + 1) dt >= passage.
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(r.release_s / dt) - 1.0));
    const double last_d = std::ceil(r.passage_s / dt) - 1.0;
    const std::size_t stop = last_d < 0.0 ? 0 : std::min(horizon, static_cast<std::size_t>(last_d));
    if (first >= stop) continue;
    auto& d = r.platoon ? dn : dm;
    const double w = r.platoon ? condensed : 1.0;
    d[first] += w;
    d[stop] -= w;
  }
  obs.m.assign(horizon, 0.0);
  obs.n.assign(horizon, 0.0);
  double m = 0.0;
  double n = 0.0;
  for (std::size_t s = 0; s < horizon; ++s) {
    m += dm[s];
    n += dn[s];
    obs.m[s] = std::abs(m) < 1e-9 ? 0.0 : m;
    obs.n[s] = std::abs(n) < 1e-9 ? 0.0 : n;
  }
  return obs;
}

HqmParams<double> true_model_params(const ScenarioSpec& scenario, double at_seconds) {
  const double traverse = nominal_traverse_time(scenario.section_length_m, scenario.freeflow_kmh.at(at_seconds));
  return {traverse_ticks_from_seconds(traverse, scenario.tick_seconds),
          scenario.truth.priority,
          scenario.truth.capacity_vph,
          scenario.truth.condensation,
          scenario.truth.platoon_size,
          scenario.tick_seconds};
}

double noncav_throughput_vph(const ObservationSeries& observed, double duration_s) {
  if (!(duration_s > 0.0)) throw DomainError("throughput needs a positive duration");
  std::size_t passed = 0;
  for (const auto& r : observed.vehicles)
    if (!r.platoon && r.passage_s < duration_s) ++passed;
  return static_cast<double>(passed) * kSecondsPerHour / duration_s;
}

}  // namespace hqm
