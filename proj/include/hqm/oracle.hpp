#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "hqm/params.hpp"
#include "hqm/series.hpp"

namespace hqm {

/// Piecewise-linear function of time in seconds, constant outside its knots.
class Schedule {
 public:
  Schedule() = default;
  explicit Schedule(std::vector<std::pair<double, double>> knots);

  static Schedule constant(double value);
  static Schedule ramp(double from, double to, double duration_s);

  double at(double seconds) const;
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }
  bool operator==(const Schedule&) const = default;

 private:
  std::vector<std::pair<double, double>> knots_{{0.0, 1.0}};
};

/// Ground-truth bottleneck parameters used by the oracles.
struct TrueParams {
  double capacity_vph = 4000.0;
  double priority = 0.9;
  double condensation = 3.0;
  int platoon_size = 10;
  bool operator==(const TrueParams&) const = default;
};

/// Per-tick arrival laws. `gamma` draws continuous non-CAV mass with the
/// configured shape; `poisson` platoon counts allow several platoons per tick.
enum class ArrivalLaw { poisson, gamma, bernoulli };

struct HeadwayPolicy {
  double delta_s = 0.0;
};

struct ScenarioSpec {
  double section_length_m = 1000.0;
  Schedule freeflow_kmh = Schedule::constant(100.0);
  std::size_t horizon = 1440;
  double tick_seconds = 5.0;
  TrueParams truth;
  double noncav_vph = 1270.0;
  double cav_vph = 2000.0;
  /// Multiplier applied to both demand rates over time.
  Schedule demand_profile = Schedule::constant(1.0);
  ArrivalLaw noncav_law = ArrivalLaw::poisson;
  double gamma_shape = 2.0;
  ArrivalLaw platoon_law = ArrivalLaw::bernoulli;
  std::uint64_t seed = 1;
  double noise = 0.0;
  /// Extra non-CAV service time factor while a platoon waits at the bottleneck.
  double blocking_factor = 1.0;

  double penetration() const;
  double horizon_seconds() const { return static_cast<double>(horizon) * tick_seconds; }
  bool operator==(const ScenarioSpec&) const = default;
};

void validate(const ScenarioSpec& scenario);

/// Free-flow traverse time in seconds for a section of `length_m` meters at
/// `speed_kmh`.
double nominal_traverse_time(double length_m, double speed_kmh);

/// Poisson non-CAV arrivals and Bernoulli platoon arrivals per tick.
DemandSeries gen_demand(const ScenarioSpec& scenario);

/// Model-generated counts under `truth`, plus optional clamped Gaussian noise.
ObservationSeries synthetic_hqm_oracle(const HqmParams<double>& truth, const DemandSeries& demand, double noise,
                                       std::uint64_t seed);

/// Event-driven two-class bottleneck simulation.
ObservationSeries edbm_simulate(const ScenarioSpec& scenario, const DemandSeries& demand,
                                std::optional<HeadwayPolicy> headway = std::nullopt);

/// Model parameters matching a scenario's ground truth, with the traverse time
/// taken at the free-flow speed of time `at_seconds`.
HqmParams<double> true_model_params(const ScenarioSpec& scenario, double at_seconds = 0.0);

/// Time-average non-CAV bottleneck throughput (veh/hr) over the records.
double noncav_throughput_vph(const ObservationSeries& observed, double duration_s);

}  // namespace hqm
