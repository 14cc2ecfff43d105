#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hqm/oracle.hpp"
#include "hqm/series.hpp"

namespace hqm {

/// Minimum interval (seconds) between consecutive platoons at the bottleneck
/// for which platoons use only the capacity left over by the background flow:
/// (l / gamma) * 3600 / (F - background).
///
/// Throws InfeasibleError when `background_vph >= capacity_vph`.
double optimal_headway(int platoon_size, double condensation, double capacity_vph, double background_vph);

/// Smallest whole number of ticks covering `delta_s`.
long headway_ticks(double delta_s, double tick_seconds);

/// Defers platoon arrivals so that consecutive platoon entries are at least
/// headway_ticks() apart. Order and count are preserved; platoons that no
/// longer fit in the horizon are released in appended ticks with no non-CAV
/// arrivals.
DemandSeries apply_headway(const DemandSeries& demand, const HeadwayPolicy& policy);

/// Mean delay per vehicle; a platoon counts as `size` vehicles.
double average_delay(std::span<const VehicleRecord> records);

struct SweepRow {
  double delta_s = 0.0;
  double avg_delay_s = 0.0;
  std::size_t n_vehicles = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double argmin_delta_s = 0.0;
};

/// Evaluates every headway on the grid with the same demand and seed.
SweepResult sweep_headway(const ScenarioSpec& scenario, const DemandSeries& demand, std::span<const double> grid,
                          int threads = 1);

/// Evenly spaced grid from `lo` to `hi` inclusive.
std::vector<double> headway_grid(double lo, double hi, double step);

}  // namespace hqm
