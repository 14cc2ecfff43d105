#include "hqm/regulator.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "hqm/error.hpp"
#include "hqm/types.hpp"

namespace hqm {

double optimal_headway(int platoon_size, double condensation, double capacity_vph, double background_vph) {
  if (platoon_size < 1) throw ParameterError("optimal_headway: platoon size must be >= 1");
  if (!(condensation > 0.0)) throw ParameterError("optimal_headway: condensation must be > 0");
  if (!(background_vph >= 0.0)) throw ParameterError("optimal_headway: background flow must be >= 0");
  if (!(capacity_vph > background_vph))
    throw InfeasibleError("optimal_headway: capacity does not exceed the background flow");
  return (platoon_size / condensation) * kSecondsPerHour / (capacity_vph - background_vph);
}

long headway_ticks(double delta_s, double tick_seconds) {
  if (!(delta_s >= 0.0)) throw ParameterError("headway must be >= 0");
  if (!(tick_seconds > 0.0)) throw ParameterError("tick_seconds must be > 0");
  return std::max(0L, static_cast<long>(std::ceil(delta_s / tick_seconds - 1e-9)));
}

DemandSeries apply_headway(const DemandSeries& demand, const HeadwayPolicy& policy) {
  validate(demand);
  const long gap = headway_ticks(policy.delta_s, demand.tick_seconds);
  if (gap == 0) return demand;

  const int l = demand.platoon_size;
  DemandSeries out{{}, demand.tick_seconds, l};
  out.inflows.reserve(demand.horizon());
  long pending = 0;
  long last_release = -gap;
  for (long t = 0;; ++t) {
    const bool inside = t < static_cast<long>(demand.horizon());
    if (!inside && pending == 0) break;
    Inflow<double> in;
    if (inside) {
      in.a = demand.inflows[t].a;
      pending += demand.inflows[t].b / l;
    }
    if (pending > 0 && t - last_release >= gap) {
      in.b = l;
      --pending;
      last_release = t;
    }
    out.inflows.push_back(in);
  }
  return out;
}

double average_delay(std::span<const VehicleRecord> records) {
  if (records.empty()) throw DomainError("average_delay: no vehicle records");
  double weighted = 0.0;
  double vehicles = 0.0;
  for (const auto& r : records) {
    weighted += r.size * r.delay_s();
    vehicles += r.size;
  }
  return weighted / vehicles;
}

SweepResult sweep_headway(const ScenarioSpec& scenario, const DemandSeries& demand, std::span<const double> grid,
                          int threads) {
  if (grid.empty()) throw DomainError("sweep: empty headway grid");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw DomainError("sweep: grid must be strictly increasing");

  SweepResult result;
  result.rows.resize(grid.size());
  auto run = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < grid.size(); k += stride) {
      const auto obs = edbm_simulate(scenario, demand, HeadwayPolicy{grid[k]});
      std::size_t vehicles = 0;
      for (const auto& r : obs.vehicles) vehicles += static_cast<std::size_t>(r.size);
      result.rows[k] = {grid[k], average_delay(obs.vehicles), vehicles};
    }
  };
  const auto workers = static_cast<std::size_t>(std::clamp<int>(threads, 1, static_cast<int>(grid.size())));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }

  // Ties go to the smaller headway.
  const auto best = std::min_element(result.rows.begin(), result.rows.end(),
                                     [](const SweepRow& a, const SweepRow& b) { return a.avg_delay_s < b.avg_delay_s; });
  result.argmin_delta_s = best->delta_s;
  return result;
}

std::vector<double> headway_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw DomainError("headway grid: need step > 0 and hi >= lo");
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= n; ++k) grid.push_back(lo + static_cast<double>(k) * step);
  return grid;
}

}  // namespace hqm
