#pragma once

#include <cstddef>
#include <vector>

#include "hqm/error.hpp"

namespace hqm {

/// Arrivals during one tick: fluid non-CAV mass `a` and CAV vehicles `b`
/// (a whole number of platoons).
template <typename Scalar = double>
struct Inflow {
  Scalar a = Scalar(0);
  int b = 0;

  bool operator==(const Inflow&) const = default;
};

struct DemandSeries {
  std::vector<Inflow<double>> inflows;
  double tick_seconds = 1.0;
  int platoon_size = 10;

  std::size_t horizon() const { return inflows.size(); }
  bool operator==(const DemandSeries&) const = default;
};

/// Throws ParameterError when an inflow is negative or `b` is not a multiple
/// of the platoon size.
void validate(const DemandSeries& demand);

/// One vehicle, or one platoon of `size` vehicles, passing the bottleneck.
struct VehicleRecord {
  bool platoon = false;
  int size = 1;
  double entry_s = 0.0;      ///< requested entry time
  double release_s = 0.0;    ///< actual entry time after headway gating
  double free_flow_s = 0.0;  ///< traverse time at the entry speed
  double arrival_s = 0.0;    ///< arrival at the bottleneck queue
  double passage_s = 0.0;    ///< start of bottleneck service; the vehicle leaves here
  double delay_s() const { return passage_s - entry_s - free_flow_s; }
};

/// Ground-truth counts per tick. `n` is expressed in condensed
/// (non-CAV-equivalent) units so it is directly comparable with the model.
struct ObservationSeries {
  std::vector<double> m;
  std::vector<double> n;
  std::vector<VehicleRecord> vehicles;

  std::size_t size() const { return m.size(); }
  double total(std::size_t t) const { return m[t] + n[t]; }
};

inline void require_aligned(const DemandSeries& demand, const ObservationSeries& observed) {
  if (observed.m.size() != observed.n.size())
    throw StructuralError("observation series: m and n lengths differ");
  if (demand.horizon() != observed.size())
    throw StructuralError("demand horizon " + std::to_string(demand.horizon()) +
                          " does not match observation length " + std::to_string(observed.size()));
}

}  // namespace hqm
