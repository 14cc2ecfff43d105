#pragma once

#include <cmath>
#include <string>

#include "hqm/error.hpp"
#include "hqm/types.hpp"

namespace hqm {

/// Parameters of the hybrid queuing model.
///
/// Flows are stored in veh/hr and converted to per-tick quantities through
/// `tick_seconds`. Cell 1 (index 0) is the bottleneck, cell T (index T-1) the
/// entrance.
template <typename Scalar = double>
struct HqmParams {
  int traverse_ticks = 37;
  Scalar priority = Scalar(0.5);
  Scalar capacity_vph = Scalar(3600);
  Scalar condensation = Scalar(2);
  int platoon_size = 10;
  Scalar tick_seconds = Scalar(1);

  /// Capacity expressed in vehicles per tick.
  Scalar capacity_per_tick() const { return capacity_vph * tick_seconds / Scalar(kSecondsPerHour); }

  /// Condensed mass of one platoon, l / gamma.
  Scalar platoon_unit() const { return Scalar(platoon_size) / condensation; }

  template <typename Other>
  HqmParams<Other> cast() const {
    return {traverse_ticks, Other(priority),     Other(capacity_vph),
            Other(condensation), platoon_size, Other(tick_seconds)};
  }

  bool operator==(const HqmParams&) const = default;
};

template <typename Scalar>
void validate(const HqmParams<Scalar>& p) {
  using std::isfinite;
  auto fail = [](const std::string& what) { throw ParameterError("invalid HQM parameters: " + what); };
  if (p.traverse_ticks < 1) fail("traverse_ticks must be >= 1");
  if (!isfinite(double(p.priority)) || p.priority < Scalar(0) || p.priority > Scalar(1))
    fail("priority must lie in [0, 1]");
  if (!isfinite(double(p.capacity_vph)) || p.capacity_vph < Scalar(0)) fail("capacity must be >= 0");
  if (!isfinite(double(p.condensation)) || !(p.condensation > Scalar(1))) fail("condensation must be > 1");
  if (p.platoon_size < 1) fail("platoon_size must be >= 1");
  if (!isfinite(double(p.tick_seconds)) || !(p.tick_seconds > Scalar(0))) fail("tick_seconds must be > 0");
}

/// Rounds a continuous traverse time (seconds) to whole ticks, at least one.
inline int traverse_ticks_from_seconds(double seconds, double tick_seconds) {
  const long ticks = std::lround(seconds / tick_seconds);
  return ticks < 1 ? 1 : static_cast<int>(ticks);
}

}  // namespace hqm
