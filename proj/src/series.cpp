#include "hqm/series.hpp"

#include <cmath>
#include <string>

namespace hqm {

void validate(const DemandSeries& demand) {
  if (!(demand.tick_seconds > 0.0) || !std::isfinite(demand.tick_seconds))
    throw ParameterError("demand: tick_seconds must be > 0");
  if (demand.platoon_size < 1) throw ParameterError("demand: platoon_size must be >= 1");
  for (std::size_t t = 0; t < demand.inflows.size(); ++t) {
    const auto& in = demand.inflows[t];
    if (!(in.a >= 0.0) || !std::isfinite(in.a))
      throw ParameterError("demand: negative non-CAV arrivals at tick " + std::to_string(t));
    if (in.b < 0 || in.b % demand.platoon_size != 0)
      throw ParameterError("demand: CAV arrivals at tick " + std::to_string(t) +
                           " are not a non-negative multiple of the platoon size");
  }
}

}  // namespace hqm
