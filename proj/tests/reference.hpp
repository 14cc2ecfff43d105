#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "hqm/params.hpp"
#include "hqm/series.hpp"

namespace test {

// Straight-line restatement of the update rules on std::vector, used as a
// reference for the Eigen implementation.
struct Reference {
  std::vector<double> x, y;
  double cap, rho, unit, gamma;

  explicit Reference(const hqm::HqmParams<double>& p)
      : x(p.traverse_ticks, 0.0),
        y(p.traverse_ticks, 0.0),
        cap(p.capacity_vph * p.tick_seconds / 3600.0),
        rho(p.priority),
        unit(p.platoon_size / p.condensation),
        gamma(p.condensation) {}

  std::pair<double, double> tick(double a, int b) {
    const double f = std::min(x[0], rho * cap);
    const double r = std::min(y[0], cap - f);
    double k = std::floor(r / unit);
    if ((k + 1) * unit <= r + 1e-9) k += 1;
    const double g = k * unit;
    const std::size_t T = x.size();
    if (T == 1) {
      x[0] = x[0] + a - f;
      y[0] = y[0] + b / gamma - g;
    } else {
      std::vector<double> nx(T), ny(T);
      nx[0] = x[0] + x[1] - f;
      ny[0] = y[0] + y[1] - g;
      for (std::size_t i = 1; i + 1 < T; ++i) {
        nx[i] = x[i + 1];
        ny[i] = y[i + 1];
      }
      nx[T - 1] = a;
      ny[T - 1] = b / gamma;
      x = nx;
      y = ny;
    }
    return {f, g};
  }
};


/// Mean squared total-count error of the reference model over the first t ticks.
inline double reference_avg_cost(const hqm::HqmParams<double>& p, const hqm::DemandSeries& demand,
                                 const hqm::ObservationSeries& observed, std::size_t t) {
  Reference ref(p);
  double sum = 0.0;
  for (std::size_t k = 0; k < t; ++k) {
    ref.tick(demand.inflows[k].a, demand.inflows[k].b);
    double total = 0.0;
    for (std::size_t i = 0; i < ref.x.size(); ++i) total += ref.x[i] + ref.y[i];
    const double e = total - observed.total(k);
    sum += e * e;
  }
  return sum / static_cast<double>(t);
}

}  // namespace test
