#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "hqm/error.hpp"
#include "hqm/params.hpp"
#include "hqm/series.hpp"
#include "hqm/types.hpp"

namespace hqm {

/// Non-CAV mass `x` and condensed CAV mass `y` per cell; index 0 is the
/// bottleneck cell.
template <typename Scalar = double>
struct HqmState {
  Vector<Scalar> x;
  Vector<Scalar> y;

  Index cells() const { return x.size(); }
};

template <typename Scalar = double>
struct DischargeRecord {
  Scalar f = Scalar(0);
  Scalar g = Scalar(0);
};

template <typename Scalar = double>
struct Counts {
  Scalar m_hat = Scalar(0);
  Scalar n_hat = Scalar(0);
  Scalar total() const { return m_hat + n_hat; }
};

/// Per-tick output of a simulation run.
template <typename Scalar = double>
struct Trajectory {
  Vector<Scalar> m_hat;
  Vector<Scalar> n_hat;
  Vector<Scalar> f;
  Vector<Scalar> g;

  Index size() const { return m_hat.size(); }
};

/// Empty highway.
template <typename Scalar>
HqmState<Scalar> new_state(const HqmParams<Scalar>& params) {
  validate(params);
  const Index n = params.traverse_ticks;
  return {Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n)};
}

/// Rounds `value` to the nearest multiple of `unit`.
template <typename Scalar>
Scalar snap_to_multiple(Scalar value, Scalar unit) {
  using std::round;
  return round(value / unit) * unit;
}

template <typename Scalar>
bool is_multiple_of(Scalar value, Scalar unit, double tol = kTolerance) {
  using std::abs;
  return abs(double(value - snap_to_multiple(value, unit))) <= tol;
}

namespace detail {

template <typename Scalar>
DischargeRecord<Scalar> discharge_unchecked(Scalar x1, Scalar y1, const HqmParams<Scalar>& params) {
  using std::floor;
  using std::max;
  using std::min;
  const Scalar cap = params.capacity_per_tick();
  const Scalar unit = params.platoon_unit();
  const Scalar f = min(x1, params.priority * cap);
  // Whole platoons only; the residual is floored to multiples of l/gamma.
  const Scalar residual = max(Scalar(0), min(y1, cap - f));
  Scalar platoons = floor(residual / unit);
  if ((platoons + Scalar(1)) * unit <= residual + Scalar(kTolerance)) platoons += Scalar(1);
  return {f, platoons * unit};
}

}  // namespace detail

/// Bottleneck discharge for the current contents of cell 1.
template <typename Scalar>
DischargeRecord<Scalar> discharge(Scalar x1, Scalar y1, const HqmParams<Scalar>& params) {
  validate(params);
  if (x1 < Scalar(0) || y1 < Scalar(0)) throw DomainError("discharge: cell contents must be non-negative");
  return detail::discharge_unchecked(x1, y1, params);
}

/// Advances `state` by one tick in place and returns the discharge.
/// Parameters are assumed valid; used by the replay loops.
template <typename Scalar>
DischargeRecord<Scalar> advance(HqmState<Scalar>& state, const Inflow<Scalar>& inflow,
                                const HqmParams<Scalar>& params) {
  const Index cells = state.cells();
  const Scalar unit = params.platoon_unit();
  const auto out = detail::discharge_unchecked(state.x[0], state.y[0], params);
  const Scalar b_condensed = Scalar(inflow.b) / params.condensation;

  if (cells == 1) {
    state.x[0] = state.x[0] + inflow.a - out.f;
    state.y[0] = snap_to_multiple(state.y[0] + b_condensed - out.g, unit);
    return out;
  }
  state.x[0] = state.x[0] + state.x[1] - out.f;
  state.y[0] = snap_to_multiple(state.y[0] + state.y[1] - out.g, unit);
  if (cells > 2) {
    // Pure delay cells: shift one cell downstream.
    std::copy(state.x.data() + 2, state.x.data() + cells, state.x.data() + 1);
    std::copy(state.y.data() + 2, state.y.data() + cells, state.y.data() + 1);
  }
  state.x[cells - 1] = inflow.a;
  state.y[cells - 1] = snap_to_multiple(b_condensed, unit);
  return out;
}

/// One HQM update. Returns the successor state together with the discharge
/// taken from cell 1 during this tick.
template <typename Scalar>
std::pair<HqmState<Scalar>, DischargeRecord<Scalar>> step(HqmState<Scalar> state, const Inflow<Scalar>& inflow,
                                                          const HqmParams<Scalar>& params) {
  validate(params);
  if (state.x.size() != params.traverse_ticks || state.y.size() != params.traverse_ticks)
    throw StructuralError("step: state has " + std::to_string(state.x.size()) + "/" +
                          std::to_string(state.y.size()) + " cells, parameters expect " +
                          std::to_string(params.traverse_ticks));
  if (inflow.a < Scalar(0) || inflow.b < 0 || inflow.b % params.platoon_size != 0)
    throw ParameterError("step: inflow must satisfy a >= 0 and b a non-negative multiple of l");
  auto out = advance(state, inflow, params);
  return {std::move(state), out};
}

template <typename Scalar>
Counts<Scalar> counts(const HqmState<Scalar>& state) {
  return {state.x.sum(), state.y.sum()};
}

/// Runs the model over `demand`, calling `visit(tick, counts, discharge)` after
/// every step. This is the allocation-free path used by the estimator.
template <typename Scalar, typename Visitor>
void replay(const HqmParams<Scalar>& params, const DemandSeries& demand, HqmState<Scalar> state,
            std::size_t ticks, Visitor&& visit) {
  for (std::size_t t = 0; t < ticks; ++t) {
    const auto& in = demand.inflows[t];
    const auto out = advance(state, Inflow<Scalar>{Scalar(in.a), in.b}, params);
    visit(t, counts(state), out);
  }
}

/// Batch driver. Entry t reports the counts after the t-th step.
template <typename Scalar>
Trajectory<Scalar> simulate(const HqmParams<Scalar>& params, const DemandSeries& demand,
                            const HqmState<Scalar>& initial) {
  validate(params);
  validate(demand);
  if (demand.horizon() == 0) throw DomainError("simulate: demand must cover at least one tick");
  if (initial.x.size() != params.traverse_ticks || initial.y.size() != params.traverse_ticks)
    throw StructuralError("simulate: initial state length does not match traverse_ticks");
  if (demand.platoon_size != params.platoon_size)
    throw StructuralError("simulate: demand platoon size differs from model platoon size");

  const Index n = static_cast<Index>(demand.horizon());
  Trajectory<Scalar> traj{Vector<Scalar>(n), Vector<Scalar>(n), Vector<Scalar>(n), Vector<Scalar>(n)};
  replay(params, demand, initial, demand.horizon(),
         [&](std::size_t t, const Counts<Scalar>& c, const DischargeRecord<Scalar>& d) {
           const auto i = static_cast<Index>(t);
           traj.m_hat[i] = c.m_hat;
           traj.n_hat[i] = c.n_hat;
           traj.f[i] = d.f;
           traj.g[i] = d.g;
         });
  return traj;
}

template <typename Scalar>
Trajectory<Scalar> simulate(const HqmParams<Scalar>& params, const DemandSeries& demand) {
  return simulate(params, demand, new_state(params));
}

}  // namespace hqm
