#include "hqm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "hqm/error.hpp"
#include "hqm/model.hpp"

namespace hqm {

HqmParams<double> to_params(const Theta& theta, const ModelConstants& constants) {
  return {theta.traverse_ticks, theta.priority,         theta.capacity_vph,
          theta.condensation,   constants.platoon_size, constants.tick_seconds};
}

Theta theta_of(const HqmParams<double>& params) {
  return {params.traverse_ticks, params.priority, params.capacity_vph, params.condensation};
}

void validate(const TrainConfig& cfg) {
  if (cfg.epsilon && !(*cfg.epsilon > 0.0)) throw ParameterError("train config: epsilon must be > 0");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw ParameterError("train config: alpha must lie in (0, 1]");
  if (cfg.candidates_per_iter < 1) throw ParameterError("train config: candidates_per_iter must be >= 1");
  if (cfg.max_iters < 1) throw ParameterError("train config: max_iters must be >= 1");
  if (cfg.step_sizes.traverse_ticks < 0 || cfg.step_sizes.priority < 0.0 || cfg.step_sizes.capacity_vph < 0.0 ||
      cfg.step_sizes.condensation < 0.0)
    throw ParameterError("train config: step sizes must be non-negative");
  if (cfg.threads < 1) throw ParameterError("train config: threads must be >= 1");
}

Theta TrainingHistory::theta_at(std::size_t t, const Theta& fallback) const {
  Theta current = fallback;
  for (const auto& e : entries) {
    if (e.tick > t) break;
    current = e.theta;
  }
  return current;
}

double average_cost(std::span<const double> costs) {
  if (costs.empty()) throw DomainError("average cost needs t >= 1");
  double sum = 0.0;
  for (double c : costs) sum += c;
  return sum / static_cast<double>(costs.size());
}

double discounted_cost(std::span<const double> costs, double alpha) {
  if (costs.empty()) throw DomainError("discounted cost needs t >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("discount factor must lie in (0, 1]");
  double acc = 0.0;
  for (double c : costs) acc = alpha * acc + c;
  return acc;
}

namespace {

void check_window(const DemandSeries& demand, const ObservationSeries& observed, std::size_t t) {
  require_aligned(demand, observed);
  if (t == 0) throw DomainError("cost: t must be >= 1");
  if (t > demand.horizon())
    throw DomainError("cost: t = " + std::to_string(t) + " exceeds series length " +
                      std::to_string(demand.horizon()));
}

// Replays the model once and feeds each per-tick cost to `sink`.
template <typename Sink>
void replay_costs(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                  const ObservationSeries& observed, std::size_t t, Sink&& sink) {
  const auto params = to_params(theta, constants);
  validate(params);
  replay(params, demand, new_state(params), t,
         [&](std::size_t tick, const Counts<double>& c, const DischargeRecord<double>&) {
           sink(one_step_cost(c.total(), observed.total(tick)));
         });
}

}  // namespace

std::vector<double> cost_series(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                                const ObservationSeries& observed, std::size_t t) {
  check_window(demand, observed, t);
  std::vector<double> costs;
  costs.reserve(t);
  replay_costs(theta, constants, demand, observed, t, [&](double c) { costs.push_back(c); });
  return costs;
}

double one_step_cost(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                     const ObservationSeries& observed, std::size_t t) {
  check_window(demand, observed, t);
  double last = 0.0;
  replay_costs(theta, constants, demand, observed, t, [&](double c) { last = c; });
  return last;
}

double cost_avg(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                const ObservationSeries& observed, std::size_t t) {
  check_window(demand, observed, t);
  double sum = 0.0;
  replay_costs(theta, constants, demand, observed, t, [&](double c) { sum += c; });
  return sum / static_cast<double>(t);
}

double cost_discounted(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                       const ObservationSeries& observed, std::size_t t, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("discount factor must lie in (0, 1]");
  check_window(demand, observed, t);
  double acc = 0.0;
  replay_costs(theta, constants, demand, observed, t, [&](double c) { acc = alpha * acc + c; });
  return acc;
}

double training_cost(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                     const ObservationSeries& observed, std::size_t t, const TrainConfig& cfg, CostMode mode) {
  return mode == CostMode::stationary ? cost_avg(theta, constants, demand, observed, t)
                                      : cost_discounted(theta, constants, demand, observed, t, cfg.alpha);
}

Theta project(Theta theta, const ThetaBounds& bounds) {
  theta.traverse_ticks = std::clamp(theta.traverse_ticks, 1, bounds.max_traverse_ticks);
  theta.priority = std::clamp(theta.priority, 0.0, 1.0);
  theta.capacity_vph = std::max(theta.capacity_vph, 0.0);
  theta.condensation = std::max(theta.condensation, bounds.min_condensation);
  return theta;
}

namespace {

Theta offset(const Theta& base, const StepSizes& s, int dt, int drho, int dF, int dgamma) {
  Theta c = base;
  c.traverse_ticks += dt * s.traverse_ticks;
  c.priority += drho * s.priority;
  c.capacity_vph += dF * s.capacity_vph;
  c.condensation += dgamma * s.condensation;
  return c;
}

}  // namespace

std::vector<Theta> perturb(const Theta& theta, const TrainConfig& cfg, Rng& rng) {
  const auto& s = cfg.step_sizes;
  std::vector<Theta> out;
  out.push_back(project(theta, cfg.bounds));

  if (cfg.exhaustive) {
    // Full stencil over the coordinates that actually move.
    const int span_t = s.traverse_ticks > 0 ? 1 : 0;
    const int span_r = s.priority > 0.0 ? 1 : 0;
    const int span_f = s.capacity_vph > 0.0 ? 1 : 0;
    const int span_g = s.condensation > 0.0 ? 1 : 0;
    for (int a = -span_t; a <= span_t; ++a)
      for (int b = -span_r; b <= span_r; ++b)
        for (int c = -span_f; c <= span_f; ++c)
          for (int d = -span_g; d <= span_g; ++d) {
            if (a == 0 && b == 0 && c == 0 && d == 0) continue;
            out.push_back(project(offset(theta, s, a, b, c, d), cfg.bounds));
          }
    return out;
  }

  std::uniform_int_distribution<int> sign(-1, 1);
  const bool train_gamma = s.condensation > 0.0;
  for (int k = 0; k < cfg.candidates_per_iter; ++k) {
    const int a = sign(rng);
    const int b = sign(rng);
    const int c = sign(rng);
    const int d = train_gamma ? sign(rng) : 0;
    out.push_back(project(offset(theta, s, a, b, c, d), cfg.bounds));
  }
  return out;
}

namespace {

// Costs for candidates[1..]; slot 0 is the incumbent and is filled by the caller.
std::vector<double> evaluate(const std::vector<Theta>& candidates, double incumbent_cost,
                             const ModelConstants& constants, const DemandSeries& demand,
                             const ObservationSeries& observed, std::size_t t, const TrainConfig& cfg,
                             CostMode mode) {
  std::vector<double> costs(candidates.size(), incumbent_cost);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < candidates.size(); i += stride) {
      costs[i] = candidates[i] == candidates[0]
                     ? incumbent_cost
                     : training_cost(candidates[i], constants, demand, observed, t, cfg, mode);
    }
  };
  const auto workers = static_cast<std::size_t>(std::min<int>(cfg.threads, static_cast<int>(candidates.size()) - 1));
  if (workers <= 1) {
    work(1, 1);
    return costs;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, 1 + w, workers);
  pool.clear();  // joins
  return costs;
}

}  // namespace

TrainStepResult train_step(const Theta& theta_prev, const ModelConstants& constants, const DemandSeries& demand,
                           const ObservationSeries& observed, std::size_t t, const TrainConfig& cfg, CostMode mode,
                           Rng& rng) {
  validate(cfg);
  Theta current = project(theta_prev, cfg.bounds);
  double current_cost = training_cost(current, constants, demand, observed, t, cfg, mode);
  const double eps = cfg.epsilon ? *cfg.epsilon : 1e-3 * std::max(current_cost, 1e-6);

  HistoryEntry entry;
  entry.tick = t;
  entry.initial_cost = current_cost;
  entry.evaluations = 1;
  entry.accepted_costs.push_back(current_cost);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    ++entry.iterations;
    const auto candidates = perturb(current, cfg, rng);
    const auto costs = evaluate(candidates, current_cost, constants, demand, observed, t, cfg, mode);
    entry.evaluations += static_cast<int>(candidates.size()) - 1;
    // First minimum wins, so ties go to generation order.
    const auto best = static_cast<std::size_t>(std::min_element(costs.begin(), costs.end()) - costs.begin());
    if (!(costs[best] <= current_cost - eps)) break;
    current = candidates[best];
    current_cost = costs[best];
    entry.accepted_costs.push_back(current_cost);
  }

  entry.theta = current;
  entry.cost = current_cost;
  return {current, entry};
}

TrainStepResult train_step(const Theta& theta_prev, const ModelConstants& constants, const DemandSeries& demand,
                           const ObservationSeries& observed, std::size_t t, const TrainConfig& cfg,
                           CostMode mode) {
  Rng rng(cfg.seed);
  return train_step(theta_prev, constants, demand, observed, t, cfg, mode, rng);
}

TrainingHistory run_online_training(const DemandSeries& demand, const ObservationSeries& observed,
                                    const ModelConstants& constants, const TrainConfig& cfg, const Theta& theta0,
                                    CostMode mode, std::size_t retrain_every) {
  require_aligned(demand, observed);
  if (retrain_every == 0) throw ParameterError("retrain_every must be >= 1");
  validate(cfg);

  TrainingHistory history;
  Rng rng(cfg.seed);
  Theta theta = theta0;
  const std::size_t horizon = demand.horizon();
  for (std::size_t t = retrain_every;; t += retrain_every) {
    const std::size_t tick = std::min(t, horizon);
    if (tick == 0) break;
    auto result = train_step(theta, constants, demand, observed, tick, cfg, mode, rng);
    theta = result.theta;
    history.entries.push_back(std::move(result.entry));
    if (tick == horizon) break;
  }
  return history;
}

}  // namespace hqm
