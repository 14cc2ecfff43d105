#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hqm/params.hpp"
#include "hqm/series.hpp"

namespace hqm {

/// Trainable parameters. `condensation` is only perturbed when its step size
/// is positive.
struct Theta {
  int traverse_ticks = 37;
  double priority = 0.5;
  double capacity_vph = 3600.0;
  double condensation = 2.0;

  bool operator==(const Theta&) const = default;
};

/// Parameters that are never learned.
struct ModelConstants {
  int platoon_size = 10;
  double tick_seconds = 1.0;
};

HqmParams<double> to_params(const Theta& theta, const ModelConstants& constants);
Theta theta_of(const HqmParams<double>& params);

struct StepSizes {
  int traverse_ticks = 1;
  double priority = 0.05;
  double capacity_vph = 100.0;
  double condensation = 0.0;  ///< 0 keeps the condensation factor fixed
};

/// Box that every candidate is projected into.
struct ThetaBounds {
  int max_traverse_ticks = 100000;
  double min_condensation = 1.0 + 1e-6;
};

enum class CostMode { stationary, nonstationary };

struct TrainConfig {
  /// Termination threshold on cost improvement. When unset, each train step
  /// uses 1e-3 times its initial cost (floored at 1e-6).
  std::optional<double> epsilon;
  double alpha = 0.98;
  int candidates_per_iter = 8;
  StepSizes step_sizes;
  ThetaBounds bounds;
  int max_iters = 50;
  std::uint64_t seed = 1;
  /// Enumerate the full {-step, 0, +step} stencil instead of sampling it.
  bool exhaustive = false;
  int threads = 1;
};

void validate(const TrainConfig& cfg);

struct HistoryEntry {
  std::size_t tick = 0;
  Theta theta;
  double cost = 0.0;
  double initial_cost = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> accepted_costs;  ///< initial cost first, then each accepted improvement
};

struct TrainingHistory {
  std::vector<HistoryEntry> entries;

  /// Parameters in force when predicting tick `t` (0-based): the most recent
  /// estimate trained only on earlier ticks, else `fallback`.
  Theta theta_at(std::size_t t, const Theta& fallback) const;
};

/// Squared total-count error for a single tick.
inline double one_step_cost(double predicted_total, double observed_total) {
  const double e = predicted_total - observed_total;
  return e * e;
}

/// Mean of per-tick costs; throws DomainError on an empty range.
double average_cost(std::span<const double> costs);

/// Discounted sum with the most recent cost weighted 1.
double discounted_cost(std::span<const double> costs, double alpha);

/// Per-tick costs C(1..t) from one replay of the model under `theta`,
/// starting from the empty highway.
std::vector<double> cost_series(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                                const ObservationSeries& observed, std::size_t t);

/// C(t; theta) for the t-th tick, 1-based.
double one_step_cost(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                     const ObservationSeries& observed, std::size_t t);

/// J1(t; theta): average cost over the first t ticks.
double cost_avg(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                const ObservationSeries& observed, std::size_t t);

/// J2(t; theta): discounted cost over the first t ticks.
double cost_discounted(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                       const ObservationSeries& observed, std::size_t t, double alpha);

double training_cost(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand,
                     const ObservationSeries& observed, std::size_t t, const TrainConfig& cfg, CostMode mode);

Theta project(Theta theta, const ThetaBounds& bounds);

/// Candidate set around `theta`. The first entry is always `theta` itself.
std::vector<Theta> perturb(const Theta& theta, const TrainConfig& cfg, Rng& rng);

struct TrainStepResult {
  Theta theta;
  HistoryEntry entry;
};

/// Random-search descent from `theta_prev` on data up to tick t.
TrainStepResult train_step(const Theta& theta_prev, const ModelConstants& constants, const DemandSeries& demand,
                           const ObservationSeries& observed, std::size_t t, const TrainConfig& cfg, CostMode mode,
                           Rng& rng);

TrainStepResult train_step(const Theta& theta_prev, const ModelConstants& constants, const DemandSeries& demand,
                           const ObservationSeries& observed, std::size_t t, const TrainConfig& cfg, CostMode mode);

/// Retrains every `retrain_every` ticks as data accumulates, and once more at
/// the end of the series when the horizon is not a multiple of it.
TrainingHistory run_online_training(const DemandSeries& demand, const ObservationSeries& observed,
                                    const ModelConstants& constants, const TrainConfig& cfg, const Theta& theta0,
                                    CostMode mode, std::size_t retrain_every);

}  // namespace hqm
