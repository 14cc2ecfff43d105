#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hqm/estimator.hpp"
#include "hqm/oracle.hpp"
#include "hqm/series.hpp"

namespace hqm {

enum class ExperimentKind { simulate, train_stationary, train_nonstationary, sweep, validate };
enum class DataSource { edbm, synthetic, csv };

const char* to_string(ExperimentKind kind);

struct RunConfig {
  ExperimentKind kind = ExperimentKind::simulate;
  ScenarioSpec scenario;
  DataSource source = DataSource::edbm;
  std::filesystem::path counts_csv;
  /// Synthetic source only; defaults to the section's free-flow traverse time.
  std::optional<int> truth_traverse_ticks;
  TrainConfig train;
  /// Unset fields of the initial guess fall back to the nominal values below.
  std::optional<int> theta0_traverse_ticks;
  double theta0_traverse_s = 37.0;
  double theta0_priority = 0.5;
  double theta0_capacity_vph = 3600.0;
  double theta0_condensation = 2.0;
  std::size_t retrain_every = 100;
  /// Defaults to the nominal traverse time in ticks.
  std::optional<std::size_t> warmup_ticks;
  double sweep_min_s = 0.0;
  double sweep_max_s = 12.0;
  double sweep_step_s = 0.5;
  std::filesystem::path out_dir;
  std::uint64_t seed = 1;
};

/// Parses flat `key = value` text. `#` starts a comment. Unknown or repeated
/// keys raise ConfigError with the line number. Relative `counts_csv` paths
/// resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::string& source, ExperimentKind kind,
                           const std::filesystem::path& base_dir = {});

/// Reads a config file. The `train` subcommand picks stationary or
/// non-stationary from the `mode` key.
RunConfig load_run_config(const std::filesystem::path& path, ExperimentKind kind);

/// Every accepted config key.
const std::vector<std::string>& config_keys();

void validate(const RunConfig& config);

/// Per-tick |pred - obs| / obs * 100, NaN where the observed total is not positive.
std::vector<double> tick_errors(std::span<const double> predicted, std::span<const double> observed);

/// Mean of tick_errors() over ticks at index >= warmup with a positive
/// observed total. Throws DomainError when no such tick exists.
double percentage_error(std::span<const double> predicted, std::span<const double> observed, std::size_t warmup);

double percentage_error(const ObservationSeries& predicted, const ObservationSeries& observed, std::size_t warmup);

std::vector<double> totals(const ObservationSeries& series);

double pearson(std::span<const double> x, std::span<const double> y);

/// Model counts when each tick is predicted with the estimate in force at
/// that tick.
ObservationSeries online_predictions(const TrainingHistory& history, const Theta& theta0,
                                     const ModelConstants& constants, const DemandSeries& demand);

Theta initial_theta(const RunConfig& config, double tick_seconds);

struct MetricsReport {
  ExperimentKind kind = ExperimentKind::simulate;
  std::size_t horizon = 0;
  double tick_seconds = 0.0;
  std::size_t warmup_ticks = 0;
  /// Errors of the model predictions; unset when no tick has a positive
  /// observed total.
  std::optional<double> error_pct;
  std::optional<double> error_pct_no_warmup;
  std::optional<double> nominal_error_pct;
  std::optional<double> nominal_error_pct_no_warmup;
  std::vector<double> error_series;
  Theta theta0;
  Theta final_theta;
  std::optional<double> background_vph;
  std::optional<double> delta_star_s;
  std::optional<double> argmin_delta_s;
  std::vector<std::string> artifacts;
  /// Consistency checks passed by a validate run.
  std::vector<std::string> checks;
  double wall_clock_s = 0.0;
};

/// Runs one study and writes its artifacts into `config.out_dir`:
/// counts.csv, predicted.csv, theta.csv, sweep.csv and metrics.json as the
/// kind requires. Files already written are removed if the run fails.
MetricsReport run_experiment(const RunConfig& config);

}  // namespace hqm
