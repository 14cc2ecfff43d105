#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hqm/estimator.hpp"
#include "hqm/model.hpp"
#include "hqm/regulator.hpp"
#include "hqm/series.hpp"

namespace hqm {

inline constexpr const char* kCountsHeader = "tick,t_seconds,m,n,a,b";
inline constexpr const char* kThetaHeader = "tick,T_ticks,rho,F_vph,gamma,J";
inline constexpr const char* kSweepHeader = "delta_s,avg_delay_s,n_vehicles";

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Counts and the inflows they were produced from, as stored in a counts CSV.
struct CountsTable {
  DemandSeries demand;
  ObservationSeries observed;
};

/// Rows are ticks 1..H with t_seconds = tick * dt.
void write_counts_csv(const ObservationSeries& observed, const DemandSeries& demand, const std::filesystem::path& path);

/// Reads a counts CSV. A header-only file yields empty series and sets
/// `notice`. Negative values, gaps and non-increasing ticks raise ParseError
/// with the offending line.
CountsTable load_counts_table(const std::filesystem::path& path, std::string* notice = nullptr, int platoon_size = 10);

ObservationSeries load_counts_csv(const std::filesystem::path& path, std::string* notice = nullptr);

ObservationSeries as_observations(const Trajectory<double>& trajectory);

struct ThetaRow {
  std::size_t tick = 0;
  Theta theta;
  double cost = 0.0;
};

void write_theta_csv(const TrainingHistory& history, const std::filesystem::path& path);
std::vector<ThetaRow> load_theta_csv(const std::filesystem::path& path);

void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path);
std::vector<SweepRow> load_sweep_csv(const std::filesystem::path& path);

}  // namespace hqm
