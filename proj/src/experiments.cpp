#include "hqm/experiments.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

#include "hqm/error.hpp"
#include "hqm/io.hpp"
#include "hqm/model.hpp"
#include "hqm/regulator.hpp"

namespace hqm {

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::train_stationary: return "train-stationary";
    case ExperimentKind::train_nonstationary: return "train-nonstationary";
    case ExperimentKind::sweep: return "sweep";
    case ExperimentKind::validate: return "validate";
  }
  return "unknown";
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Values the config can only resolve once every key has been read.
struct Pending {
  std::optional<double> freeflow_end_kmh;
  double wave_factor = 1.0;
  double wave_period_s = 600.0;
  std::optional<std::string> mode;
};

using Setter = std::function<void(RunConfig&, Pending&, const std::string&)>;

double parse_number(const std::string& value) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size() || !std::isfinite(out))
    throw ConfigError("expected a number, got '" + value + "'");
  return out;
}

long parse_integer(const std::string& value) {
  long out = 0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size())
    throw ConfigError("expected an integer, got '" + value + "'");
  return out;
}

std::size_t parse_count(const std::string& value) {
  const long n = parse_integer(value);
  if (n < 0) throw ConfigError("expected a non-negative integer, got '" + value + "'");
  return static_cast<std::size_t>(n);
}

bool parse_bool(const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("expected true or false, got '" + value + "'");
}

ArrivalLaw parse_law(const std::string& value) {
  if (value == "poisson") return ArrivalLaw::poisson;
  if (value == "gamma") return ArrivalLaw::gamma;
  if (value == "bernoulli") return ArrivalLaw::bernoulli;
  throw ConfigError("expected poisson, gamma or bernoulli, got '" + value + "'");
}

Setter number(double ScenarioSpec::*field) {
  return [field](RunConfig& c, Pending&, const std::string& v) { c.scenario.*field = parse_number(v); };
}

Setter truth_number(double TrueParams::*field) {
  return [field](RunConfig& c, Pending&, const std::string& v) { c.scenario.truth.*field = parse_number(v); };
}

Setter run_number(double RunConfig::*field) {
  return [field](RunConfig& c, Pending&, const std::string& v) { c.*field = parse_number(v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"mode", [](RunConfig&, Pending& p, const std::string& v) { p.mode = v; }},
      {"source",
       [](RunConfig& c, Pending&, const std::string& v) {
         if (v == "edbm") c.source = DataSource::edbm;
         else if (v == "synthetic") c.source = DataSource::synthetic;
         else if (v == "csv") c.source = DataSource::csv;
         else throw ConfigError("expected edbm, synthetic or csv, got '" + v + "'");
       }},
      {"counts_csv", [](RunConfig& c, Pending&, const std::string& v) { c.counts_csv = v; }},
      {"tick_seconds", number(&ScenarioSpec::tick_seconds)},
      {"horizon", [](RunConfig& c, Pending&, const std::string& v) { c.scenario.horizon = parse_count(v); }},
      {"section_length_m", number(&ScenarioSpec::section_length_m)},
      {"freeflow_kmh",
       [](RunConfig& c, Pending&, const std::string& v) { c.scenario.freeflow_kmh = Schedule::constant(parse_number(v)); }},
      {"freeflow_end_kmh", [](RunConfig&, Pending& p, const std::string& v) { p.freeflow_end_kmh = parse_number(v); }},
      {"noncav_vph", number(&ScenarioSpec::noncav_vph)},
      {"cav_vph", number(&ScenarioSpec::cav_vph)},
      {"noncav_law", [](RunConfig& c, Pending&, const std::string& v) { c.scenario.noncav_law = parse_law(v); }},
      {"platoon_law", [](RunConfig& c, Pending&, const std::string& v) { c.scenario.platoon_law = parse_law(v); }},
      {"gamma_shape", number(&ScenarioSpec::gamma_shape)},
      {"noise", number(&ScenarioSpec::noise)},
      {"blocking_factor", number(&ScenarioSpec::blocking_factor)},
      {"demand_wave_factor", [](RunConfig&, Pending& p, const std::string& v) { p.wave_factor = parse_number(v); }},
      {"demand_wave_period_s", [](RunConfig&, Pending& p, const std::string& v) { p.wave_period_s = parse_number(v); }},
      {"true_capacity_vph", truth_number(&TrueParams::capacity_vph)},
      {"true_priority", truth_number(&TrueParams::priority)},
      {"true_condensation", truth_number(&TrueParams::condensation)},
      {"true_traverse_ticks",
       [](RunConfig& c, Pending&, const std::string& v) { c.truth_traverse_ticks = static_cast<int>(parse_integer(v)); }},
      {"platoon_size",
       [](RunConfig& c, Pending&, const std::string& v) { c.scenario.truth.platoon_size = static_cast<int>(parse_integer(v)); }},
      {"theta0_traverse_s", run_number(&RunConfig::theta0_traverse_s)},
      {"theta0_traverse_ticks",
       [](RunConfig& c, Pending&, const std::string& v) { c.theta0_traverse_ticks = static_cast<int>(parse_integer(v)); }},
      {"theta0_priority", run_number(&RunConfig::theta0_priority)},
      {"theta0_capacity_vph", run_number(&RunConfig::theta0_capacity_vph)},
      {"theta0_condensation", run_number(&RunConfig::theta0_condensation)},
      {"epsilon", [](RunConfig& c, Pending&, const std::string& v) { c.train.epsilon = parse_number(v); }},
      {"alpha", [](RunConfig& c, Pending&, const std::string& v) { c.train.alpha = parse_number(v); }},
      {"candidates_per_iter",
       [](RunConfig& c, Pending&, const std::string& v) { c.train.candidates_per_iter = static_cast<int>(parse_integer(v)); }},
      {"step_traverse_ticks",
       [](RunConfig& c, Pending&, const std::string& v) {
         c.train.step_sizes.traverse_ticks = static_cast<int>(parse_integer(v));
       }},
      {"step_priority", [](RunConfig& c, Pending&, const std::string& v) { c.train.step_sizes.priority = parse_number(v); }},
      {"step_capacity_vph",
       [](RunConfig& c, Pending&, const std::string& v) { c.train.step_sizes.capacity_vph = parse_number(v); }},
      {"step_condensation",
       [](RunConfig& c, Pending&, const std::string& v) { c.train.step_sizes.condensation = parse_number(v); }},
      {"max_iters", [](RunConfig& c, Pending&, const std::string& v) { c.train.max_iters = static_cast<int>(parse_integer(v)); }},
      {"exhaustive", [](RunConfig& c, Pending&, const std::string& v) { c.train.exhaustive = parse_bool(v); }},
      {"threads", [](RunConfig& c, Pending&, const std::string& v) { c.train.threads = static_cast<int>(parse_integer(v)); }},
      {"retrain_every", [](RunConfig& c, Pending&, const std::string& v) { c.retrain_every = parse_count(v); }},
      {"warmup_ticks", [](RunConfig& c, Pending&, const std::string& v) { c.warmup_ticks = parse_count(v); }},
      {"sweep_min_s", run_number(&RunConfig::sweep_min_s)},
      {"sweep_max_s", run_number(&RunConfig::sweep_max_s)},
      {"sweep_step_s", run_number(&RunConfig::sweep_step_s)},
  };
  return table;
}

// Triangle wave between 1/factor and factor, starting low.
Schedule demand_wave(double factor, double period_s, double duration_s) {
  std::vector<std::pair<double, double>> knots;
  for (long k = 0;; ++k) {
    const double at = static_cast<double>(k) * period_s / 2.0;
    knots.emplace_back(at, k % 2 ? factor : 1.0 / factor);
    if (at >= duration_s) break;
  }
  return Schedule(std::move(knots));
}

std::optional<double> scored_error(const ObservationSeries& predicted, const ObservationSeries& observed,
                                   std::size_t warmup) {
  for (std::size_t t = warmup; t < observed.size(); ++t)
    if (observed.total(t) > 0.0) return percentage_error(predicted, observed, warmup);
  return std::nullopt;
}

nlohmann::ordered_json theta_json(const Theta& theta) {
  return {{"T_ticks", theta.traverse_ticks},
          {"rho", theta.priority},
          {"F_vph", theta.capacity_vph},
          {"gamma", theta.condensation}};
}

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T>& value) {
  return value ? nlohmann::ordered_json(*value) : nlohmann::ordered_json(nullptr);
}

// Removes every artifact of a failed run, and the output directory when the
// run created it.
class ArtifactGuard {
 public:
  explicit ArtifactGuard(const std::filesystem::path& dir) : dir_(dir) {
    created_dir_ = !std::filesystem::exists(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~ArtifactGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) std::filesystem::remove(f, ec);
    if (created_dir_) std::filesystem::remove(dir_, ec);
  }
  std::filesystem::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }
  void commit() { committed_ = true; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
  bool created_dir_ = false;
  bool committed_ = false;
};

struct Dataset {
  DemandSeries demand;
  ObservationSeries observed;
};

Dataset acquire(const RunConfig& config, const ScenarioSpec& scenario) {
  switch (config.source) {
    case DataSource::csv: {
      std::string notice;
      auto table = load_counts_table(config.counts_csv, &notice, scenario.truth.platoon_size);
      if (table.observed.size() == 0) throw DomainError(notice);
      return {std::move(table.demand), std::move(table.observed)};
    }
    case DataSource::synthetic: {
      auto demand = gen_demand(scenario);
      auto truth = true_model_params(scenario);
      if (config.truth_traverse_ticks) truth.traverse_ticks = *config.truth_traverse_ticks;
      auto observed = synthetic_hqm_oracle(truth, demand, scenario.noise, scenario.seed);
      return {std::move(demand), std::move(observed)};
    }
    case DataSource::edbm:
      break;
  }
  auto demand = gen_demand(scenario);
  auto observed = edbm_simulate(scenario, demand);
  return {std::move(demand), std::move(observed)};
}

std::string check_conservation(const Theta& theta, const ModelConstants& constants, const DemandSeries& demand) {
  const auto params = to_params(theta, constants);
  auto state = new_state(params);
  double in_x = 0.0, in_y = 0.0, out_x = 0.0, out_y = 0.0;
  const double unit = params.platoon_unit();
  for (std::size_t t = 0; t < demand.horizon(); ++t) {
    const auto& in = demand.inflows[t];
    const auto d = advance(state, in, params);
    in_x += in.a;
    in_y += in.b / params.condensation;
    out_x += d.f;
    out_y += d.g;
    const double tol = 1e-9 * std::max(1.0, in_x + in_y);
    if (std::abs(in_x - out_x - state.x.sum()) > tol || std::abs(in_y - out_y - state.y.sum()) > tol)
      throw DomainError("validate: conservation violated at tick " + std::to_string(t + 1));
    for (Index k = 0; k < state.cells(); ++k)
      if (!is_multiple_of(state.y[k], unit))
        throw DomainError("validate: platoon mass is not a whole number of platoons at tick " + std::to_string(t + 1));
  }
  return "conservation and platoon granularity over " + std::to_string(demand.horizon()) + " ticks";
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, v] : setters()) out.push_back(k);
    return out;
  }();
  return keys;
}

RunConfig parse_run_config(const std::string& text, const std::string& source, ExperimentKind kind,
                           const std::filesystem::path& base_dir) {
  RunConfig config;
  config.kind = kind;
  Pending pending;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(std::string_view(raw).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    auto fail = [&](const std::string& what) {
      throw ConfigError(source + ":" + std::to_string(line) + ": " + what);
    };
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto setter = setters().find(key);
    if (setter == setters().end()) fail("unknown key '" + key + "'");
    if (value.empty()) fail("missing value for '" + key + "'");
    if (const auto [it, fresh] = seen.emplace(key, line); !fresh)
      fail("'" + key + "' already set on line " + std::to_string(it->second));
    try {
      setter->second(config, pending, value);
    } catch (const ConfigError& e) {
      fail(key + ": " + e.what());
    }
  }

  if (pending.mode) {
    if (*pending.mode != "stationary" && *pending.mode != "nonstationary")
      throw ConfigError(source + ": mode: expected stationary or nonstationary, got '" + *pending.mode + "'");
    if (kind == ExperimentKind::train_stationary || kind == ExperimentKind::train_nonstationary)
      config.kind = *pending.mode == "stationary" ? ExperimentKind::train_stationary
                                                  : ExperimentKind::train_nonstationary;
  }
  auto& s = config.scenario;
  if (pending.freeflow_end_kmh && s.tick_seconds > 0.0)
    s.freeflow_kmh = Schedule::ramp(s.freeflow_kmh.at(0.0), *pending.freeflow_end_kmh, s.horizon_seconds());
  if (pending.wave_factor != 1.0) {
    if (!(pending.wave_factor > 0.0) || !(pending.wave_period_s > 0.0))
      throw ConfigError(source + ": demand_wave_factor and demand_wave_period_s must be > 0");
    s.demand_profile = demand_wave(pending.wave_factor, pending.wave_period_s, s.horizon_seconds());
  }
  if (!config.counts_csv.empty() && config.counts_csv.is_relative()) config.counts_csv = base_dir / config.counts_csv;
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path, ExperimentKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.string(), kind, path.parent_path());
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  try {
    validate(c.scenario);
    validate(c.train);
  } catch (const ParameterError& e) {
    fail(e.what());
  }
  if (c.source == DataSource::csv) {
    if (c.counts_csv.empty()) fail("source = csv needs counts_csv");
    if (!std::filesystem::exists(c.counts_csv)) fail("counts_csv " + c.counts_csv.string() + " does not exist");
    if (c.kind == ExperimentKind::sweep) fail("sweep needs the edbm source");
  } else if (!c.counts_csv.empty()) {
    fail("counts_csv is only used with source = csv");
  }
  if (c.kind == ExperimentKind::sweep && c.source != DataSource::edbm) fail("sweep needs the edbm source");
  if (c.truth_traverse_ticks && *c.truth_traverse_ticks < 1) fail("true_traverse_ticks must be >= 1");
  if (c.theta0_traverse_ticks && *c.theta0_traverse_ticks < 1) fail("theta0_traverse_ticks must be >= 1");
  if (!(c.theta0_traverse_s > 0.0)) fail("theta0_traverse_s must be > 0");
  if (c.theta0_priority < 0.0 || c.theta0_priority > 1.0) fail("theta0_priority must lie in [0, 1]");
  if (!(c.theta0_capacity_vph > 0.0)) fail("theta0_capacity_vph must be > 0");
  if (!(c.theta0_condensation > 1.0)) fail("theta0_condensation must be > 1");
  if (c.retrain_every < 1) fail("retrain_every must be >= 1");
  if (c.kind == ExperimentKind::sweep) {
    if (!(c.sweep_step_s > 0.0)) fail("sweep_step_s must be > 0");
    if (!(c.sweep_min_s >= 0.0) || c.sweep_max_s < c.sweep_min_s) fail("need 0 <= sweep_min_s <= sweep_max_s");
  }
  if (c.out_dir.empty()) fail("output directory is required");
}

std::vector<double> tick_errors(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) throw StructuralError("percentage error: series lengths differ");
  std::vector<double> out(observed.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t t = 0; t < observed.size(); ++t)
    if (observed[t] > 0.0) out[t] = std::abs(predicted[t] - observed[t]) / observed[t] * 100.0;
  return out;
}

double percentage_error(std::span<const double> predicted, std::span<const double> observed, std::size_t warmup) {
  if (predicted.size() != observed.size()) throw StructuralError("percentage error: series lengths differ");
  if (warmup >= observed.size()) throw DomainError("percentage error: warm-up covers the whole series");
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t t = warmup; t < observed.size(); ++t) {
    if (!(observed[t] > 0.0)) continue;
    sum += std::abs(predicted[t] - observed[t]) / observed[t];
    ++scored;
  }
  if (scored == 0) throw DomainError("percentage error: no tick with a positive observed total");
  return sum / static_cast<double>(scored) * 100.0;
}

double percentage_error(const ObservationSeries& predicted, const ObservationSeries& observed, std::size_t warmup) {
  const auto p = totals(predicted);
  const auto o = totals(observed);
  return percentage_error(p, o, warmup);
}

std::vector<double> totals(const ObservationSeries& series) {
  if (series.m.size() != series.n.size()) throw StructuralError("observation series: m and n lengths differ");
  std::vector<double> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) out[t] = series.total(t);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("pearson: need two equal series of length >= 2");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: constant series");
  return sxy / std::sqrt(sxx * syy);
}

ObservationSeries online_predictions(const TrainingHistory& history, const Theta& theta0,
                                     const ModelConstants& constants, const DemandSeries& demand) {
  const std::size_t horizon = demand.horizon();
  ObservationSeries out;
  out.m.resize(horizon);
  out.n.resize(horizon);
  std::size_t from = 0;
  Theta current = theta0;
  auto fill = [&](std::size_t to) {
    if (to <= from) return;
    const auto traj = simulate(to_params(current, constants), demand);
    for (std::size_t t = from; t < to; ++t) {
      out.m[t] = traj.m_hat[static_cast<Index>(t)];
      out.n[t] = traj.n_hat[static_cast<Index>(t)];
    }
    from = to;
  };
  for (const auto& e : history.entries) {
    // An estimate trained through tick k first predicts index k.
    fill(std::min(e.tick, horizon));
    current = e.theta;
  }
  fill(horizon);
  return out;
}

Theta initial_theta(const RunConfig& config, double tick_seconds) {
  Theta theta;
  theta.traverse_ticks = config.theta0_traverse_ticks
                             ? *config.theta0_traverse_ticks
                             : traverse_ticks_from_seconds(config.theta0_traverse_s, tick_seconds);
  theta.priority = config.theta0_priority;
  theta.capacity_vph = config.theta0_capacity_vph;
  theta.condensation = config.theta0_condensation;
  return theta;
}

MetricsReport run_experiment(const RunConfig& input) {
  const auto started = std::chrono::steady_clock::now();
  validate(input);
  RunConfig config = input;
  config.scenario.seed = config.seed;
  config.train.seed = config.seed;
  const auto& scenario = config.scenario;

  ArtifactGuard guard(config.out_dir);
  MetricsReport report;
  report.kind = config.kind;

  const auto data = acquire(config, scenario);
  const auto& demand = data.demand;
  const auto& observed = data.observed;
  require_aligned(demand, observed);
  const double dt = demand.tick_seconds;
  const ModelConstants constants{demand.platoon_size, dt};
  report.horizon = demand.horizon();
  report.tick_seconds = dt;
  report.theta0 = initial_theta(config, dt);
  report.final_theta = report.theta0;
  report.warmup_ticks =
      config.warmup_ticks ? *config.warmup_ticks
                          : static_cast<std::size_t>(traverse_ticks_from_seconds(
                                nominal_traverse_time(scenario.section_length_m, scenario.freeflow_kmh.at(0.0)), dt));

  auto save = [&](const std::string& name) {
    report.artifacts.push_back(name);
    return guard.add(name);
  };

  if (config.kind == ExperimentKind::validate) {
    report.checks.push_back("config and scenario");
    report.checks.push_back("demand and observations aligned over " + std::to_string(demand.horizon()) + " ticks");
    report.checks.push_back(check_conservation(report.theta0, constants, demand));
  } else {
    write_counts_csv(observed, demand, save("counts.csv"));
    const auto nominal = as_observations(simulate(to_params(report.theta0, constants), demand));
    report.nominal_error_pct = scored_error(nominal, observed, report.warmup_ticks);
    report.nominal_error_pct_no_warmup = scored_error(nominal, observed, 0);

    ObservationSeries predicted = nominal;
    if (config.kind != ExperimentKind::simulate) {
      const auto mode = config.kind == ExperimentKind::train_nonstationary ? CostMode::nonstationary
                                                                           : CostMode::stationary;
      const auto history =
          run_online_training(demand, observed, constants, config.train, report.theta0, mode, config.retrain_every);
      report.final_theta = history.entries.back().theta;
      predicted = online_predictions(history, report.theta0, constants, demand);
      write_theta_csv(history, save("theta.csv"));
    }
    write_counts_csv(predicted, demand, save("predicted.csv"));
    report.error_pct = scored_error(predicted, observed, report.warmup_ticks);
    report.error_pct_no_warmup = scored_error(predicted, observed, 0);
    report.error_series = tick_errors(totals(predicted), totals(observed));

    if (config.kind == ExperimentKind::sweep) {
      report.background_vph = noncav_throughput_vph(observed, static_cast<double>(demand.horizon()) * dt);
      try {
        report.delta_star_s = optimal_headway(demand.platoon_size, report.final_theta.condensation,
                                              report.final_theta.capacity_vph, *report.background_vph);
      } catch (const InfeasibleError&) {
        report.delta_star_s.reset();
      }
      const auto grid = headway_grid(config.sweep_min_s, config.sweep_max_s, config.sweep_step_s);
      const auto sweep = sweep_headway(scenario, demand, grid, config.train.threads);
      report.argmin_delta_s = sweep.argmin_delta_s;
      write_sweep_csv(sweep, save("sweep.csv"));
    }
  }

  nlohmann::ordered_json j;
  j["kind"] = to_string(report.kind);
  j["seed"] = config.seed;
  j["horizon"] = report.horizon;
  j["tick_seconds"] = report.tick_seconds;
  j["warmup_ticks"] = report.warmup_ticks;
  j["error_pct"] = optional_json(report.error_pct);
  j["error_pct_no_warmup"] = optional_json(report.error_pct_no_warmup);
  j["nominal_error_pct"] = optional_json(report.nominal_error_pct);
  j["nominal_error_pct_no_warmup"] = optional_json(report.nominal_error_pct_no_warmup);
  j["theta0"] = theta_json(report.theta0);
  j["final_theta"] = theta_json(report.final_theta);
  j["background_vph"] = optional_json(report.background_vph);
  j["delta_star_s"] = optional_json(report.delta_star_s);
  j["argmin_delta_s"] = optional_json(report.argmin_delta_s);
  j["checks"] = report.checks;
  report.artifacts.push_back("metrics.json");
  j["artifacts"] = report.artifacts;
  auto& series = j["error_series"] = nlohmann::ordered_json::array();
  for (double e : report.error_series) series.push_back(std::isnan(e) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(e));

  const auto metrics_path = guard.add("metrics.json");
  std::ofstream out(metrics_path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out.flush()) throw Error("failed writing " + metrics_path.string());
  out.close();

  guard.commit();
  report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace hqm
