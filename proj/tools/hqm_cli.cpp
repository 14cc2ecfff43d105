// Command-line runner for the bottleneck studies.
//
//   hqm simulate --config run.conf --seed 7 --out out/
//
// On failure a single JSON line {"error": kind, "message": text} goes to
// stderr and the exit status is nonzero.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "hqm/error.hpp"
#include "hqm/experiments.hpp"

namespace {

int report_error(const std::string& kind, const std::string& message, int status) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return status;
}

std::string describe(const hqm::MetricsReport& r) {
  char buf[64];
  std::string out = std::string("ok ") + hqm::to_string(r.kind) + " ticks=" + std::to_string(r.horizon);
  if (r.error_pct) {
    std::snprintf(buf, sizeof buf, " error_pct=%.3f", *r.error_pct);
    out += buf;
  }
  if (r.nominal_error_pct) {
    std::snprintf(buf, sizeof buf, " nominal_error_pct=%.3f", *r.nominal_error_pct);
    out += buf;
  }
  if (r.kind != hqm::ExperimentKind::simulate && r.kind != hqm::ExperimentKind::validate) {
    std::snprintf(buf, sizeof buf, " T=%d rho=%.3f F=%.1f gamma=%.3f", r.final_theta.traverse_ticks,
                  r.final_theta.priority, r.final_theta.capacity_vph, r.final_theta.condensation);
    out += buf;
  }
  if (r.delta_star_s) {
    std::snprintf(buf, sizeof buf, " delta_star_s=%.3f", *r.delta_star_s);
    out += buf;
  }
  if (r.argmin_delta_s) {
    std::snprintf(buf, sizeof buf, " argmin_delta_s=%.3f", *r.argmin_delta_s);
    out += buf;
  }
  for (const auto& c : r.checks) out += "\n  checked: " + c;
  std::snprintf(buf, sizeof buf, "\n  wall_clock_s=%.3f", r.wall_clock_s);
  return out + buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid queuing model toolkit for mixed platoon / non-CAV bottlenecks"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "Generate observations and nominal model counts"},
      {"train", "Train the model online (mode = stationary | nonstationary)"},
      {"sweep", "Train, compute the optimal headway and sweep headways in the microsimulator"},
      {"validate", "Check a config, its data and model invariants"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Run configuration (key = value)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    sub->add_option("--out", out_dir, "Output directory")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  hqm::ExperimentKind kind = hqm::ExperimentKind::simulate;
  if (name == "train") kind = hqm::ExperimentKind::train_stationary;
  else if (name == "sweep") kind = hqm::ExperimentKind::sweep;
  else if (name == "validate") kind = hqm::ExperimentKind::validate;

  try {
    auto config = hqm::load_run_config(config_path, kind);
    config.seed = seed;
    config.out_dir = out_dir;
    const auto report = hqm::run_experiment(config);
    std::cout << describe(report) << '\n';
  } catch (const hqm::ConfigError& e) {
    return report_error(e.kind(), e.what(), 2);
  } catch (const hqm::ParseError& e) {
    return report_error(e.kind(), e.what(), 2);
  } catch (const hqm::Error& e) {
    return report_error(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
