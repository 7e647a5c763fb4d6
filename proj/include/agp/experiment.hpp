#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agp/core_types.hpp"
#include "agp/metrics.hpp"
#include "agp/problems.hpp"

namespace agp {

struct ProblemConfig {
  std::string name = "rosenbrock";  // rosenbrock | toggle_switch
  double noise_variance = kToggleLargeNoiseVariance;
  std::uint64_t data_seed = 2017;
  /// Observed data file ("iptg,observed" rows); synthetic data when unset.
  std::optional<std::string> data_file;
  std::optional<std::array<double, 2>> initial_condition;
  double step_size = 0.01;
};

struct ReferenceConfig {
  int samples = 30000;
  int burn_in = -1;
  int grid_size = 400;
  std::string output_dir = "reference";
  /// Refuse reference runs whose estimated likelihood calls exceed this without --confirm.
  long budget_ceiling = 200000;
};

enum class TraceTruth { None, Grid, Reference };

struct ExperimentConfig {
  ProblemConfig problem;
  RunConfig run;
  std::string output_dir = "out";
  TraceTruth trace_truth = TraceTruth::None;
  ReferenceConfig reference;
};

/// Parses and validates a config document; unknown keys anywhere are rejected.
/// Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Also accepts the config.json written into a run directory.
ExperimentConfig load_config(const std::string& path);

/// Fully expanded config, defaults included.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// FNV-1a over the expanded config without output paths, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct ProblemInstance {
  Problem problem;
  std::optional<ToggleSwitchSpec> toggle;
};

ProblemInstance build_problem(const ProblemConfig& cfg);

/// Numeric CSV with '#' comment lines and one header row.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // empty fields read as NaN

  int column(const std::string& name) const;  // -1 when absent
};
CsvTable read_csv(const std::string& path);

/// Estimated true-likelihood calls for cmd_reference.
long estimate_reference_cost(const ExperimentConfig& cfg, int dim);

/// Loads the reference artifact written by cmd_reference.
TruthReference load_reference(const std::string& dir, const Problem& problem);

/// Algorithm run; writes run.json, trace.csv, samples.csv, checkpoint.json,
/// mixture_iter_<n>.json, approx.json (and data.csv for the toggle switch).
void cmd_run(const ExperimentConfig& cfg, bool resume, std::ostream& log);

/// Direct DRAM on the true posterior; writes reference_samples.csv,
/// reference.json and, for d <= 2, grid.csv. Throws ConfigError when the cost
/// estimate exceeds the ceiling and `confirm` is false.
void cmd_reference(const ExperimentConfig& cfg, bool confirm, std::ostream& log);

/// Per-parameter marginal KLD table (marginal_kld.csv) and KL-vs-evaluations
/// series (kl_vs_evals.csv) for a set of run directories against a reference.
void cmd_compare(const ExperimentConfig& cfg, const std::vector<std::string>& run_dirs,
                 const std::string& reference_dir, const std::string& output_dir, std::ostream& log);

}  // namespace agp
