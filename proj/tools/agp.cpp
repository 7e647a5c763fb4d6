#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agp/experiment.hpp"

namespace {

int report(const char* kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << std::endl;
  return code;
}

agp::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  agp::ExperimentConfig cfg = agp::load_config(path);
  if (seed) cfg.run.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive Gaussian-process posterior approximation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string run_output;
  std::string reference_output;
  std::string compare_output;

  auto* run = app.add_subcommand("run", "Run the adaptive GP loop");
  bool resume = false;
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Override run.seed");
  run->add_option("--output", run_output, "Override output_dir");
  run->add_flag("--resume", resume, "Continue from checkpoint.json in the output directory");

  auto* reference = app.add_subcommand("reference", "Sample the true posterior directly");
  bool confirm = false;
  std::optional<long> ceiling;
  reference->add_option("config", config_path, "Experiment config (JSON)")->required();
  reference->add_option("--seed", seed, "Override run.seed");
  reference->add_option("--budget-ceiling", ceiling, "Override reference.budget_ceiling");
  reference->add_flag("--confirm", confirm, "Proceed even when the cost estimate exceeds the ceiling");
  reference->add_option("--output", reference_output, "Override reference.output_dir");

  auto* compare = app.add_subcommand("compare", "Compare runs against a reference");
  std::vector<std::string> run_dirs;
  std::string reference_dir;
  compare->add_option("config", config_path, "Experiment config (JSON)")->required();
  compare->add_option("runs", run_dirs, "Run output directories")->required();
  compare->add_option("--reference", reference_dir, "Reference directory")->required();
  compare->add_option("--output", compare_output, "Output directory")->default_val("compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report("usage", e.what(), 2);
  }

  try {
    agp::ExperimentConfig cfg = load(config_path, seed);
    if (*run) {
      if (!run_output.empty()) cfg.output_dir = run_output;
      agp::cmd_run(cfg, resume, std::cout);
    } else if (*reference) {
      if (ceiling) cfg.reference.budget_ceiling = *ceiling;
      if (!reference_output.empty()) cfg.reference.output_dir = reference_output;
      agp::cmd_reference(cfg, confirm, std::cout);
    } else {
      agp::cmd_compare(cfg, run_dirs, reference_dir, compare_output, std::cout);
    }
  } catch (const agp::ConfigError& e) {
    return report("config", e.what(), 2);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), 3);
  }
  return 0;
}
