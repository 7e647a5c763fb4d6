#include "agp/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "agp/agp_loop.hpp"
#include "agp/mcmc.hpp"
#include "agp/serialization.hpp"

namespace agp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Typed access to one JSON object; finish() rejects keys that were never read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  void get(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw type_error(key, "an integer");
      out = v->get<int>();
    }
  }
  void get(const char* key, long& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw type_error(key, "an integer");
      out = v->get<long>();
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) throw type_error(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw type_error(key, "a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw type_error(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw type_error(key, "a string");
      out = v->get<std::string>();
    }
  }
  const json* find(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key: " + path_ + "." + item.key());
    }
  }

 private:
  ConfigError type_error(const char* key, const char* what) const {
    return ConfigError("config key " + path_ + "." + key + " must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

int problem_dim(const std::string& name) {
  if (name == "rosenbrock") return 2;
  if (name == "toggle_switch") return 6;
  throw ConfigError("unknown problem: " + name + " (expected rosenbrock or toggle_switch)");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string header_line(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed);
}

std::string trace_truth_name(TraceTruth t) {
  switch (t) {
    case TraceTruth::None:
      return "none";
    case TraceTruth::Grid:
      return "grid";
    case TraceTruth::Reference:
      return "reference";
  }
  return "none";
}

void write_samples_csv(const std::string& path, const std::string& header, const std::vector<std::string>& names,
                       const Matrix& points) {
  std::ostringstream out;
  out << header << '\n';
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    for (Eigen::Index r = 0; r < points.rows(); ++r) out << (r ? "," : "") << fmt(points(r, c));
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

Matrix samples_from_csv(const CsvTable& t, int dim, const std::string& path) {
  if (static_cast<int>(t.columns.size()) != dim) throw ConfigError(path + ": expected " + std::to_string(dim) + " columns");
  Matrix m(dim, static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (int k = 0; k < dim; ++k) m(k, static_cast<Eigen::Index>(i)) = t.rows[i][static_cast<std::size_t>(k)];
  }
  if (!m.allFinite()) throw ConfigError(path + ": non-numeric sample values");
  return m;
}

std::string trace_columns(const Problem& p, bool with_truth) {
  std::string s = "iter,evals,d_kl_prev";
  if (with_truth) s += ",kl_truth,hellinger_truth";
  for (const auto& name : p.parameter_names) s += ",gp_lengthscale_" + name;
  s += ",gp_signal_var,gp_nugget,mcmc_accept_rate";
  return s;
}

std::string trace_row(const IterationRecord& r, bool with_truth) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::string s = std::to_string(r.iter) + "," + std::to_string(r.evals) + "," + fmt(r.d_kl.value_or(nan));
  if (with_truth) s += "," + fmt(r.kl_truth.value_or(nan)) + "," + fmt(r.hellinger_truth.value_or(nan));
  for (Eigen::Index i = 0; i < r.kernel.lengthscales.size(); ++i) s += "," + fmt(r.kernel.lengthscales[i]);
  s += "," + fmt(r.kernel.signal_variance) + "," + fmt(r.kernel.nugget) + "," + fmt(r.accept_rate);
  return s;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  Section top(doc, "config");

  if (const json* p = top.find("problem")) {
    Section s(*p, "problem");
    s.get("name", cfg.problem.name);
    if (const json* noise = s.find("noise")) {
      if (!noise->is_string()) throw ConfigError("problem.noise must be \"large\" or \"small\"");
      const std::string level = noise->get<std::string>();
      if (level == "large") {
        cfg.problem.noise_variance = kToggleLargeNoiseVariance;
      } else if (level == "small") {
        cfg.problem.noise_variance = kToggleSmallNoiseVariance;
      } else {
        throw ConfigError("problem.noise must be \"large\" or \"small\"");
      }
    }
    s.get("noise_variance", cfg.problem.noise_variance);
    s.get("data_seed", cfg.problem.data_seed);
    std::string data_file;
    s.get("data_file", data_file);
    if (!data_file.empty()) cfg.problem.data_file = data_file;
    if (const json* ic = s.find("initial_condition")) {
      if (!ic->is_array() || ic->size() != 2 || !(*ic)[0].is_number() || !(*ic)[1].is_number()) {
        throw ConfigError("problem.initial_condition must be [u0, v0]");
      }
      cfg.problem.initial_condition = std::array<double, 2>{(*ic)[0].get<double>(), (*ic)[1].get<double>()};
    }
    s.get("step_size", cfg.problem.step_size);
    s.finish();
  }
  const int dim = problem_dim(cfg.problem.name);
  if (!(cfg.problem.noise_variance > 0.0)) throw ConfigError("problem.noise_variance must be > 0");
  if (!(cfg.problem.step_size > 0.0)) throw ConfigError("problem.step_size must be > 0");

  if (const json* r = top.find("run")) {
    Section s(*r, "run");
    s.get("m0", cfg.run.m0);
    s.get("m", cfg.run.m);
    s.get("M", cfg.run.M);
    s.get("n_max", cfg.run.n_max);
    s.get("D_max", cfg.run.D_max);
    s.get("K", cfg.run.K);
    s.get("seed", cfg.run.seed);
    s.get("gmm_max_components", cfg.run.gmm_max_components);
    s.get("kl_samples", cfg.run.kl_samples);
    std::string acquisition = to_string(cfg.run.acquisition);
    s.get("acquisition", acquisition);
    cfg.run.acquisition = acquisition_from_string(acquisition);
    s.get("adaptive_base", cfg.run.adaptive_base);
    s.finish();
  }
  if (const json* g = top.find("gp")) {
    Section s(*g, "gp");
    GpSettings& gp = cfg.run.gp;
    s.get("n_starts", gp.n_starts);
    s.get("max_iters", gp.max_iters);
    s.get("refit_starts", gp.refit_starts);
    s.get("refit_max_iters", gp.refit_max_iters);
    s.get("lengthscale_min", gp.lengthscale_min);
    s.get("lengthscale_max", gp.lengthscale_max);
    s.get("signal_variance_min", gp.signal_variance_min);
    s.get("signal_variance_max", gp.signal_variance_max);
    s.get("nugget_floor", gp.nugget_floor);
    s.get("nugget_max", gp.nugget_max);
    s.finish();
  }
  if (const json* m = top.find("mcmc")) {
    Section s(*m, "mcmc");
    McmcSettings& mc = cfg.run.mcmc;
    s.get("burn_in", mc.burn_in);
    s.get("adapt_start", mc.adapt_start);
    s.get("adapt_interval", mc.adapt_interval);
    s.get("dr_scale", mc.dr_scale);
    s.get("delayed_rejection", mc.delayed_rejection);
    s.get("adapt", mc.adapt);
    s.get("initial_proposal_scale", mc.initial_proposal_scale);
    s.get("epsilon", mc.epsilon);
    s.finish();
  }
  if (const json* a = top.find("sa")) {
    Section s(*a, "sa");
    SaSettings& sa = cfg.run.sa;
    s.get("n_restarts", sa.n_restarts);
    s.get("steps_per_restart", sa.steps_per_restart);
    s.get("initial_temperature", sa.initial_temperature);
    s.get("cooling_rate", sa.cooling_rate);
    s.get("step_scale", sa.step_scale);
    s.finish();
  }
  top.get("output_dir", cfg.output_dir);
  std::string truth = trace_truth_name(cfg.trace_truth);
  top.get("trace_truth", truth);
  if (truth == "none") {
    cfg.trace_truth = TraceTruth::None;
  } else if (truth == "grid") {
    cfg.trace_truth = TraceTruth::Grid;
  } else if (truth == "reference") {
    cfg.trace_truth = TraceTruth::Reference;
  } else {
    throw ConfigError("trace_truth must be none, grid or reference");
  }
  if (const json* r = top.find("reference")) {
    Section s(*r, "reference");
    s.get("samples", cfg.reference.samples);
    s.get("burn_in", cfg.reference.burn_in);
    s.get("grid_size", cfg.reference.grid_size);
    s.get("output_dir", cfg.reference.output_dir);
    s.get("budget_ceiling", cfg.reference.budget_ceiling);
    s.finish();
  }
  top.finish();

  cfg.run.validate(dim);
  if (cfg.trace_truth == TraceTruth::Grid && dim > 2) throw ConfigError("trace_truth=grid needs a problem with d <= 2");
  if (cfg.reference.samples < 1000) throw ConfigError("reference.samples must be >= 1000");
  if (cfg.reference.grid_size < 2) throw ConfigError("reference.grid_size must be >= 2");
  if (cfg.reference.budget_ceiling < 1) throw ConfigError("reference.budget_ceiling must be >= 1");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const json doc = read_json_file(path);
  // config.json written by cmd_run wraps the expanded config.
  if (doc.is_object() && doc.size() == 3 && doc.contains("config_hash") && doc.contains("seed") && doc.contains("config")) {
    return parse_config(doc.at("config"));
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
  json problem = {{"name", cfg.problem.name},
                  {"noise_variance", cfg.problem.noise_variance},
                  {"data_seed", cfg.problem.data_seed},
                  {"step_size", cfg.problem.step_size}};
  if (cfg.problem.data_file) problem["data_file"] = *cfg.problem.data_file;
  if (cfg.problem.initial_condition) {
    problem["initial_condition"] = {(*cfg.problem.initial_condition)[0], (*cfg.problem.initial_condition)[1]};
  }
  const RunConfig& r = cfg.run;
  return {{"problem", problem},
          {"run",
           {{"m0", r.m0},
            {"m", r.m},
            {"M", r.M},
            {"n_max", r.n_max},
            {"D_max", r.D_max},
            {"K", r.K},
            {"seed", r.seed},
            {"gmm_max_components", r.gmm_max_components},
            {"kl_samples", r.kl_samples},
            {"acquisition", to_string(r.acquisition)},
            {"adaptive_base", r.adaptive_base}}},
          {"gp",
           {{"n_starts", r.gp.n_starts},
            {"max_iters", r.gp.max_iters},
            {"refit_starts", r.gp.refit_starts},
            {"refit_max_iters", r.gp.refit_max_iters},
            {"lengthscale_min", r.gp.lengthscale_min},
            {"lengthscale_max", r.gp.lengthscale_max},
            {"signal_variance_min", r.gp.signal_variance_min},
            {"signal_variance_max", r.gp.signal_variance_max},
            {"nugget_floor", r.gp.nugget_floor},
            {"nugget_max", r.gp.nugget_max}}},
          {"mcmc",
           {{"burn_in", r.mcmc.burn_in},
            {"adapt_start", r.mcmc.adapt_start},
            {"adapt_interval", r.mcmc.adapt_interval},
            {"dr_scale", r.mcmc.dr_scale},
            {"delayed_rejection", r.mcmc.delayed_rejection},
            {"adapt", r.mcmc.adapt},
            {"initial_proposal_scale", r.mcmc.initial_proposal_scale},
            {"epsilon", r.mcmc.epsilon}}},
          {"sa",
           {{"n_restarts", r.sa.n_restarts},
            {"steps_per_restart", r.sa.steps_per_restart},
            {"initial_temperature", r.sa.initial_temperature},
            {"cooling_rate", r.sa.cooling_rate},
            {"step_scale", r.sa.step_scale}}},
          {"output_dir", cfg.output_dir},
          {"trace_truth", trace_truth_name(cfg.trace_truth)},
          {"reference",
           {{"samples", cfg.reference.samples},
            {"burn_in", cfg.reference.burn_in},
            {"grid_size", cfg.reference.grid_size},
            {"output_dir", cfg.reference.output_dir},
            {"budget_ceiling", cfg.reference.budget_ceiling}}}};
}

std::string config_hash(const ExperimentConfig& cfg) {
  json doc = config_to_json(cfg);
  doc.erase("output_dir");
  doc["reference"].erase("output_dir");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ProblemInstance build_problem(const ProblemConfig& cfg) {
  if (cfg.name == "rosenbrock") return {make_rosenbrock(), std::nullopt};
  if (cfg.name != "toggle_switch") problem_dim(cfg.name);
  ToggleSwitchSpec spec;
  spec.noise_variance = cfg.noise_variance;
  spec.step_size = cfg.step_size;
  spec.initial_condition = cfg.initial_condition;
  if (cfg.data_file) {
    spec.observed_data = read_toggle_data(*cfg.data_file, spec);
  } else {
    spec.observed_data = make_synthetic_data(spec, toggle_true_parameters(), cfg.data_seed);
  }
  return {make_toggle_switch(spec), spec};
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (!have_header) {
      t.columns = fields;
      have_header = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& field : fields) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      row.push_back(field.empty() || end != field.c_str() + field.size() ? std::numeric_limits<double>::quiet_NaN()
                                                                         : v);
    }
    row.resize(t.columns.size(), std::numeric_limits<double>::quiet_NaN());
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw ConfigError(path + ": missing header row");
  return t;
}

long estimate_reference_cost(const ExperimentConfig& cfg, int dim) {
  McmcSettings ms = cfg.run.mcmc;
  ms.n_samples = cfg.reference.samples;
  ms.burn_in = cfg.reference.burn_in;
  const long chain = static_cast<long>(ms.effective_burn_in()) + ms.n_samples;
  long cost = ms.delayed_rejection ? 2 * chain : chain;
  if (dim <= 2) cost += static_cast<long>(std::pow(cfg.reference.grid_size, dim));
  return cost;
}

TruthReference load_reference(const std::string& dir, const Problem& problem) {
  TruthReference truth;
  const fs::path base(dir);
  fs::path samples = base / "reference_samples.csv";
  if (!fs::exists(samples)) samples = base / "samples.csv";
  if (fs::exists(samples)) truth.samples = samples_from_csv(read_csv(samples.string()), problem.dim(), samples.string());
  const fs::path grid = base / "grid.csv";
  if (fs::exists(grid)) {
    const CsvTable t = read_csv(grid.string());
    const int col = t.column("log_density");
    const auto n = static_cast<double>(t.rows.size());
    const int side = static_cast<int>(std::lround(std::pow(n, 1.0 / problem.dim())));
    if (col < 0 || std::pow(side, problem.dim()) != n) throw ConfigError(grid.string() + ": malformed grid file");
    GridDensity g{problem.prior, std::vector<int>(static_cast<std::size_t>(problem.dim()), side),
                  Vector(static_cast<Eigen::Index>(t.rows.size()))};
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      g.log_values[static_cast<Eigen::Index>(i)] = t.rows[i][static_cast<std::size_t>(col)];
    }
    truth.grid = std::move(g);
  }
  if (!truth.samples && !truth.grid) throw ConfigError("no reference artifacts found in " + dir);
  return truth;
}

void cmd_run(const ExperimentConfig& cfg, bool resume, std::ostream& log) {
  const ProblemInstance inst = build_problem(cfg.problem);
  const Problem& problem = inst.problem;
  cfg.run.validate(problem.dim());
  const std::string hash = config_hash(cfg);
  const std::string header = header_line(hash, cfg.run.seed);
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);

  TruthReference truth;
  const TruthReference* truth_ptr = nullptr;
  if (cfg.trace_truth == TraceTruth::Grid) {
    truth.grid = evaluate_on_grid([&problem](const ParamVector& x) { return log_joint(problem, x); }, problem.prior,
                                  cfg.reference.grid_size);
    truth_ptr = &truth;
  } else if (cfg.trace_truth == TraceTruth::Reference) {
    truth = load_reference(cfg.reference.output_dir, problem);
    truth_ptr = &truth;
  }

  RunOptions options;
  options.truth = truth_ptr;
  if (resume) {
    const json cp = read_json_file((out / "checkpoint.json").string());
    if (cp.value("config_hash", std::string()) != hash) {
      throw ConfigError("checkpoint was written by a different config (hash mismatch)");
    }
    options.resume = state_from_json(cp.at("state"));
    if (options.resume->terminated != Termination::Running) {
      throw ConfigError("checkpoint is already terminated; nothing to resume");
    }
  }

  const json wrapped = {{"config_hash", hash}, {"seed", cfg.run.seed}, {"config", config_to_json(cfg)}};
  write_file_atomic((out / "config.json").string(), wrapped.dump(2) + "\n");
  if (inst.toggle) write_toggle_data((out / "data.csv").string(), *inst.toggle, header);

  const bool with_truth = truth_ptr != nullptr;
  std::ofstream trace((out / "trace.csv").string(), std::ios::trunc);
  if (!trace) throw std::runtime_error("cannot open trace.csv in " + cfg.output_dir);
  trace << header << '\n' << trace_columns(problem, with_truth) << '\n';
  if (options.resume) {
    for (const auto& r : options.resume->trace) trace << trace_row(r, with_truth) << '\n';
  }
  trace.flush();

  options.on_iteration = [&](const AgpState& s) {
    const IterationRecord& r = s.trace.back();
    const json cp = {{"config_hash", hash}, {"seed", cfg.run.seed}, {"state", state_to_json(s)}};
    write_file_atomic((out / "checkpoint.json").string(), cp.dump() + "\n");
    const json mix = {{"config_hash", hash}, {"seed", cfg.run.seed}, {"iteration", r.iter},
                      {"mixture", mixture_to_json(*s.mixture)}};
    write_file_atomic((out / ("mixture_iter_" + std::to_string(r.iter) + ".json")).string(), mix.dump(2) + "\n");
    trace << trace_row(r, with_truth) << '\n';
    trace.flush();
    log << "iter " << r.iter << " evals " << r.evals;
    if (r.d_kl) log << " d_kl " << *r.d_kl;
    if (r.kl_truth) log << " kl_truth " << *r.kl_truth;
    log << " accept " << r.accept_rate << std::endl;
  };

  const auto t0 = std::chrono::steady_clock::now();
  const RunResult result = run(problem, cfg.run, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_samples_csv((out / "samples.csv").string(), header, problem.parameter_names, result.state.samples->points);
  json approx = approx_to_json(result.approx);
  approx["config_hash"] = hash;
  approx["seed"] = cfg.run.seed;
  write_file_atomic((out / "approx.json").string(), approx.dump() + "\n");

  json summary = {{"config_hash", hash},
                  {"seed", cfg.run.seed},
                  {"problem", problem.name},
                  {"dim", problem.dim()},
                  {"acquisition", to_string(cfg.run.acquisition)},
                  {"adaptive_base", cfg.run.adaptive_base},
                  {"iterations", result.state.n + 1},
                  {"eval_count", result.state.eval_count},
                  {"termination", to_string(result.state.terminated)},
                  {"kl_history", result.state.kl_history},
                  {"timing_seconds", seconds}};
  const IterationRecord& last = result.trace.back();
  if (last.kl_truth) summary["final_kl_truth"] = *last.kl_truth;
  if (last.hellinger_truth) summary["final_hellinger_truth"] = *last.hellinger_truth;
  write_file_atomic((out / "run.json").string(), summary.dump(2) + "\n");
  log << "done: " << to_string(result.state.terminated) << " after " << result.state.n + 1 << " iterations, "
      << result.state.eval_count << " evaluations" << std::endl;
}

void cmd_reference(const ExperimentConfig& cfg, bool confirm, std::ostream& log) {
  const ProblemInstance inst = build_problem(cfg.problem);
  const Problem& problem = inst.problem;
  const long cost = estimate_reference_cost(cfg, problem.dim());
  if (cost > cfg.reference.budget_ceiling && !confirm) {
    throw ConfigError("reference run needs about " + std::to_string(cost) + " likelihood calls, above the ceiling of " +
                      std::to_string(cfg.reference.budget_ceiling) + "; pass --confirm to proceed");
  }
  const std::string hash = config_hash(cfg);
  const std::string header = header_line(hash, cfg.run.seed);
  const fs::path out(cfg.reference.output_dir);
  fs::create_directories(out);
  if (inst.toggle) write_toggle_data((out / "data.csv").string(), *inst.toggle, header);

  McmcSettings ms = cfg.run.mcmc;
  ms.n_samples = cfg.reference.samples;
  ms.burn_in = cfg.reference.burn_in;
  ms.seed = derive_seed(cfg.run.seed, 0x7265f);
  const LogDensity target([&problem](const ParamVector& x) { return log_joint(problem, x); }, problem.prior);
  log << "reference: " << ms.n_samples << " DRAM samples of the true posterior" << std::endl;
  const ChainResult chain = run_chain(target, ms, problem.prior.center());
  write_samples_csv((out / "reference_samples.csv").string(), header, problem.parameter_names, chain.samples.points);

  json summary = {{"config_hash", hash},
                  {"seed", cfg.run.seed},
                  {"problem", problem.name},
                  {"dim", problem.dim()},
                  {"samples", ms.n_samples},
                  {"acceptance_rate", chain.acceptance_rate}};
  if (problem.dim() <= 2) {
    const GridDensity grid = evaluate_on_grid(target, problem.prior, cfg.reference.grid_size);
    const double log_z = grid.log_normalizer();
    std::ostringstream text;
    text << header << '\n';
    for (const auto& name : problem.parameter_names) text << name << ',';
    text << "log_density\n";
    double mass = 0.0;
    for (Eigen::Index i = 0; i < grid.log_values.size(); ++i) {
      const ParamVector x = grid.cell_center(i);
      const double lp = grid.log_values[i] - log_z;
      mass += std::exp(lp) * grid.cell_volume();
      for (Eigen::Index k = 0; k < x.size(); ++k) text << fmt(x[k]) << ',';
      text << fmt(lp) << '\n';
    }
    write_file_atomic((out / "grid.csv").string(), text.str());
    summary["grid_size"] = cfg.reference.grid_size;
    summary["grid_log_normalizer"] = log_z;
    summary["grid_mass"] = mass;
  }
  write_file_atomic((out / "reference.json").string(), summary.dump(2) + "\n");
  log << "reference written to " << out.string() << std::endl;
}

void cmd_compare(const ExperimentConfig& cfg, const std::vector<std::string>& run_dirs,
                 const std::string& reference_dir, const std::string& output_dir, std::ostream& log) {
  if (run_dirs.empty()) throw ConfigError("compare: no run directories given");
  const ProblemInstance inst = build_problem(cfg.problem);
  const Problem& problem = inst.problem;
  const TruthReference truth = load_reference(reference_dir, problem);
  if (!truth.samples) throw ConfigError("compare: reference has no samples");
  const std::string header = header_line(config_hash(cfg), cfg.run.seed);
  const fs::path out(output_dir);
  fs::create_directories(out);

  std::ostringstream table;
  table << header << '\n' << "run,acquisition,iterations,evals";
  for (const auto& name : problem.parameter_names) table << ',' << name;
  if (truth.grid) table << ",grid_kl,grid_hellinger";
  table << '\n';
  std::ostringstream series;
  series << header << '\n' << "run,acquisition,iter,evals,kl_truth,hellinger_truth\n";

  for (const auto& dir : run_dirs) {
    const fs::path run_dir(dir);
    const json summary = read_json_file((run_dir / "run.json").string());
    if (summary.at("problem").get<std::string>() != problem.name || summary.at("dim").get<int>() != problem.dim()) {
      throw ConfigError("compare: " + dir + " is a run of a different problem");
    }
    const std::string label = run_dir.filename().empty() ? run_dir.parent_path().filename().string()
                                                         : run_dir.filename().string();
    const std::string acquisition = summary.at("acquisition").get<std::string>();
    const std::string samples_path = (run_dir / "samples.csv").string();
    const Matrix samples = samples_from_csv(read_csv(samples_path), problem.dim(), samples_path);
    const std::vector<MarginalComparison> per = compare_all_marginals(*truth.samples, samples);
    table << label << ',' << acquisition << ',' << summary.at("iterations").get<int>() << ','
          << summary.at("eval_count").get<long>();
    for (const auto& c : per) table << ',' << fmt(c.kl);
    if (truth.grid) {
      const PosteriorApprox approx = approx_from_json(read_json_file((run_dir / "approx.json").string()));
      TruthReference grid_only;
      grid_only.grid = truth.grid;
      const TruthMetrics m = compare_to_truth(
          grid_only, [&approx](const ParamVector& x) { return approx_log_density(approx, x); }, nullptr);
      table << ',' << fmt(m.kl) << ',' << fmt(m.hellinger);
    }
    table << '\n';

    const CsvTable trace = read_csv((run_dir / "trace.csv").string());
    const int kl_col = trace.column("kl_truth");
    const int hel_col = trace.column("hellinger_truth");
    if (kl_col >= 0) {
      for (const auto& row : trace.rows) {
        series << label << ',' << acquisition << ',' << fmt(row[0]) << ',' << fmt(row[1]) << ','
               << fmt(row[static_cast<std::size_t>(kl_col)]) << ',' << fmt(row[static_cast<std::size_t>(hel_col)])
               << '\n';
      }
    }
    log << "compared " << dir << std::endl;
  }
  write_file_atomic((out / "marginal_kld.csv").string(), table.str());
  write_file_atomic((out / "kl_vs_evals.csv").string(), series.str());
}

}  // namespace agp
