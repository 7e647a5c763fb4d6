#include "agp/problems.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace agp {

double rosenbrock_log_likelihood(const ParamVector& x) {
  if (x.size() != 2) throw std::invalid_argument("rosenbrock: expects a 2-vector");
  const double a = x[0] - 1.0;
  const double b = x[0] * x[0] - x[1];
  return -a * a / 100.0 - b * b;
}

Problem make_rosenbrock() {
  return Problem{"rosenbrock", BoxDomain(Vector::Constant(2, -5.0), Vector::Constant(2, 5.0)),
                 rosenbrock_log_likelihood, {"x1", "x2"}};
}

BoxDomain toggle_prior_box() {
  Vector lo(6), hi(6);
  lo << 120.0, 15.0, 2.1, 0.85, 1.3, 2.3e-5;
  hi << 200.0, 16.0, 2.9, 1.15, 2.7, 3.7e-5;
  return BoxDomain(lo, hi);
}

ParamVector toggle_true_parameters() {
  ParamVector x(6);
  x << 143.0, 15.95, 2.70, 0.96, 2.34, 2.70e-5;
  return x;
}

std::vector<std::string> toggle_parameter_names() { return {"alpha1", "alpha2", "gamma", "beta", "eta", "K"}; }

double toggle_forward(const ToggleSwitchSpec& spec, const ParamVector& x, double iptg) {
  if (x.size() != 6) throw std::invalid_argument("toggle_forward: expects 6 parameters");
  if (!(iptg > 0.0)) throw std::invalid_argument("toggle_forward: IPTG level must be positive");
  const double alpha1 = x[0], alpha2 = x[1], gamma = x[2], beta = x[3], eta = x[4], k = x[5];
  const int steps = static_cast<int>(std::lround(spec.observation_time / spec.step_size));
  if (steps < 1 || std::abs(steps * spec.step_size - spec.observation_time) > 1e-9 * spec.observation_time) {
    throw std::invalid_argument("toggle_forward: step size must divide the observation time");
  }
  const double h = spec.step_size;
  const double induction = 1.0 / (1.0 + std::pow(iptg / k, eta));

  auto rhs = [&](double u, double v, double& du, double& dv) {
    const double w = u * induction;
    du = alpha1 / (1.0 + std::pow(v, beta)) - u;
    dv = alpha2 / (1.0 + std::pow(w, gamma)) - v;
  };

  double u = spec.initial_condition ? (*spec.initial_condition)[0] : alpha1 / 2.0;
  double v = spec.initial_condition ? (*spec.initial_condition)[1] : alpha2 / 2.0;
  for (int s = 0; s < steps; ++s) {
    double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v;
    rhs(u, v, k1u, k1v);
    rhs(u + 0.5 * h * k1u, v + 0.5 * h * k1v, k2u, k2v);
    rhs(u + 0.5 * h * k2u, v + 0.5 * h * k2v, k3u, k3v);
    rhs(u + h * k3u, v + h * k3v, k4u, k4v);
    u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (!std::isfinite(u) || !std::isfinite(v)) {
      throw EvaluationError("toggle_forward: integrator produced a non-finite state", x);
    }
  }
  return v;
}

Vector toggle_outputs(const ToggleSwitchSpec& spec, const ParamVector& x) {
  Vector out(static_cast<Eigen::Index>(spec.iptg_levels.size()));
  for (std::size_t j = 0; j < spec.iptg_levels.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] = toggle_forward(spec, x, spec.iptg_levels[j]);
  }
  return out;
}

double toggle_log_likelihood(const ToggleSwitchSpec& spec, const ParamVector& x) {
  const Vector v = toggle_outputs(spec, x);
  const double var = spec.noise_variance;
  const double n = static_cast<double>(v.size());
  const double sq = (spec.observed_data - v).squaredNorm();
  return -0.5 * n * std::log(2.0 * std::numbers::pi * var) - 0.5 * sq / var;
}

Vector make_synthetic_data(const ToggleSwitchSpec& spec, const ParamVector& x_true, std::uint64_t seed) {
  Vector data = toggle_outputs(spec, x_true);
  if (spec.noise_variance > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.noise_variance));
    for (Eigen::Index j = 0; j < data.size(); ++j) data[j] += noise(rng);
  }
  return data;
}

Problem make_toggle_switch(ToggleSwitchSpec spec) {
  if (spec.observed_data.size() != static_cast<Eigen::Index>(spec.iptg_levels.size())) {
    throw ConfigError("toggle switch: observed data must have one value per IPTG level");
  }
  if (!(spec.noise_variance > 0.0)) throw ConfigError("toggle switch: noise variance must be > 0");
  for (double level : spec.iptg_levels) {
    if (!(level > 0.0)) throw ConfigError("toggle switch: IPTG levels must be positive");
  }
  return Problem{"toggle_switch", toggle_prior_box(),
                 [spec = std::move(spec)](const ParamVector& x) { return toggle_log_likelihood(spec, x); },
                 toggle_parameter_names()};
}

void write_toggle_data(const std::string& path, const ToggleSwitchSpec& spec, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  if (!header.empty()) out << header << '\n';
  out << "iptg,observed\n";
  for (std::size_t j = 0; j < spec.iptg_levels.size(); ++j) {
    out << spec.iptg_levels[j] << ',' << spec.observed_data[static_cast<Eigen::Index>(j)] << '\n';
  }
}

Vector read_toggle_data(const std::string& path, const ToggleSwitchSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open toggle data file " + path);
  std::string line;
  Vector data(static_cast<Eigen::Index>(spec.iptg_levels.size()));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("iptg", 0) == 0) continue;
    std::istringstream ls(line);
    double level = 0.0, value = 0.0;
    char comma = 0;
    if (!(ls >> level >> comma >> value) || comma != ',') throw ConfigError("malformed toggle data row: " + line);
    if (row >= spec.iptg_levels.size() || std::abs(level - spec.iptg_levels[row]) > 1e-12 * spec.iptg_levels[row]) {
      throw ConfigError("toggle data file does not match the configured IPTG levels");
    }
    data[static_cast<Eigen::Index>(row++)] = value;
  }
  if (row != spec.iptg_levels.size()) throw ConfigError("toggle data file has the wrong number of rows");
  return data;
}

}  // namespace agp
