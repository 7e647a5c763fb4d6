#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "agp/core_types.hpp"

namespace agp {

/// log l(x) = -(x1 - 1)^2 / 100 - (x1^2 - x2)^2.
double rosenbrock_log_likelihood(const ParamVector& x);

/// Rosenbrock likelihood with a uniform prior on [-5, 5]^2.
Problem make_rosenbrock();

// Genetic toggle switch, x = (alpha1, alpha2, gamma, beta, eta, K):
//   du/dt = alpha1 / (1 + v^beta) - u
//   dv/dt = alpha2 / (1 + w^gamma) - v
//   w     = u / (1 + (IPTG / K)^eta)
inline constexpr double kToggleLargeNoiseVariance = 5e-4;
inline constexpr double kToggleSmallNoiseVariance = 1.25e-4;

struct ToggleSwitchSpec {
  std::array<double, 6> iptg_levels{1e-6, 5e-4, 7e-4, 1e-3, 3e-3, 5e-3};
  double observation_time = 10.0;
  double noise_variance = kToggleLargeNoiseVariance;
  Vector observed_data = Vector::Zero(6);
  double step_size = 0.01;
  /// (u, v) at t = 0; defaults to (alpha1 / 2, alpha2 / 2) when unset.
  std::optional<std::array<double, 2>> initial_condition;
};

BoxDomain toggle_prior_box();
ParamVector toggle_true_parameters();
std::vector<std::string> toggle_parameter_names();

/// v(observation_time) from fixed-step classical RK4 with the algebraic w
/// substituted at every stage. Throws EvaluationError on a non-finite state.
double toggle_forward(const ToggleSwitchSpec& spec, const ParamVector& x, double iptg);

/// Forward outputs at every IPTG level.
Vector toggle_outputs(const ToggleSwitchSpec& spec, const ParamVector& x);

/// sum_j log N(d_j - v_j(x); 0, sigma^2).
double toggle_log_likelihood(const ToggleSwitchSpec& spec, const ParamVector& x);

/// Noise-free outputs at x_true plus N(0, noise_variance) draws.
Vector make_synthetic_data(const ToggleSwitchSpec& spec, const ParamVector& x_true, std::uint64_t seed);

Problem make_toggle_switch(ToggleSwitchSpec spec);

/// Synthetic data file: header comment lines, then "iptg,observed" rows.
void write_toggle_data(const std::string& path, const ToggleSwitchSpec& spec, const std::string& header = {});
Vector read_toggle_data(const std::string& path, const ToggleSwitchSpec& spec);

}  // namespace agp
