#pragma once

#include <functional>
#include <optional>
#include <string>

#include "agp/core_types.hpp"
#include "agp/density_model.hpp"

namespace agp {

struct ChainResult {
  SampleBatch samples;  // post burn-in, n_samples columns
  double acceptance_rate = 0.0;
  long accepted = 0;
  long iterations = 0;
  Matrix final_proposal_covariance;
};

/// One proposal decision, reported to an optional observer.
struct StepRecord {
  long iteration = 0;
  int stage = 1;  // 1 = primary proposal, 2 = delayed-rejection retry
  ParamVector current;
  double log_current = 0.0;
  ParamVector proposal;
  double log_proposal = 0.0;
  double log_u = 0.0;
  double log_alpha = 0.0;
  bool accepted = false;
};

using ChainObserver = std::function<void(const StepRecord&)>;

/// Plain Metropolis acceptance for a symmetric proposal, in log space.
double metropolis_log_alpha(double log_current, double log_proposal);

/// Second-stage delayed-rejection log acceptance probability for Gaussian
/// first-stage proposals with precision `first_stage_precision`:
///   alpha2 = min(1, pi(y2) q1(y2,y1) (1 - alpha1(y2,y1)) / (pi(x) q1(x,y1) (1 - alpha1(x,y1)))).
/// Returns -inf when pi(y2) = 0 or alpha1(y2, y1) = 1.
double delayed_rejection_log_alpha(const ParamVector& x, double log_x, const ParamVector& y1, double log_y1,
                                   const ParamVector& y2, double log_y2, const Matrix& first_stage_precision);

/// Delayed-rejection adaptive Metropolis over target.support(). The chain runs
/// burn_in + n_samples iterations and returns the last n_samples states.
/// `initial_covariance` overrides the default diagonal proposal
/// (initial_proposal_scale * box width)^2.
///
/// An adaptation window of adapt_start iterations without any acceptance cuts
/// the proposal scale by 10x. Throws NumericalError when that happens a 7th
/// time, ConfigError if target(init) is not finite. The adaptive covariance
/// gets epsilon * width^2 added per coordinate.
ChainResult run_chain(const LogDensity& target, const McmcSettings& settings, const ParamVector& init,
                      const std::optional<Matrix>& initial_covariance = std::nullopt,
                      const ChainObserver& observer = {});

/// Writes one sample per line, comma-separated coordinates.
void write_chain_trace(const std::string& path, const SampleBatch& samples);

}  // namespace agp
