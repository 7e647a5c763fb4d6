#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "agp/core_types.hpp"
#include "agp/gp_surrogate.hpp"

namespace agp {

/// Differential entropy of the log-normal exp(g + log_pn) with g ~ N(mean, variance):
///   H = mean + log_pn + 1/2 ln(2 pi e variance).  -inf when variance == 0.
double entropy_score(const GpPrediction& pred, double log_pn_at_x);

/// log Var[exp(g + log_pn)] = 2 (mean + log_pn) + variance + log(expm1(variance)).
/// -inf when variance == 0.
double variance_score(const GpPrediction& pred, double log_pn_at_x);

double acquisition_score(AcquisitionKind kind, const GpPrediction& pred, double log_pn_at_x);

using ScoreFn = std::function<double(const ParamVector&)>;
using StartSampler = std::function<ParamVector(std::mt19937_64&)>;

struct MaximizeResult {
  ParamVector x;
  double score = kNegInf;
  long evaluations = 0;
};

/// Simulated annealing over a box: restarts x steps, Gaussian moves of
/// step_scale * box width clamped into the box, geometric cooling. Returns the
/// best state visited over all restarts (first found wins ties).
/// Restart points come from `start_sampler` when given (rejected if outside the
/// box), uniform otherwise.
MaximizeResult maximize(const ScoreFn& score, const BoxDomain& domain, const SaSettings& settings,
                        const StartSampler& start_sampler = {});

struct SelectionRequest {
  const BoxDomain* domain = nullptr;
  AcquisitionKind kind = AcquisitionKind::Entropy;
  int m = 1;
  GpSettings gp;
  SaSettings sa;
  std::uint64_t seed = 0;
  /// Duplicate guard radius in unit-box coordinates.
  double duplicate_tolerance = 1e-9;
  double jitter_radius = 1e-4;
};

struct SelectionResult {
  std::vector<ParamVector> points;
  std::vector<double> log_f;
  GpModel gp;
  int refits = 0;
};

/// Sequential batch selection: maximize the acquisition score of the current GP,
/// evaluate log f at the maximizer, append it to the design, refit the GP on the
/// residual log f - log_pn (warm start), and repeat m times.
///
/// `design_x`/`design_log_f` hold the existing design set; `gp` must already be
/// fitted to its residuals. Evaluation errors propagate with the offending x.
SelectionResult select_batch(const std::vector<ParamVector>& design_x, const std::vector<double>& design_log_f,
                             const std::function<double(const ParamVector&)>& log_f, const LogDensity& log_pn,
                             const GpModel& gp, const SelectionRequest& request,
                             const StartSampler& start_sampler = {});

}  // namespace agp
