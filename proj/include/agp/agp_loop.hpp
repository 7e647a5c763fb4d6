#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "agp/core_types.hpp"
#include "agp/density_model.hpp"
#include "agp/gp_surrogate.hpp"
#include "agp/metrics.hpp"

namespace agp {

enum class Termination { Running, KlConverged, MaxIterations };

std::string to_string(Termination t);
Termination termination_from_string(const std::string& name);

/// Final approximation exp(g_n) * p_n restricted to the prior box. An empty
/// base means the prior itself.
struct PosteriorApprox {
  std::optional<GaussianMixture> base;
  GpModel gp;
  BoxDomain box;
};

/// GP posterior mean plus base log density; -inf outside the box.
double approx_log_density(const PosteriorApprox& a, const ParamVector& x);

struct IterationRecord {
  int iter = 0;
  long evals = 0;
  std::optional<double> d_kl;
  std::optional<double> kl_truth;
  std::optional<double> hellinger_truth;
  KernelParams kernel;
  double accept_rate = 0.0;
  int gmm_components = 0;
};

struct AgpState {
  int n = 0;
  /// Latest fitted mixture; empty until the first chain has been summarized.
  std::optional<GaussianMixture> mixture;
  DesignSet designs;
  std::optional<GpModel> gp;
  std::vector<double> kl_history;
  int consecutive_hits = 0;
  long eval_count = 0;
  Termination terminated = Termination::Running;
  /// Hyperparameters carried into the next full GP fit.
  std::optional<KernelParams> warm_start;
  std::vector<IterationRecord> trace;
  /// Approximation and chain from the most recent cycle.
  std::optional<PosteriorApprox> approx;
  std::optional<SampleBatch> samples;
};

/// m0 prior draws evaluated through log_joint. A draw whose evaluation fails is
/// redrawn up to 10 times. Throws ConfigError on an invalid config.
AgpState initialize(const Problem& problem, const RunConfig& config);

/// log f(x_i) - log p(x_i) for every design point; the prior box density when
/// `mixture` is empty.
Vector residual_targets(const DesignSet& designs, const GaussianMixture* mixture, const BoxDomain& prior);

/// k + 1 when d_kl < D_max, otherwise 0.
int update_kl_counter(int k, double d_kl, double D_max);

/// State after iteration n completes with counter k.
Termination termination_after(int k, int n, int K, int n_max);

/// Options for the diagnostics a step records but does not depend on.
struct StepOptions {
  const TruthReference* truth = nullptr;
};

/// One full cycle. Throws std::logic_error if the state is already terminated.
/// Errors from sub-modules are re-raised with the iteration index prepended.
AgpState step(AgpState state, const Problem& problem, const RunConfig& config, const StepOptions& options = {});

struct RunOptions {
  const TruthReference* truth = nullptr;
  /// Called after every completed iteration.
  std::function<void(const AgpState&)> on_iteration;
  /// Continue from a checkpointed state instead of initializing.
  std::optional<AgpState> resume;
};

struct RunResult {
  PosteriorApprox approx;
  std::vector<IterationRecord> trace;
  AgpState state;
};

RunResult run(const Problem& problem, const RunConfig& config, const RunOptions& options = {});

}  // namespace agp
