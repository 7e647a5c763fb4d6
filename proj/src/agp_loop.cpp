#include "agp/agp_loop.hpp"

#include <random>
#include <stdexcept>

#include "agp/acquisition.hpp"
#include "agp/mcmc.hpp"

namespace agp {

namespace {

enum Stage : std::uint64_t { kInit = 0x1417, kGpFit = 1, kChain = 2, kMixture = 3, kKl = 4, kSelect = 5 };

double base_log_density(const GaussianMixture* mixture, const BoxDomain& box, const ParamVector& x) {
  return mixture ? mixture->log_pdf(x) : box.log_uniform_density(x);
}

ParamVector chain_start(const AgpState& state, const BoxDomain& box) {
  return state.mixture ? box.clamp(state.mixture->mean()) : box.center();
}

void run_cycle(AgpState& state, const Problem& problem, const RunConfig& config, const StepOptions& options) {
  const int n = state.n;
  const auto tag = static_cast<std::uint64_t>(n);
  const BoxDomain& box = problem.prior;
  const GaussianMixture* base = (config.adaptive_base && state.mixture) ? &*state.mixture : nullptr;

  const Vector targets = residual_targets(state.designs, base, box);
  GpFitOptions fit_options;
  fit_options.n_starts = config.gp.n_starts;
  fit_options.max_iters = config.gp.max_iters;
  fit_options.seed = derive_seed(config.seed, tag, kGpFit);
  fit_options.warm_start = state.warm_start;
  GpModel gp = fit(box, state.designs.points, targets, config.gp, fit_options);

  PosteriorApprox approx{base ? std::optional<GaussianMixture>(*base) : std::nullopt, gp, box};
  const LogDensity target([&approx](const ParamVector& x) { return approx_log_density(approx, x); }, box);

  McmcSettings mcmc = config.mcmc;
  mcmc.n_samples = config.M;
  mcmc.seed = derive_seed(config.seed, tag, kChain);
  std::optional<Matrix> proposal;
  if (state.mixture) {
    const double d = static_cast<double>(box.dim());
    proposal = (2.38 * 2.38 / d) * state.mixture->covariance();
  }
  ChainResult chain = run_chain(target, mcmc, chain_start(state, box), proposal);
  chain.samples.source_iteration = n;

  GaussianMixture next = fit_gmm(chain.samples, config.gmm_max_components, derive_seed(config.seed, tag, kMixture));

  IterationRecord record;
  record.iter = n;
  record.kernel = gp.kernel();
  record.accept_rate = chain.acceptance_rate;
  record.gmm_components = next.components();
  if (state.mixture) {
    const double d_kl = kl_between(*state.mixture, next, config.kl_samples, derive_seed(config.seed, tag, kKl));
    state.kl_history.push_back(d_kl);
    state.consecutive_hits = update_kl_counter(state.consecutive_hits, d_kl, config.D_max);
    record.d_kl = d_kl;
  }
  if (options.truth) {
    const TruthMetrics m = compare_to_truth(
        *options.truth, [&approx](const ParamVector& x) { return approx_log_density(approx, x); },
        &chain.samples.points);
    record.kl_truth = m.kl;
    record.hellinger_truth = m.hellinger;
  }

  state.terminated = termination_after(state.consecutive_hits, n, config.K, config.n_max);

  if (state.terminated == Termination::Running) {
    SelectionRequest request;
    request.domain = &box;
    request.kind = config.acquisition;
    request.m = config.m;
    request.gp = config.gp;
    request.sa = config.sa;
    request.seed = derive_seed(config.seed, tag, kSelect);
    const LogDensity log_pn([base, &box](const ParamVector& x) { return base_log_density(base, box, x); }, box);
    const auto log_f = [&problem](const ParamVector& x) { return log_joint(problem, x); };
    // Half of the annealing restarts start from the new mixture, half uniformly.
    const StartSampler starts = [&next, &box](std::mt19937_64& rng) {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (unif(rng) < 0.5) return next.sample_one(rng);
      ParamVector u(box.dim());
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = unif(rng);
      return box.from_unit(u);
    };
    SelectionResult selection =
        select_batch(state.designs.points, state.designs.log_f_values, log_f, log_pn, gp, request, starts);
    for (std::size_t j = 0; j < selection.points.size(); ++j) {
      state.designs.add(selection.points[j], selection.log_f[j], n + 1);
    }
    state.warm_start = selection.gp.kernel();
  } else {
    state.warm_start = gp.kernel();
  }

  state.eval_count = static_cast<long>(state.designs.size());
  record.evals = state.eval_count;
  state.trace.push_back(record);
  state.gp = std::move(gp);
  state.mixture = std::move(next);
  state.approx = std::move(approx);
  state.samples = std::move(chain.samples);
  if (state.terminated == Termination::Running) ++state.n;
}

}  // namespace

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Running:
      return "running";
    case Termination::KlConverged:
      return "kl_converged";
    case Termination::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

Termination termination_from_string(const std::string& name) {
  if (name == "running") return Termination::Running;
  if (name == "kl_converged") return Termination::KlConverged;
  if (name == "max_iterations") return Termination::MaxIterations;
  throw ConfigError("unknown termination state: " + name);
}

double approx_log_density(const PosteriorApprox& a, const ParamVector& x) {
  if (!a.box.contains(x)) return kNegInf;
  const double base = a.base ? a.base->log_pdf(x) : a.box.log_uniform_density(x);
  return a.gp.predict_mean(x) + base;
}

AgpState initialize(const Problem& problem, const RunConfig& config) {
  config.validate(problem.dim());
  const BoxDomain& box = problem.prior;
  std::mt19937_64 rng(derive_seed(config.seed, kInit));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  AgpState state;
  for (int i = 0; i < config.m0; ++i) {
    for (int attempt = 0;; ++attempt) {
      ParamVector u(box.dim());
      for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = unif(rng);
      const ParamVector x = box.from_unit(u);
      try {
        const double value = log_joint(problem, x);
        state.designs.add(x, value, 0);
        break;
      } catch (const EvaluationError& e) {
        if (attempt >= 10) throw e.with_context("initial design: ");
      }
    }
  }
  state.eval_count = static_cast<long>(state.designs.size());
  return state;
}

Vector residual_targets(const DesignSet& designs, const GaussianMixture* mixture, const BoxDomain& prior) {
  Vector out(static_cast<Eigen::Index>(designs.size()));
  for (std::size_t i = 0; i < designs.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = designs.log_f_values[i] - base_log_density(mixture, prior, designs.points[i]);
  }
  return out;
}

int update_kl_counter(int k, double d_kl, double D_max) { return d_kl < D_max ? k + 1 : 0; }

Termination termination_after(int k, int n, int K, int n_max) {
  if (k >= K) return Termination::KlConverged;
  if (n + 1 >= n_max) return Termination::MaxIterations;
  return Termination::Running;
}

AgpState step(AgpState state, const Problem& problem, const RunConfig& config, const StepOptions& options) {
  if (state.terminated != Termination::Running) throw std::logic_error("step: state already terminated");
  const std::string where = "iteration " + std::to_string(state.n) + ": ";
  try {
    run_cycle(state, problem, config, options);
  } catch (const EvaluationError& e) {
    throw e.with_context(where);
  } catch (const NumericalError& e) {
    throw NumericalError(where + e.what());
  }
  return state;
}

RunResult run(const Problem& problem, const RunConfig& config, const RunOptions& options) {
  config.validate(problem.dim());
  AgpState state = options.resume ? *options.resume : initialize(problem, config);
  StepOptions step_options;
  step_options.truth = options.truth;
  while (state.terminated == Termination::Running) {
    state = step(std::move(state), problem, config, step_options);
    if (options.on_iteration) options.on_iteration(state);
  }
  if (!state.approx) throw std::logic_error("run: resumed state is terminated but carries no approximation");
  RunResult out{*state.approx, state.trace, std::move(state)};
  return out;
}

}  // namespace agp
