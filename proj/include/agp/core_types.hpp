#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace agp {

using ParamVector = Eigen::VectorXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Raised when a configuration or precondition is violated before any work starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown (factorization failure, degenerate fit).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A forward-model / likelihood evaluation failed at a specific parameter value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, ParamVector where);
  const ParamVector& where() const { return where_; }
  /// Same error with `prefix` prepended to the message.
  EvaluationError with_context(const std::string& prefix) const;

 private:
  struct Raw {};
  EvaluationError(Raw, const std::string& message, ParamVector where)
      : std::runtime_error(message), where_(std::move(where)) {}
  ParamVector where_;
};

bool all_finite(const ParamVector& x);

/// Axis-aligned box; also the support of every uniform prior shipped here.
class BoxDomain {
 public:
  BoxDomain(ParamVector lower, ParamVector upper);

  Eigen::Index dim() const { return lower_.size(); }
  const ParamVector& lower() const { return lower_; }
  const ParamVector& upper() const { return upper_; }
  ParamVector width() const { return upper_ - lower_; }
  ParamVector center() const { return 0.5 * (lower_ + upper_); }

  bool contains(const ParamVector& x) const;
  ParamVector clamp(const ParamVector& x) const;

  // Affine map onto / from the unit cube.
  ParamVector to_unit(const ParamVector& x) const;
  ParamVector from_unit(const ParamVector& u) const;

  double log_volume() const;
  /// Normalized uniform log density; -inf outside.
  double log_uniform_density(const ParamVector& x) const;

 private:
  ParamVector lower_;
  ParamVector upper_;
};

/// Log density with an explicit support. Outside the support the value is -inf
/// and the wrapped callable is never invoked.
class LogDensity {
 public:
  using Fn = std::function<double(const ParamVector&)>;

  LogDensity(Fn fn, BoxDomain support) : fn_(std::move(fn)), support_(std::move(support)) {}

  double operator()(const ParamVector& x) const {
    if (!support_.contains(x)) return kNegInf;
    return fn_(x);
  }
  const BoxDomain& support() const { return support_; }

 private:
  Fn fn_;
  BoxDomain support_;
};

/// Bayesian inverse problem: uniform prior on a box plus a log-likelihood.
struct Problem {
  std::string name;
  BoxDomain prior;
  std::function<double(const ParamVector&)> log_likelihood;
  std::vector<std::string> parameter_names;

  int dim() const { return static_cast<int>(prior.dim()); }
};

double log_prior(const Problem& problem, const ParamVector& x);

/// log f(x) = log l(x) + log pi(x). Returns -inf outside the prior box; a
/// non-finite likelihood inside it raises EvaluationError.
double log_joint(const Problem& problem, const ParamVector& x);

/// log_joint plus an atomic count of every call made through it. This is the
/// only path the adaptive loop uses to touch the true likelihood.
class CountedLogJoint {
 public:
  explicit CountedLogJoint(const Problem& problem) : problem_(&problem) {}
  CountedLogJoint(const CountedLogJoint&) = delete;
  CountedLogJoint& operator=(const CountedLogJoint&) = delete;

  double operator()(const ParamVector& x) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return log_joint(*problem_, x);
  }
  long calls() const { return calls_.load(std::memory_order_relaxed); }
  const Problem& problem() const { return *problem_; }

 private:
  const Problem* problem_;
  std::atomic<long> calls_{0};
};

/// Design points with stored log f values and the iteration that produced them.
struct DesignSet {
  std::vector<ParamVector> points;
  std::vector<double> log_f_values;
  std::vector<int> provenance;

  std::size_t size() const { return points.size(); }
  void add(ParamVector x, double log_f, int iteration);
};

enum class AcquisitionKind { Entropy, Variance };

std::string to_string(AcquisitionKind kind);
AcquisitionKind acquisition_from_string(const std::string& name);

struct GpSettings {
  int n_starts = 8;
  int max_iters = 200;
  // Warm-started refits inside a selection batch.
  int refit_starts = 1;
  int refit_max_iters = 50;
  double lengthscale_min = 1e-2;
  double lengthscale_max = 10.0;
  double signal_variance_min = 1e-4;
  double signal_variance_max = 1e4;
  double nugget_floor = 1e-8;
  double nugget_max = 1e-2;

  void validate() const;
};

struct McmcSettings {
  int n_samples = 20000;
  int burn_in = -1;  // negative: a third of the full chain
  int adapt_start = 1000;
  int adapt_interval = 100;
  double dr_scale = 0.2;
  bool delayed_rejection = true;
  bool adapt = true;
  double initial_proposal_scale = 0.1;
  double epsilon = 1e-10;
  std::uint64_t seed = 0;

  int effective_burn_in() const { return burn_in >= 0 ? burn_in : n_samples / 3; }
  void validate() const;
};

struct SaSettings {
  int n_restarts = 5;
  int steps_per_restart = 400;
  double initial_temperature = 1.0;
  double cooling_rate = 0.95;
  double step_scale = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RunConfig {
  int m0 = 20;
  int m = 10;
  int M = 20000;
  int n_max = 100;
  double D_max = 0.01;
  int K = 5;
  std::uint64_t seed = 0;
  int gmm_max_components = 5;
  int kl_samples = 10000;
  AcquisitionKind acquisition = AcquisitionKind::Entropy;
  // false keeps the prior as the fixed base density (BAPE-style baseline).
  bool adaptive_base = true;

  GpSettings gp;
  McmcSettings mcmc;
  SaSettings sa;

  /// Throws ConfigError on any violated invariant.
  void validate(int dim) const;
};

/// Stream-splitting seed derivation (splitmix64 over the base seed and tags).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace agp
