#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "agp/core_types.hpp"

namespace agp {

/// A batch of draws, one point per column (d x n).
struct SampleBatch {
  Matrix points;
  int source_iteration = -1;

  Eigen::Index size() const { return points.cols(); }
  Eigen::Index dim() const { return points.rows(); }
  ParamVector row(Eigen::Index i) const { return points.col(i); }
};

/// Weighted mixture of full-covariance Gaussians.
class GaussianMixture {
 public:
  /// Weights are normalized to sum to one; each covariance must be SPD.
  /// Throws std::invalid_argument otherwise.
  GaussianMixture(Vector weights, std::vector<ParamVector> means, std::vector<Matrix> covariances);

  int components() const { return static_cast<int>(weights_.size()); }
  int dim() const { return static_cast<int>(means_.front().size()); }
  const Vector& weights() const { return weights_; }
  const std::vector<ParamVector>& means() const { return means_; }
  const std::vector<Matrix>& covariances() const { return covariances_; }

  /// log sum_j w_j N(x; mu_j, Sigma_j), via log-sum-exp.
  double log_pdf(const ParamVector& x) const;
  /// Batched log_pdf over the columns of `points`.
  Vector log_pdf(const Matrix& points) const;
  /// log N_j(x) for every component, one row per component.
  Matrix component_log_densities(const Matrix& points) const;

  ParamVector mean() const;
  Matrix covariance() const;

  SampleBatch sample(int n, std::uint64_t seed) const;
  ParamVector sample_one(std::mt19937_64& rng) const;

 private:
  Vector weights_;
  std::vector<ParamVector> means_;
  std::vector<Matrix> covariances_;
  std::vector<Matrix> chol_;          // lower factors
  std::vector<double> log_norm_;      // -d/2 log 2pi - 1/2 log det
};

struct GmmCandidate {
  int components = 0;
  double log_likelihood = kNegInf;  // total over samples
  double bic = std::numeric_limits<double>::infinity();
  bool converged = false;
  /// Mean per-sample log-likelihood after every EM iteration of the winning restart.
  std::vector<double> ll_trace;
};

struct GmmFitReport {
  std::vector<GmmCandidate> candidates;
  int selected_components = 0;
};

struct GmmFitOptions {
  int restarts = 3;
  int max_em_iters = 500;
  double tolerance = 1e-8;  // on the mean per-sample log-likelihood
  double regularization = 1e-6;  // times trace(sample covariance)/d, standardized coordinates
};

/// BIC-best mixture over 1..max_components, each fitted by EM from k-means++
/// seeded restarts. EM works on per-coordinate standardized samples; reported
/// likelihoods are in the original coordinates.
/// Requires samples.size() >= 10 * d * max_components.
GaussianMixture fit_gmm(const SampleBatch& samples, int max_components, std::uint64_t seed,
                        const GmmFitOptions& options = {}, GmmFitReport* report = nullptr);

/// log_pdf convenience wrapper.
inline double log_pdf(const GaussianMixture& g, const ParamVector& x) { return g.log_pdf(x); }

inline SampleBatch sample(const GaussianMixture& g, int n, std::uint64_t seed) { return g.sample(n, seed); }

struct KlEstimate {
  double raw = 0.0;           // unclamped Monte Carlo mean
  double standard_error = 0.0;
  double clamped() const { return raw > 0.0 ? raw : 0.0; }
};

/// Monte Carlo KL(prev || curr) from n_mc draws of prev. Requires n_mc >= 1e4.
KlEstimate kl_estimate(const GaussianMixture& prev, const GaussianMixture& curr, int n_mc, std::uint64_t seed);

/// Clamped KL estimate used by the stopping rule.
double kl_between(const GaussianMixture& prev, const GaussianMixture& curr, int n_mc, std::uint64_t seed);

}  // namespace agp
