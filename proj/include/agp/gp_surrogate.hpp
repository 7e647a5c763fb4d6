#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "agp/core_types.hpp"

namespace agp {

/// Squared-exponential ARD kernel hyperparameters. Lengthscales act on whatever
/// coordinates the kernel is evaluated in; GpModel always feeds unit-box coordinates.
struct KernelParams {
  Vector lengthscales;
  double signal_variance = 1.0;
  double nugget = 1e-8;
};

/// k(x, x2) = signal_variance * exp(-0.5 * sum_i ((x_i - x2_i) / l_i)^2).
/// Throws std::invalid_argument on dimension mismatch.
double kernel_eval(const KernelParams& p, const ParamVector& x, const ParamVector& x2);

/// Gram matrix over the columns of `a` and `b` (one point per column).
Matrix kernel_matrix(const KernelParams& p, const Matrix& a, const Matrix& b);

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Log marginal likelihood of centered targets under the kernel plus nugget:
///   -1/2 y^T (K + nugget I)^-1 y - 1/2 log det(K + nugget I) - n/2 log(2 pi).
/// Inputs are points-as-columns. Throws NumericalError if the factorization fails.
double log_marginal_likelihood(const KernelParams& p, const Matrix& x, const Vector& y);

struct LmlWithGradient {
  double value;
  /// d/d log(lengthscale_i) for each i, then d/d log(signal_variance).
  Vector gradient;
};

/// Same as log_marginal_likelihood plus the gradient in log-hyperparameters.
/// Returns nullopt when the Gram matrix does not factorize.
std::optional<LmlWithGradient> log_marginal_likelihood_with_gradient(const KernelParams& p,
                                                                     const Matrix& x,
                                                                     const Vector& y);

/// Trained GP regression model. Inputs are mapped to the unit box of `domain`;
/// targets are centered on their mean (mean_const) and divided by their standard
/// deviation (target_scale). Predictions are reported in the original units.
class GpModel {
 public:
  /// Condition a GP on data with fixed hyperparameters (given in standardized
  /// units). The nugget is escalated x10 up to `nugget_max` if the Gram matrix
  /// does not factorize; NumericalError after that.
  static GpModel condition(const BoxDomain& domain, std::vector<ParamVector> train_x, Vector train_y,
                           KernelParams kernel, double nugget_max = 1e-2);

  GpPrediction predict(const ParamVector& x) const;
  double predict_mean(const ParamVector& x) const;
  /// Predictive variance before clamping at zero.
  double raw_variance(const ParamVector& x) const;

  double log_marginal_likelihood() const;

  const KernelParams& kernel() const { return kernel_; }
  double mean_const() const { return mean_const_; }
  double target_scale() const { return target_scale_; }
  const BoxDomain& domain() const { return domain_; }
  const std::vector<ParamVector>& train_x() const { return train_x_; }
  const Vector& train_y() const { return train_y_; }
  const Matrix& chol_factor() const { return chol_; }
  const Vector& alpha() const { return alpha_; }
  std::size_t size() const { return train_x_.size(); }

 private:
  GpModel(BoxDomain domain) : domain_(std::move(domain)) {}
  Vector cross_kernel(const ParamVector& x) const;

  BoxDomain domain_;
  KernelParams kernel_;
  double mean_const_ = 0.0;
  double target_scale_ = 1.0;
  std::vector<ParamVector> train_x_;
  Vector train_y_;
  Matrix unit_x_;   // d x n
  Vector scaled_y_; // (y - mean_const) / target_scale
  Matrix chol_;     // lower triangular
  Vector alpha_;
};

struct GpFitReport {
  /// LML (standardized data) at each start before and after local ascent.
  std::vector<double> initial_lml;
  std::vector<double> final_lml;
  int best_start = -1;
};

struct GpFitOptions {
  int n_starts = 8;
  int max_iters = 200;
  std::uint64_t seed = 0;
  /// Previous optimum used as start 0.
  std::optional<KernelParams> warm_start;
};

/// Multi-start maximization of the log marginal likelihood over log-hyperparameters
/// within the GpSettings bounds, followed by conditioning at the best optimum.
/// Requires >= 2 distinct points and finite targets.
GpModel fit(const BoxDomain& domain, const std::vector<ParamVector>& train_x, const Vector& train_y,
            const GpSettings& settings, const GpFitOptions& options, GpFitReport* report = nullptr);

}  // namespace agp
