#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "agp/core_types.hpp"

namespace agp {

double logsumexp(const Vector& v);

/// Log density tabulated at cell centers of a regular grid over a box (d <= 2).
/// Values are stored with the first coordinate varying fastest.
struct GridDensity {
  BoxDomain box;
  std::vector<int> shape;
  Vector log_values;

  double cell_volume() const;
  ParamVector cell_center(Eigen::Index flat) const;
  /// Normalizing constant log(sum_i exp(log_values_i) * cell_volume).
  double log_normalizer() const;
  /// Probability mass per cell after normalization, in log space.
  Vector log_masses() const;
};

GridDensity evaluate_on_grid(const std::function<double(const ParamVector&)>& log_density, const BoxDomain& box,
                             int points_per_dim = 400);

/// KL(p || q) between two grid densities over the same grid, both normalized by quadrature.
double grid_kl(const GridDensity& p, const GridDensity& q);

/// 1/2 * integral (sqrt p - sqrt q)^2 over the grid, in [0, 1].
double grid_hellinger(const GridDensity& p, const GridDensity& q);

double silverman_bandwidth(const Vector& samples);

/// Gaussian KDE log density at `at`, computed with log-sum-exp.
Vector kde_log_density(const Vector& samples, double bandwidth, const Vector& at);

struct MarginalComparison {
  double kl = 0.0;
  double hellinger = 0.0;
};

/// KL(reference || approx) and Hellinger between 1-d KDE marginals on a common
/// grid over [lo, hi]; the bandwidth is Silverman's rule on the reference.
MarginalComparison compare_marginals(const Vector& reference, const Vector& approx, double lo, double hi,
                                     int grid_points = 512);

/// compare_marginals for every coordinate of two sample sets (one sample per
/// column), each on a grid spanning both samples plus 5% padding.
std::vector<MarginalComparison> compare_all_marginals(const Matrix& reference, const Matrix& approx);

/// Empirical quantile (linear interpolation), q in [0, 1].
double quantile(Vector samples, double q);

/// Ground truth used for run diagnostics: a grid density for d <= 2 or
/// reference samples (one per column) otherwise.
struct TruthReference {
  std::optional<GridDensity> grid;
  std::optional<Matrix> samples;
};

struct TruthMetrics {
  double kl = 0.0;
  double hellinger = 0.0;
};

/// Grid mode: KL(truth || approx) and Hellinger of the approximate log density.
/// Sample mode: marginal comparisons against `approx_samples`, averaged over
/// coordinates. Throws std::invalid_argument when no truth is available.
TruthMetrics compare_to_truth(const TruthReference& truth,
                              const std::function<double(const ParamVector&)>& approx_log_density,
                              const Matrix* approx_samples);

}  // namespace agp
