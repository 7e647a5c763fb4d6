#include "agp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace agp {

double logsumexp(const Vector& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

namespace {

void require_same_grid(const GridDensity& p, const GridDensity& q) {
  if (p.shape != q.shape || p.log_values.size() != q.log_values.size() ||
      !p.box.lower().isApprox(q.box.lower()) || !p.box.upper().isApprox(q.box.upper())) {
    throw std::invalid_argument("grid densities are not on the same grid");
  }
}

}  // namespace

double GridDensity::cell_volume() const {
  double vol = 1.0;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    vol *= (box.upper()[static_cast<Eigen::Index>(i)] - box.lower()[static_cast<Eigen::Index>(i)]) / shape[i];
  }
  return vol;
}

ParamVector GridDensity::cell_center(Eigen::Index flat) const {
  ParamVector x(static_cast<Eigen::Index>(shape.size()));
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::Index idx = flat % shape[i];
    flat /= shape[i];
    const double h = (box.upper()[ii] - box.lower()[ii]) / shape[i];
    x[ii] = box.lower()[ii] + (static_cast<double>(idx) + 0.5) * h;
  }
  return x;
}

double GridDensity::log_normalizer() const { return logsumexp(log_values) + std::log(cell_volume()); }

Vector GridDensity::log_masses() const { return log_values.array() - logsumexp(log_values); }

GridDensity evaluate_on_grid(const std::function<double(const ParamVector&)>& log_density, const BoxDomain& box,
                             int points_per_dim) {
  if (box.dim() > 2) throw std::invalid_argument("evaluate_on_grid: only d <= 2 is supported");
  if (points_per_dim < 2) throw std::invalid_argument("evaluate_on_grid: need at least 2 points per dimension");
  GridDensity g{box, std::vector<int>(static_cast<std::size_t>(box.dim()), points_per_dim), {}};
  Eigen::Index total = 1;
  for (int s : g.shape) total *= s;
  g.log_values.resize(total);
  for (Eigen::Index i = 0; i < total; ++i) g.log_values[i] = log_density(g.cell_center(i));
  return g;
}

double grid_kl(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p, q);
  const Vector lp = p.log_masses();
  const Vector lq = q.log_masses();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    if (lp[i] == kNegInf) continue;
    if (lq[i] == kNegInf) return std::numeric_limits<double>::infinity();
    kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  }
  return std::max(0.0, kl);
}

double grid_hellinger(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p, q);
  const Vector lp = p.log_masses();
  const Vector lq = q.log_masses();
  const double bc = (0.5 * (lp + lq).array()).exp().sum();
  return std::clamp(1.0 - bc, 0.0, 1.0);
}

double silverman_bandwidth(const Vector& samples) {
  const double n = static_cast<double>(samples.size());
  if (samples.size() < 2) throw std::invalid_argument("silverman_bandwidth: need at least 2 samples");
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().sum() / (n - 1.0));
  const double iqr = quantile(samples, 0.75) - quantile(samples, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1e-12 * std::max(1.0, std::abs(mean));
  return 0.9 * spread * std::pow(n, -0.2);
}

Vector kde_log_density(const Vector& samples, double bandwidth, const Vector& at) {
  if (samples.size() == 0 || !(bandwidth > 0.0)) throw std::invalid_argument("kde: empty samples or bad bandwidth");
  const double log_norm =
      -std::log(static_cast<double>(samples.size())) - std::log(bandwidth) - 0.5 * std::log(2.0 * std::numbers::pi);
  Vector out(at.size());
  Vector terms(samples.size());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    terms = -0.5 * ((samples.array() - at[i]) / bandwidth).square();
    out[i] = logsumexp(terms) + log_norm;
  }
  return out;
}

MarginalComparison compare_marginals(const Vector& reference, const Vector& approx, double lo, double hi,
                                     int grid_points) {
  if (!(lo < hi) || grid_points < 2) throw std::invalid_argument("compare_marginals: bad grid");
  const double h = silverman_bandwidth(reference);
  Vector grid(grid_points);
  const double cell = (hi - lo) / grid_points;
  for (int i = 0; i < grid_points; ++i) grid[i] = lo + (i + 0.5) * cell;
  GridDensity p{BoxDomain(Vector::Constant(1, lo), Vector::Constant(1, hi)), {grid_points},
                kde_log_density(reference, h, grid)};
  GridDensity q{p.box, p.shape, kde_log_density(approx, h, grid)};
  return {grid_kl(p, q), grid_hellinger(p, q)};
}

std::vector<MarginalComparison> compare_all_marginals(const Matrix& reference, const Matrix& approx) {
  if (reference.rows() != approx.rows()) throw std::invalid_argument("compare_all_marginals: dimension mismatch");
  std::vector<MarginalComparison> out;
  for (Eigen::Index k = 0; k < reference.rows(); ++k) {
    const Vector r = reference.row(k).transpose();
    const Vector a = approx.row(k).transpose();
    const double lo = std::min(r.minCoeff(), a.minCoeff());
    const double hi = std::max(r.maxCoeff(), a.maxCoeff());
    const double pad = hi > lo ? 0.05 * (hi - lo) : std::max(1e-12, 1e-6 * std::abs(lo));
    out.push_back(compare_marginals(r, a, lo - pad, hi + pad));
  }
  return out;
}

double quantile(Vector samples, double q) {
  if (samples.size() == 0) throw std::invalid_argument("quantile: empty sample");
  std::sort(samples.data(), samples.data() + samples.size());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, samples.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return samples[lo] * (1.0 - frac) + samples[hi] * frac;
}

TruthMetrics compare_to_truth(const TruthReference& truth,
                              const std::function<double(const ParamVector&)>& approx_log_density,
                              const Matrix* approx_samples) {
  if (truth.grid) {
    const std::vector<int>& shape = truth.grid->shape;
    const GridDensity approx = evaluate_on_grid(approx_log_density, truth.grid->box, shape.front());
    return {grid_kl(*truth.grid, approx), grid_hellinger(*truth.grid, approx)};
  }
  if (truth.samples && approx_samples) {
    TruthMetrics out;
    const std::vector<MarginalComparison> per = compare_all_marginals(*truth.samples, *approx_samples);
    for (const auto& c : per) {
      out.kl += c.kl;
      out.hellinger += c.hellinger;
    }
    out.kl /= static_cast<double>(per.size());
    out.hellinger /= static_cast<double>(per.size());
    return out;
  }
  throw std::invalid_argument("compare_to_truth: no reference truth available");
}

}  // namespace agp
