#include "agp/density_model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace agp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Vector column_logsumexp(const Matrix& a) {
  const Eigen::RowVectorXd mx = a.colwise().maxCoeff();
  const Matrix shifted = (a.rowwise() - mx).array().exp().matrix();
  Vector out = (shifted.colwise().sum().array().log() + mx.array()).transpose();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (!std::isfinite(mx[j])) out[j] = mx[j];
  }
  return out;
}

Matrix sample_covariance(const Matrix& x) {
  const Vector mu = x.rowwise().mean();
  const Matrix c = x.colwise() - mu;
  return (c * c.transpose()) / static_cast<double>(std::max<Eigen::Index>(1, x.cols() - 1));
}

struct EmRun {
  bool ok = false;
  Vector weights;
  std::vector<ParamVector> means;
  std::vector<Matrix> covs;
  double total_ll = kNegInf;
  bool converged = false;
  std::vector<double> ll_trace;
};

// k-means++ seeding followed by a handful of Lloyd iterations.
std::vector<int> kmeans_assign(const Matrix& x, int c, std::mt19937_64& rng) {
  const Eigen::Index n = x.cols();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  if (c == 1) return labels;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix centers(x.rows(), c);
  centers.col(0) = x.col(static_cast<Eigen::Index>(unif(rng) * static_cast<double>(n)) % n);
  Vector d2 = (x.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  for (int k = 1; k < c; ++k) {
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double target = unif(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(unif(rng) * static_cast<double>(n)) % n;
    }
    centers.col(k) = x.col(pick);
    d2 = d2.cwiseMin((x.colwise() - centers.col(k)).colwise().squaredNorm().transpose());
  }
  Matrix dist(c, n);
  for (int iter = 0; iter < 10; ++iter) {
    // Squared distances up to the per-point constant |x_i|^2.
    dist.noalias() = -2.0 * centers.transpose() * x;
    dist.colwise() += centers.colwise().squaredNorm().transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      dist.col(i).minCoeff(&best);
      labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    Matrix sums = Matrix::Zero(x.rows(), c);
    Vector counts = Vector::Zero(c);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(labels[static_cast<std::size_t>(i)]) += x.col(i);
      counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (int k = 0; k < c; ++k) {
      if (counts[k] > 0) centers.col(k) = sums.col(k) / counts[k];
    }
  }
  return labels;
}

// Initial parameters from hard k-means assignments; ok stays false if a cluster is too small.
EmRun kmeans_start(const Matrix& x, int c, double reg, const Matrix& global_cov, std::mt19937_64& rng) {
  const Eigen::Index n = x.cols();
  const Eigen::Index d = x.rows();
  const double min_mass = static_cast<double>(d + 1);
  EmRun run;

  const std::vector<int> labels = kmeans_assign(x, c, rng);
  run.weights = Vector::Zero(c);
  run.means.assign(static_cast<std::size_t>(c), ParamVector::Zero(d));
  run.covs.assign(static_cast<std::size_t>(c), Matrix::Zero(d, d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = labels[static_cast<std::size_t>(i)];
    run.weights[k] += 1.0;
    run.means[static_cast<std::size_t>(k)] += x.col(i);
  }
  for (int k = 0; k < c; ++k) {
    if (run.weights[k] < min_mass) return run;
    run.means[static_cast<std::size_t>(k)] /= run.weights[k];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = labels[static_cast<std::size_t>(i)];
    const Vector diff = x.col(i) - run.means[static_cast<std::size_t>(k)];
    run.covs[static_cast<std::size_t>(k)] += diff * diff.transpose();
  }
  for (int k = 0; k < c; ++k) {
    auto& cov = run.covs[static_cast<std::size_t>(k)];
    cov /= run.weights[k];
    cov.diagonal().array() += reg;
    if (Eigen::LLT<Matrix>(cov).info() != Eigen::Success) cov = global_cov;
  }
  run.weights /= static_cast<double>(n);
  run.ok = true;
  return run;
}

EmRun run_em(const Matrix& x, EmRun run, double reg, const GmmFitOptions& options) {
  const Eigen::Index n = x.cols();
  const Eigen::Index d = x.rows();
  const auto c = static_cast<int>(run.weights.size());
  const double min_mass = static_cast<double>(d + 1);
  run.ok = false;
  run.ll_trace.clear();

  double prev_mean_ll = kNegInf;
  Matrix resp(c, n);  // log densities, then responsibilities in place
  Matrix centered(d, n);
  Matrix weighted(d, n);
  Eigen::RowVectorXd mx(n);
  Eigen::RowVectorXd ll(n);
  for (int iter = 0; iter < options.max_em_iters; ++iter) {
    // E-step.
    for (int k = 0; k < c; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Eigen::LLT<Matrix> llt(run.covs[ks]);
      if (llt.info() != Eigen::Success) return run;
      const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      const double offset = std::log(run.weights[k]) - 0.5 * static_cast<double>(d) * kLog2Pi - 0.5 * log_det;
      centered = x.colwise() - run.means[ks];
      llt.matrixL().solveInPlace(centered);
      resp.row(k) = (offset - 0.5 * centered.colwise().squaredNorm().array()).matrix();
    }
    mx = resp.colwise().maxCoeff();
    if (!mx.allFinite()) return run;
    resp.rowwise() -= mx;
    resp = resp.array().exp().matrix();
    ll = resp.colwise().sum();
    resp.array().rowwise() /= ll.array();
    ll = (ll.array().log() + mx.array()).matrix();
    const double mean_ll = ll.mean();
    if (!std::isfinite(mean_ll)) return run;
    run.ll_trace.push_back(mean_ll);

    if (std::abs(mean_ll - prev_mean_ll) < options.tolerance) {
      run.converged = true;
      break;
    }
    prev_mean_ll = mean_ll;

    // M-step.
    const Vector mass = resp.rowwise().sum();
    for (int k = 0; k < c; ++k) {
      if (mass[k] < min_mass) return run;  // collapsed component
      const Vector mu = x * resp.row(k).transpose() / mass[k];
      centered = x.colwise() - mu;
      weighted = centered.array().rowwise() * resp.row(k).array();
      Matrix cov = weighted * centered.transpose() / mass[k];
      cov.diagonal().array() += reg;
      run.means[static_cast<std::size_t>(k)] = mu;
      run.covs[static_cast<std::size_t>(k)] = 0.5 * (cov + cov.transpose());
    }
    run.weights = mass / static_cast<double>(n);
  }

  GaussianMixture final_mix(run.weights, run.means, run.covs);
  run.total_ll = final_mix.log_pdf(x).sum();
  if (!std::isfinite(run.total_ll)) return run;
  run.ok = true;
  return run;
}

}  // namespace

GaussianMixture::GaussianMixture(Vector weights, std::vector<ParamVector> means, std::vector<Matrix> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  const auto c = static_cast<std::size_t>(weights_.size());
  if (c == 0 || means_.size() != c || covariances_.size() != c) {
    throw std::invalid_argument("GaussianMixture: component counts disagree or are zero");
  }
  if (!weights_.allFinite() || (weights_.array() < 0.0).any() || weights_.sum() <= 0.0) {
    throw std::invalid_argument("GaussianMixture: weights must be finite, non-negative, not all zero");
  }
  weights_ /= weights_.sum();
  const Eigen::Index d = means_.front().size();
  for (std::size_t j = 0; j < c; ++j) {
    if (means_[j].size() != d || covariances_[j].rows() != d || covariances_[j].cols() != d) {
      throw std::invalid_argument("GaussianMixture: inconsistent component dimensions");
    }
    Eigen::LLT<Matrix> llt(covariances_[j]);
    if (llt.info() != Eigen::Success || !covariances_[j].allFinite()) {
      throw std::invalid_argument("GaussianMixture: covariance is not symmetric positive definite");
    }
    chol_.push_back(llt.matrixL());
    const double log_det = 2.0 * chol_.back().diagonal().array().log().sum();
    log_norm_.push_back(-0.5 * static_cast<double>(d) * kLog2Pi - 0.5 * log_det);
  }
}

Matrix GaussianMixture::component_log_densities(const Matrix& points) const {
  if (points.rows() != dim()) throw std::invalid_argument("GaussianMixture: dimension mismatch");
  Matrix out(components(), points.cols());
  for (int j = 0; j < components(); ++j) {
    const auto js = static_cast<std::size_t>(j);
    Matrix z = points.colwise() - means_[js];
    chol_[js].triangularView<Eigen::Lower>().solveInPlace(z);
    out.row(j) = (log_norm_[js] - 0.5 * z.colwise().squaredNorm().array()).matrix();
  }
  return out;
}

Vector GaussianMixture::log_pdf(const Matrix& points) const {
  Matrix comp = component_log_densities(points);
  for (int j = 0; j < components(); ++j) comp.row(j).array() += std::log(weights_[j]);
  return column_logsumexp(comp);
}

double GaussianMixture::log_pdf(const ParamVector& x) const {
  if (x.size() != dim()) throw std::invalid_argument("GaussianMixture::log_pdf: dimension mismatch");
  double mx = kNegInf;
  std::vector<double> terms(static_cast<std::size_t>(components()));
  for (int j = 0; j < components(); ++j) {
    const auto js = static_cast<std::size_t>(j);
    const Vector z = chol_[js].triangularView<Eigen::Lower>().solve(x - means_[js]);
    terms[js] = std::log(weights_[j]) + log_norm_[js] - 0.5 * z.squaredNorm();
    mx = std::max(mx, terms[js]);
  }
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc);
}

ParamVector GaussianMixture::mean() const {
  ParamVector mu = ParamVector::Zero(dim());
  for (int j = 0; j < components(); ++j) mu += weights_[j] * means_[static_cast<std::size_t>(j)];
  return mu;
}

Matrix GaussianMixture::covariance() const {
  const ParamVector mu = mean();
  Matrix cov = Matrix::Zero(dim(), dim());
  for (int j = 0; j < components(); ++j) {
    const auto js = static_cast<std::size_t>(j);
    const Vector diff = means_[js] - mu;
    cov += weights_[j] * (covariances_[js] + diff * diff.transpose());
  }
  return cov;
}

ParamVector GaussianMixture::sample_one(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double u = unif(rng);
  int j = components() - 1;
  for (int k = 0; k < components(); ++k) {
    if (weights_[k] <= 0.0) continue;
    u -= weights_[k];
    if (u < 0.0) {
      j = k;
      break;
    }
  }
  while (weights_[j] <= 0.0) --j;
  Vector z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = normal(rng);
  const auto js = static_cast<std::size_t>(j);
  return means_[js] + chol_[js] * z;
}

SampleBatch GaussianMixture::sample(int n, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("GaussianMixture::sample: n must be >= 1");
  std::mt19937_64 rng(seed);
  SampleBatch batch;
  batch.points.resize(dim(), n);
  for (int i = 0; i < n; ++i) batch.points.col(i) = sample_one(rng);
  return batch;
}

GaussianMixture fit_gmm(const SampleBatch& samples, int max_components, std::uint64_t seed,
                        const GmmFitOptions& options, GmmFitReport* report) {
  const Eigen::Index d = samples.dim();
  const Eigen::Index n = samples.size();
  if (max_components < 1) throw std::invalid_argument("fit_gmm: max_components must be >= 1");
  if (n < 10 * d * max_components) {
    throw std::invalid_argument("fit_gmm: need at least 10*d*max_components samples");
  }
  // EM runs on per-coordinate standardized samples; the result is mapped back.
  const Vector center = samples.points.rowwise().mean();
  Vector scale = ((samples.points.colwise() - center).rowwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(scale[i] > 0.0)) scale[i] = 1.0;
  }
  const Matrix x = (samples.points.colwise() - center).array().colwise() / scale.array();
  const double log_jacobian = scale.array().log().sum();
  Matrix global_cov = sample_covariance(x);
  const double reg = options.regularization * global_cov.trace() / static_cast<double>(d);
  global_cov.diagonal().array() += reg;

  GmmFitReport local;
  std::optional<GaussianMixture> best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int c = 1; c <= max_components; ++c) {
    std::optional<EmRun> best_run;
    for (int r = 0; r < options.restarts; ++r) {
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r)));
      EmRun start = kmeans_start(x, c, reg, global_cov, rng);
      if (!start.ok) continue;
      EmRun run = run_em(x, std::move(start), reg, options);
      if (run.ok && (!best_run || run.total_ll > best_run->total_ll)) best_run = std::move(run);
      // A single component has a unique optimum.
      if (c == 1) break;
    }
    GmmCandidate cand;
    cand.components = c;
    if (best_run) {
      const double params = static_cast<double>((c - 1) + c * d + c * d * (d + 1) / 2);
      cand.log_likelihood = best_run->total_ll - static_cast<double>(n) * log_jacobian;
      cand.bic = -2.0 * cand.log_likelihood + params * std::log(static_cast<double>(n));
      cand.converged = best_run->converged;
      for (double v : best_run->ll_trace) cand.ll_trace.push_back(v - log_jacobian);
      if (cand.bic < best_bic) {
        best_bic = cand.bic;
        std::vector<ParamVector> means;
        std::vector<Matrix> covs;
        for (int k = 0; k < c; ++k) {
          const auto ks = static_cast<std::size_t>(k);
          means.push_back(center + scale.cwiseProduct(best_run->means[ks]));
          covs.push_back(scale.asDiagonal() * best_run->covs[ks] * scale.asDiagonal());
        }
        best.emplace(best_run->weights, std::move(means), std::move(covs));
        local.selected_components = c;
      }
    }
    local.candidates.push_back(std::move(cand));
  }
  if (!best) throw NumericalError("fit_gmm: every component count collapsed after restarts");
  if (report) *report = std::move(local);
  return *best;
}

KlEstimate kl_estimate(const GaussianMixture& prev, const GaussianMixture& curr, int n_mc, std::uint64_t seed) {
  if (n_mc < 10000) throw std::invalid_argument("kl_between: n_mc must be >= 1e4");
  if (prev.dim() != curr.dim()) throw std::invalid_argument("kl_between: dimension mismatch");
  const SampleBatch draws = prev.sample(n_mc, seed);
  const Vector diff = prev.log_pdf(draws.points) - curr.log_pdf(draws.points);
  KlEstimate out;
  out.raw = diff.mean();
  const double var = (diff.array() - out.raw).square().sum() / static_cast<double>(n_mc - 1);
  out.standard_error = std::sqrt(var / static_cast<double>(n_mc));
  return out;
}

double kl_between(const GaussianMixture& prev, const GaussianMixture& curr, int n_mc, std::uint64_t seed) {
  return kl_estimate(prev, curr, n_mc, seed).clamped();
}

}  // namespace agp
