#include "agp/gp_surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace agp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

struct Standardized {
  Matrix unit_x;  // d x n
  Vector z;
  double mean = 0.0;
  double scale = 1.0;
};

Standardized standardize(const BoxDomain& domain, const std::vector<ParamVector>& x, const Vector& y) {
  if (x.size() != static_cast<std::size_t>(y.size())) {
    throw std::invalid_argument("gp: train_x and train_y lengths differ");
  }
  Standardized s;
  const auto n = static_cast<Eigen::Index>(x.size());
  s.unit_x.resize(domain.dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x[i].size() != domain.dim()) throw std::invalid_argument("gp: training point dimension mismatch");
    s.unit_x.col(i) = domain.to_unit(x[i]);
  }
  s.mean = n > 0 ? y.mean() : 0.0;
  const double var = n > 0 ? (y.array() - s.mean).square().mean() : 0.0;
  const double sd = std::sqrt(var);
  s.scale = sd > 1e-12 * std::max(1.0, std::abs(s.mean)) ? sd : 1.0;
  s.z = (y.array() - s.mean) / s.scale;
  return s;
}

std::optional<Eigen::LLT<Matrix>> factorize(const Matrix& k) {
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixLLT().diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) return std::nullopt;
  return llt;
}

Matrix gram(const KernelParams& p, const Matrix& x) {
  Matrix k = kernel_matrix(p, x, x);
  k.diagonal().array() += p.nugget;
  return k;
}

// Projected L-BFGS ascent on a box. Every accepted step strictly increases the
// objective, so the returned value is >= the value at the start.
struct AscentResult {
  Vector theta;
  double value;
};

template <class Objective>
std::optional<AscentResult> bounded_ascent(Objective&& objective, Vector theta, const Vector& lo,
                                           const Vector& hi, int max_iters) {
  theta = theta.cwiseMax(lo).cwiseMin(hi);
  auto current = objective(theta);
  if (!current) return std::nullopt;
  // Work with F = -f.
  double f_val = -current->value;
  Vector grad = -current->gradient;

  const int history = 8;
  std::vector<Vector> s_hist, y_hist;
  const Eigen::Index n = theta.size();

  auto projected = [&](const Vector& g) {
    Vector pg = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((theta[i] <= lo[i] && g[i] > 0) || (theta[i] >= hi[i] && g[i] < 0)) pg[i] = 0.0;
    }
    return pg;
  };

  for (int it = 0; it < max_iters; ++it) {
    const Vector pg = projected(grad);
    if (pg.lpNorm<Eigen::Infinity>() < 1e-6) break;

    // Two-loop recursion on the free variables.
    Vector q = pg;
    std::vector<double> alphas(s_hist.size());
    for (int j = static_cast<int>(s_hist.size()) - 1; j >= 0; --j) {
      const double rho = 1.0 / y_hist[j].dot(s_hist[j]);
      alphas[j] = rho * s_hist[j].dot(q);
      q -= alphas[j] * y_hist[j];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double rho = 1.0 / y_hist[j].dot(s_hist[j]);
      const double beta = rho * y_hist[j].dot(q);
      q += (alphas[j] - beta) * s_hist[j];
    }
    Vector dir = -q;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (pg[i] == 0.0) dir[i] = 0.0;
    }
    if (dir.dot(pg) >= 0.0) {
      dir = -pg;
      s_hist.clear();
      y_hist.clear();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / pg.norm()) : 1.0;
    bool accepted = false;
    Vector theta_new;
    double f_new = 0.0;
    Vector grad_new;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      theta_new = (theta + step * dir).cwiseMax(lo).cwiseMin(hi);
      const Vector delta = theta_new - theta;
      if (delta.lpNorm<Eigen::Infinity>() < 1e-14) break;
      auto trial = objective(theta_new);
      if (!trial) continue;
      f_new = -trial->value;
      const double slope = grad.dot(delta);
      if (f_new < f_val && f_new <= f_val + 1e-4 * std::min(0.0, slope)) {
        grad_new = -trial->gradient;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    Vector s = theta_new - theta;
    Vector y = grad_new - grad;
    const double improvement = f_val - f_new;
    theta = theta_new;
    f_val = f_new;
    grad = grad_new;
    if (s.dot(y) > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (static_cast<int>(s_hist.size()) > history) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
      }
    }
    if (improvement < 1e-10 * (1.0 + std::abs(f_val))) break;
  }
  return AscentResult{theta, -f_val};
}

KernelParams params_from_theta(const Vector& theta, double nugget) {
  const Eigen::Index d = theta.size() - 1;
  KernelParams p;
  p.lengthscales = theta.head(d).array().exp();
  p.signal_variance = std::exp(theta[d]);
  p.nugget = nugget;
  return p;
}

Vector theta_from_params(const KernelParams& p) {
  const Eigen::Index d = p.lengthscales.size();
  Vector theta(d + 1);
  theta.head(d) = p.lengthscales.array().log();
  theta[d] = std::log(p.signal_variance);
  return theta;
}

}  // namespace

double kernel_eval(const KernelParams& p, const ParamVector& x, const ParamVector& x2) {
  if (x.size() != x2.size() || x.size() != p.lengthscales.size()) {
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  }
  const double r2 = ((x - x2).array() / p.lengthscales.array()).square().sum();
  return p.signal_variance * std::exp(-0.5 * r2);
}

Matrix kernel_matrix(const KernelParams& p, const Matrix& a, const Matrix& b) {
  if (a.rows() != p.lengthscales.size() || b.rows() != p.lengthscales.size()) {
    throw std::invalid_argument("kernel_matrix: dimension mismatch");
  }
  const Vector inv_l = p.lengthscales.cwiseInverse();
  const Matrix sa = inv_l.asDiagonal() * a;
  const Matrix sb = inv_l.asDiagonal() * b;
  const Vector na = sa.colwise().squaredNorm();
  const Vector nb = sb.colwise().squaredNorm();
  Matrix r2 = (-2.0 * sa.transpose() * sb).colwise() + na;
  r2.rowwise() += nb.transpose();
  return p.signal_variance * (-0.5 * r2.array().max(0.0)).exp().matrix();
}

double log_marginal_likelihood(const KernelParams& p, const Matrix& x, const Vector& y) {
  if (x.cols() != y.size()) throw std::invalid_argument("log_marginal_likelihood: size mismatch");
  auto llt = factorize(gram(p, x));
  if (!llt) throw NumericalError("log_marginal_likelihood: Gram matrix factorization failed");
  const Vector alpha = llt->solve(y);
  const double log_det = 2.0 * llt->matrixLLT().diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

std::optional<LmlWithGradient> log_marginal_likelihood_with_gradient(const KernelParams& p,
                                                                     const Matrix& x,
                                                                     const Vector& y) {
  const Eigen::Index n = x.cols();
  const Eigen::Index d = x.rows();
  const Matrix k_signal = kernel_matrix(p, x, x);
  Matrix k = k_signal;
  k.diagonal().array() += p.nugget;
  auto llt = factorize(k);
  if (!llt) return std::nullopt;
  const Vector alpha = llt->solve(y);
  const double log_det = 2.0 * llt->matrixLLT().diagonal().array().log().sum();

  LmlWithGradient out;
  out.value = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * kLog2Pi;
  if (!std::isfinite(out.value)) return std::nullopt;

  const Matrix k_inv = llt->solve(Matrix::Identity(n, n));
  const Matrix w = alpha * alpha.transpose() - k_inv;
  const Matrix wk = w.cwiseProduct(k_signal);

  out.gradient.resize(d + 1);
  for (Eigen::Index dim = 0; dim < d; ++dim) {
    const double inv_l2 = 1.0 / (p.lengthscales[dim] * p.lengthscales[dim]);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double xj = x(dim, j);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = x(dim, i) - xj;
        acc += wk(i, j) * diff * diff;
      }
    }
    out.gradient[dim] = 0.5 * acc * inv_l2;
  }
  out.gradient[d] = 0.5 * wk.sum();
  return out;
}

GpModel GpModel::condition(const BoxDomain& domain, std::vector<ParamVector> train_x, Vector train_y,
                           KernelParams kernel, double nugget_max) {
  if (train_x.empty()) throw std::invalid_argument("GpModel::condition: no training data");
  if (kernel.lengthscales.size() != domain.dim()) {
    throw std::invalid_argument("GpModel::condition: lengthscale dimension mismatch");
  }
  GpModel model(domain);
  const Standardized s = standardize(domain, train_x, train_y);
  model.unit_x_ = s.unit_x;
  model.scaled_y_ = s.z;
  model.mean_const_ = s.mean;
  model.target_scale_ = s.scale;
  model.train_x_ = std::move(train_x);
  model.train_y_ = std::move(train_y);

  for (;;) {
    auto llt = factorize(gram(kernel, model.unit_x_));
    if (llt) {
      model.chol_ = llt->matrixL();
      model.alpha_ = llt->solve(model.scaled_y_);
      model.kernel_ = std::move(kernel);
      return model;
    }
    const double next = std::max(kernel.nugget * 10.0, 1e-8);
    if (next > nugget_max * (1.0 + 1e-12)) {
      throw NumericalError("GpModel::condition: Gram matrix factorization failed after nugget escalation");
    }
    kernel.nugget = next;
  }
}

Vector GpModel::cross_kernel(const ParamVector& x) const {
  if (x.size() != domain_.dim()) throw std::invalid_argument("GpModel::predict: dimension mismatch");
  const Vector u = domain_.to_unit(x);
  const Vector inv_l2 = kernel_.lengthscales.array().square().inverse();
  const Eigen::Index n = unit_x_.cols();
  Vector k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r2 = ((unit_x_.col(i) - u).array().square() * inv_l2.array()).sum();
    k[i] = kernel_.signal_variance * std::exp(-0.5 * r2);
  }
  return k;
}

double GpModel::predict_mean(const ParamVector& x) const {
  return mean_const_ + target_scale_ * cross_kernel(x).dot(alpha_);
}

double GpModel::raw_variance(const ParamVector& x) const {
  const Vector k = cross_kernel(x);
  const Vector v = chol_.triangularView<Eigen::Lower>().solve(k);
  return target_scale_ * target_scale_ * (kernel_.signal_variance - v.squaredNorm());
}

GpPrediction GpModel::predict(const ParamVector& x) const {
  const Vector k = cross_kernel(x);
  const Vector v = chol_.triangularView<Eigen::Lower>().solve(k);
  GpPrediction out;
  out.mean = mean_const_ + target_scale_ * k.dot(alpha_);
  out.variance = std::max(0.0, target_scale_ * target_scale_ * (kernel_.signal_variance - v.squaredNorm()));
  return out;
}

double GpModel::log_marginal_likelihood() const {
  const double log_det = 2.0 * chol_.diagonal().array().log().sum();
  return -0.5 * scaled_y_.dot(alpha_) - 0.5 * log_det -
         0.5 * static_cast<double>(scaled_y_.size()) * kLog2Pi;
}

GpModel fit(const BoxDomain& domain, const std::vector<ParamVector>& train_x, const Vector& train_y,
            const GpSettings& settings, const GpFitOptions& options, GpFitReport* report) {
  if (train_x.size() < 2) throw std::invalid_argument("gp fit: need at least 2 training points");
  if (!train_y.allFinite()) throw std::invalid_argument("gp fit: non-finite training targets");
  {
    std::set<std::vector<double>> distinct;
    for (const auto& x : train_x) distinct.insert(std::vector<double>(x.data(), x.data() + x.size()));
    if (distinct.size() < 2) throw std::invalid_argument("gp fit: need at least 2 distinct points");
  }

  const Standardized s = standardize(domain, train_x, train_y);
  const Eigen::Index d = domain.dim();

  Vector lo(d + 1), hi(d + 1);
  lo.head(d).setConstant(std::log(settings.lengthscale_min));
  hi.head(d).setConstant(std::log(settings.lengthscale_max));
  lo[d] = std::log(settings.signal_variance_min);
  hi[d] = std::log(settings.signal_variance_max);

  std::vector<Vector> starts;
  KernelParams def;
  def.lengthscales = Vector::Constant(d, 0.3);
  def.signal_variance = 1.0;
  if (options.warm_start && options.warm_start->lengthscales.size() == d) {
    starts.push_back(theta_from_params(*options.warm_start).cwiseMax(lo).cwiseMin(hi));
  }
  starts.push_back(theta_from_params(def).cwiseMax(lo).cwiseMin(hi));
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (static_cast<int>(starts.size()) < options.n_starts) {
    Vector t(d + 1);
    for (Eigen::Index i = 0; i <= d; ++i) t[i] = lo[i] + (hi[i] - lo[i]) * unif(rng);
    starts.push_back(t);
  }
  starts.resize(static_cast<std::size_t>(std::max(1, options.n_starts)));

  for (double nugget = settings.nugget_floor; nugget <= settings.nugget_max * (1.0 + 1e-12); nugget *= 10.0) {
    auto objective = [&](const Vector& theta) {
      return log_marginal_likelihood_with_gradient(params_from_theta(theta, nugget), s.unit_x, s.z);
    };
    GpFitReport local;
    std::optional<AscentResult> best;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const auto init = objective(starts[i]);
      local.initial_lml.push_back(init ? init->value : kNegInf);
      auto result = bounded_ascent(objective, starts[i], lo, hi, options.max_iters);
      local.final_lml.push_back(result ? result->value : kNegInf);
      // Strict improvement keeps the lowest start index on ties.
      if (result && (!best || result->value > best->value)) {
        best = result;
        local.best_start = static_cast<int>(i);
      }
    }
    if (!best) continue;
    if (report) *report = local;
    return GpModel::condition(domain, train_x, train_y, params_from_theta(best->theta, nugget),
                              settings.nugget_max);
  }
  throw NumericalError("gp fit: Gram matrix factorization failed for every start after nugget escalation");
}

}  // namespace agp
