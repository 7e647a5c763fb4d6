#include "agp/mcmc.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace agp {

namespace {

constexpr int kMaxShrinks = 6;

// log(1 - exp(a)) for a <= 0.
double log1m_exp(double a) {
  if (a >= 0.0) return kNegInf;
  return a > -0.6931471805599453 ? std::log(-std::expm1(a)) : std::log1p(-std::exp(a));
}

std::optional<Matrix> cholesky_lower(const Matrix& c) {
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return Matrix(llt.matrixL());
}

}  // namespace

double metropolis_log_alpha(double log_current, double log_proposal) {
  if (log_proposal == kNegInf) return kNegInf;
  return std::min(0.0, log_proposal - log_current);
}

double delayed_rejection_log_alpha(const ParamVector& x, double log_x, const ParamVector& y1, double log_y1,
                                   const ParamVector& y2, double log_y2, const Matrix& first_stage_precision) {
  if (log_y2 == kNegInf) return kNegInf;
  const double back_alpha = metropolis_log_alpha(log_y2, log_y1);   // alpha1(y2, y1)
  const double fwd_alpha = metropolis_log_alpha(log_x, log_y1);     // alpha1(x, y1)
  const double log_num_reject = log1m_exp(back_alpha);
  if (log_num_reject == kNegInf) return kNegInf;
  const Vector a = y1 - y2;
  const Vector b = y1 - x;
  const double log_q_num = -0.5 * a.dot(first_stage_precision * a);
  const double log_q_den = -0.5 * b.dot(first_stage_precision * b);
  const double log_den_reject = log1m_exp(fwd_alpha);
  const double ratio = (log_y2 + log_q_num + log_num_reject) - (log_x + log_q_den + log_den_reject);
  return std::min(0.0, ratio);
}

ChainResult run_chain(const LogDensity& target, const McmcSettings& settings, const ParamVector& init,
                      const std::optional<Matrix>& initial_covariance, const ChainObserver& observer) {
  settings.validate();
  const BoxDomain& domain = target.support();
  const Eigen::Index d = domain.dim();
  if (init.size() != d || !domain.contains(init)) throw ConfigError("run_chain: init outside the domain");
  double log_x = target(init);
  if (!std::isfinite(log_x)) throw ConfigError("run_chain: target is not finite at init");

  Matrix cov;
  if (initial_covariance) {
    cov = *initial_covariance;
  } else {
    const Vector sd = settings.initial_proposal_scale * domain.width();
    cov = sd.array().square().matrix().asDiagonal();
  }
  auto chol = cholesky_lower(cov);
  if (!chol) throw ConfigError("run_chain: initial proposal covariance is not SPD");
  Matrix l1 = *chol;
  Matrix precision = cov.inverse();

  std::mt19937_64 rng(settings.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw_normal = [&]() {
    Vector z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
    return z;
  };

  const long burn_in = settings.effective_burn_in();
  const long total = burn_in + settings.n_samples;
  const double sd_scale = 2.38 * 2.38 / static_cast<double>(d);

  ChainResult result;
  result.samples.points.resize(d, settings.n_samples);

  ParamVector x = init;
  // Running moments of the chain history (Welford).
  Vector run_mean = Vector::Zero(d);
  Matrix run_m2 = Matrix::Zero(d, d);
  long history = 0;
  long window_accepts = 0;
  long window_len = 0;
  // Global proposal scale, cut by 10x in sd after every window with no acceptance.
  double shrink = 1.0;
  int shrinks = 0;
  const Vector eps_diag = settings.epsilon * domain.width().array().square().matrix();

  for (long it = 0; it < total; ++it) {
    bool accepted = false;
    const ParamVector y1 = x + l1 * draw_normal();
    const double log_y1 = target(y1);
    const double log_a1 = metropolis_log_alpha(log_x, log_y1);
    const double log_u1 = std::log(unif(rng));
    if (log_u1 < log_a1) accepted = true;
    if (observer) observer({it, 1, x, log_x, y1, log_y1, log_u1, log_a1, accepted});

    if (accepted) {
      x = y1;
      log_x = log_y1;
    } else if (settings.delayed_rejection) {
      const ParamVector y2 = x + settings.dr_scale * (l1 * draw_normal());
      const double log_y2 = target(y2);
      const double log_a2 = delayed_rejection_log_alpha(x, log_x, y1, log_y1, y2, log_y2, precision);
      const double log_u2 = std::log(unif(rng));
      accepted = log_u2 < log_a2;
      if (observer) observer({it, 2, x, log_x, y2, log_y2, log_u2, log_a2, accepted});
      if (accepted) {
        x = y2;
        log_x = log_y2;
      }
    }
    if (accepted) {
      ++result.accepted;
      ++window_accepts;
    }
    ++window_len;
    if (window_len == settings.adapt_start) {
      if (window_accepts == 0) {
        if (shrinks == kMaxShrinks) {
          throw NumericalError("run_chain: no proposal accepted over a full adaptation window");
        }
        ++shrinks;
        shrink *= 0.01;
        cov *= 0.01;
        l1 *= 0.1;
        precision *= 100.0;
      }
      window_len = 0;
      window_accepts = 0;
    }

    ++history;
    const Vector delta = x - run_mean;
    run_mean += delta / static_cast<double>(history);
    run_m2 += delta * (x - run_mean).transpose();

    if (settings.adapt && it + 1 >= settings.adapt_start && (it + 1) % settings.adapt_interval == 0 &&
        history > 1) {
      Matrix c = run_m2 / static_cast<double>(history - 1);
      c = 0.5 * (c + c.transpose());
      c.diagonal() += eps_diag;
      c *= sd_scale * shrink;
      if (auto lc = cholesky_lower(c)) {
        cov = c;
        l1 = *lc;
        precision = cov.inverse();
      }
    }

    if (it >= burn_in) result.samples.points.col(it - burn_in) = x;
  }
  result.iterations = total;
  result.acceptance_rate = static_cast<double>(result.accepted) / static_cast<double>(total);
  result.final_proposal_covariance = cov;
  return result;
}

void write_chain_trace(const std::string& path, const SampleBatch& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    for (Eigen::Index k = 0; k < samples.dim(); ++k) {
      if (k) out << ',';
      out << samples.points(k, i);
    }
    out << '\n';
  }
}

}  // namespace agp
