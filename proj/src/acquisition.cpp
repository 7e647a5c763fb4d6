#include "agp/acquisition.hpp"

#include <cmath>
#include <numbers>

namespace agp {

double entropy_score(const GpPrediction& pred, double log_pn_at_x) {
  if (!(pred.variance > 0.0)) return kNegInf;
  return pred.mean + log_pn_at_x + 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * pred.variance);
}

double variance_score(const GpPrediction& pred, double log_pn_at_x) {
  if (!(pred.variance > 0.0)) return kNegInf;
  return 2.0 * (pred.mean + log_pn_at_x) + pred.variance + std::log(std::expm1(pred.variance));
}

double acquisition_score(AcquisitionKind kind, const GpPrediction& pred, double log_pn_at_x) {
  return kind == AcquisitionKind::Entropy ? entropy_score(pred, log_pn_at_x) : variance_score(pred, log_pn_at_x);
}

MaximizeResult maximize(const ScoreFn& score, const BoxDomain& domain, const SaSettings& settings,
                        const StartSampler& start_sampler) {
  settings.validate();
  std::mt19937_64 rng(settings.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = domain.dim();
  const Vector step = settings.step_scale * domain.width();

  MaximizeResult best;
  best.x = domain.center();
  bool have_best = false;
  auto consider = [&](const ParamVector& x, double s) {
    ++best.evaluations;
    if (!have_best || s > best.score) {
      best.x = x;
      best.score = s;
      have_best = true;
    }
  };

  auto uniform_point = [&]() {
    ParamVector u(d);
    for (Eigen::Index i = 0; i < d; ++i) u[i] = unif(rng);
    return domain.from_unit(u);
  };

  for (int r = 0; r < settings.n_restarts; ++r) {
    ParamVector x;
    bool placed = false;
    if (start_sampler) {
      for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
        x = start_sampler(rng);
        placed = x.size() == d && domain.contains(x);
      }
    }
    if (!placed) x = uniform_point();
    double s = score(x);
    consider(x, s);
    double temperature = settings.initial_temperature;
    for (int k = 0; k < settings.steps_per_restart; ++k) {
      ParamVector y = x;
      for (Eigen::Index i = 0; i < d; ++i) y[i] += step[i] * normal(rng);
      y = domain.clamp(y);
      const double sy = score(y);
      consider(y, sy);
      bool accept;
      if (s == kNegInf) {
        accept = true;  // drift off a flat -inf region
      } else if (sy >= s) {
        accept = true;
      } else if (sy == kNegInf) {
        accept = false;
      } else {
        accept = unif(rng) < std::exp((sy - s) / temperature);
      }
      if (accept) {
        x = y;
        s = sy;
      }
      temperature *= settings.cooling_rate;
    }
  }
  return best;
}

SelectionResult select_batch(const std::vector<ParamVector>& design_x, const std::vector<double>& design_log_f,
                             const std::function<double(const ParamVector&)>& log_f, const LogDensity& log_pn,
                             const GpModel& gp, const SelectionRequest& request, const StartSampler& start_sampler) {
  if (request.domain == nullptr) throw std::invalid_argument("select_batch: domain missing");
  if (design_x.empty() || design_x.size() != design_log_f.size()) {
    throw std::invalid_argument("select_batch: design set empty or inconsistent");
  }
  if (request.m < 1) throw std::invalid_argument("select_batch: m must be >= 1");
  const BoxDomain& domain = *request.domain;
  const Eigen::Index d = domain.dim();

  std::vector<ParamVector> xs = design_x;
  std::vector<ParamVector> units;
  units.reserve(xs.size() + static_cast<std::size_t>(request.m));
  for (const auto& x : xs) units.push_back(domain.to_unit(x));
  Vector residuals(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    residuals[static_cast<Eigen::Index>(i)] = design_log_f[i] - log_pn(xs[i]);
  }

  SelectionResult out{{}, {}, gp, 0};
  std::mt19937_64 jitter_rng(derive_seed(request.seed, 0xd0b1e));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto is_duplicate = [&](const ParamVector& u) {
    for (const auto& v : units) {
      if ((v - u).norm() < request.duplicate_tolerance) return true;
    }
    return false;
  };

  for (int j = 0; j < request.m; ++j) {
    const GpModel& model = out.gp;
    auto score = [&](const ParamVector& x) {
      const double lp = log_pn(x);
      if (lp == kNegInf) return kNegInf;
      return acquisition_score(request.kind, model.predict(x), lp);
    };
    SaSettings sa = request.sa;
    sa.seed = derive_seed(request.seed, 1, static_cast<std::uint64_t>(j));
    ParamVector x = maximize(score, domain, sa, start_sampler).x;

    ParamVector u = domain.to_unit(x);
    while (is_duplicate(u)) {
      Vector dir(d);
      for (Eigen::Index i = 0; i < d; ++i) dir[i] = normal(jitter_rng);
      const double radius = request.jitter_radius * std::pow(unif(jitter_rng), 1.0 / static_cast<double>(d));
      u = (u + radius * dir.normalized()).cwiseMax(0.0).cwiseMin(1.0);
    }
    x = domain.from_unit(u);

    const double value = log_f(x);
    out.points.push_back(x);
    out.log_f.push_back(value);
    xs.push_back(x);
    units.push_back(u);
    residuals.conservativeResize(residuals.size() + 1);
    residuals[residuals.size() - 1] = value - log_pn(x);

    GpFitOptions options;
    options.n_starts = request.gp.refit_starts;
    options.max_iters = request.gp.refit_max_iters;
    options.seed = derive_seed(request.seed, 2, static_cast<std::uint64_t>(j));
    options.warm_start = model.kernel();
    out.gp = fit(domain, xs, residuals, request.gp, options);
    ++out.refits;
  }
  return out;
}

}  // namespace agp
