#include "agp/core_types.hpp"

#include <cmath>
#include <sstream>

namespace agp {

namespace {

std::string describe(const ParamVector& x) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << ']';
  return os.str();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

EvaluationError::EvaluationError(const std::string& what, ParamVector where)
    : std::runtime_error(what + " at x = " + describe(where)), where_(std::move(where)) {}

EvaluationError EvaluationError::with_context(const std::string& prefix) const {
  return EvaluationError(Raw{}, prefix + what(), where_);
}

bool all_finite(const ParamVector& x) { return x.allFinite(); }

BoxDomain::BoxDomain(ParamVector lower, ParamVector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size() || lower_.size() == 0) {
    throw ConfigError("BoxDomain: lower and upper must have the same positive length");
  }
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i])) {
      throw ConfigError("BoxDomain: require finite lower[i] < upper[i]");
    }
  }
}

bool BoxDomain::contains(const ParamVector& x) const {
  if (x.size() != lower_.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower_[i] && x[i] <= upper_[i])) return false;
  }
  return true;
}

ParamVector BoxDomain::clamp(const ParamVector& x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

ParamVector BoxDomain::to_unit(const ParamVector& x) const {
  return (x - lower_).cwiseQuotient(upper_ - lower_);
}

ParamVector BoxDomain::from_unit(const ParamVector& u) const {
  return lower_ + u.cwiseProduct(upper_ - lower_);
}

double BoxDomain::log_volume() const { return (upper_ - lower_).array().log().sum(); }

double BoxDomain::log_uniform_density(const ParamVector& x) const {
  return contains(x) ? -log_volume() : kNegInf;
}

double log_prior(const Problem& problem, const ParamVector& x) {
  return problem.prior.log_uniform_density(x);
}

double log_joint(const Problem& problem, const ParamVector& x) {
  if (!all_finite(x)) throw EvaluationError("non-finite parameter vector", x);
  const double lp = log_prior(problem, x);
  if (!std::isfinite(lp)) return kNegInf;
  const double ll = problem.log_likelihood(x);
  if (!std::isfinite(ll)) throw EvaluationError(problem.name + ": non-finite log-likelihood", x);
  return ll + lp;
}

void DesignSet::add(ParamVector x, double log_f, int iteration) {
  points.push_back(std::move(x));
  log_f_values.push_back(log_f);
  provenance.push_back(iteration);
}

std::string to_string(AcquisitionKind kind) {
  return kind == AcquisitionKind::Entropy ? "entropy" : "variance";
}

AcquisitionKind acquisition_from_string(const std::string& name) {
  if (name == "entropy") return AcquisitionKind::Entropy;
  if (name == "variance") return AcquisitionKind::Variance;
  throw ConfigError("unknown acquisition kind '" + name + "' (expected entropy|variance)");
}

void GpSettings::validate() const {
  require(n_starts >= 1 && refit_starts >= 1, "gp: starts must be >= 1");
  require(max_iters >= 1 && refit_max_iters >= 1, "gp: iteration limits must be >= 1");
  require(lengthscale_min > 0 && lengthscale_min < lengthscale_max, "gp: invalid lengthscale bounds");
  require(signal_variance_min > 0 && signal_variance_min < signal_variance_max,
          "gp: invalid signal variance bounds");
  require(nugget_floor > 0 && nugget_floor <= nugget_max, "gp: invalid nugget floor/max");
}

void McmcSettings::validate() const {
  require(n_samples >= 1, "mcmc: n_samples must be >= 1");
  require(effective_burn_in() >= 0, "mcmc: burn_in must be >= 0");
  require(adapt_start >= 1 && adapt_interval >= 1, "mcmc: adaptation windows must be >= 1");
  require(dr_scale > 0 && dr_scale < 1, "mcmc: dr_scale must lie in (0,1)");
  require(initial_proposal_scale > 0, "mcmc: initial_proposal_scale must be > 0");
  require(epsilon >= 0, "mcmc: epsilon must be >= 0");
}

void SaSettings::validate() const {
  require(n_restarts >= 1 && steps_per_restart >= 1, "sa: restarts and steps must be >= 1");
  require(initial_temperature > 0, "sa: initial_temperature must be > 0");
  require(cooling_rate > 0 && cooling_rate < 1, "sa: cooling_rate must lie in (0,1)");
  require(step_scale > 0, "sa: step_scale must be > 0");
}

void RunConfig::validate(int dim) const {
  require(dim >= 1, "problem dimension must be >= 1");
  require(m0 >= dim + 1, "m0 must be >= d+1 (got m0=" + std::to_string(m0) + ", d=" + std::to_string(dim) + ")");
  require(m >= 1, "m must be >= 1");
  require(M >= 1000, "M must be >= 1000");
  require(n_max >= 1, "n_max must be >= 1");
  require(D_max > 0, "D_max must be > 0");
  require(K >= 1, "K must be >= 1");
  require(gmm_max_components >= 1, "gmm_max_components must be >= 1");
  require(M >= 10 * dim * gmm_max_components, "M must be >= 10*d*gmm_max_components");
  require(kl_samples >= 10000, "kl_samples must be >= 1e4");
  gp.validate();
  mcmc.validate();
  sa.validate();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  h = mix(h ^ c);
  return h;
}

}  // namespace agp
