#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "agp/problems.hpp"

using namespace agp;

namespace {

ToggleSwitchSpec spec_with_step(double h) {
  ToggleSwitchSpec s;
  s.step_size = h;
  return s;
}

}  // namespace

TEST_CASE("Rosenbrock log-likelihood values") {
  CHECK(rosenbrock_log_likelihood(Eigen::Vector2d(1.0, 1.0)) == 0.0);
  CHECK(rosenbrock_log_likelihood(Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(-0.01).epsilon(1e-15));
  CHECK(rosenbrock_log_likelihood(Eigen::Vector2d(2.0, 4.0)) == doctest::Approx(-0.01).epsilon(1e-15));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 10000; ++i) CHECK(rosenbrock_log_likelihood(Eigen::Vector2d(u(rng), u(rng))) < 0.0);
  const Problem p = make_rosenbrock();
  CHECK(p.dim() == 2);
  CHECK(p.prior.lower() == Vector::Constant(2, -5.0));
}

TEST_CASE("toggle switch prior box and truth") {
  const BoxDomain box = toggle_prior_box();
  CHECK(box.dim() == 6);
  CHECK(box.contains(toggle_true_parameters()));
  CHECK(toggle_parameter_names() == std::vector<std::string>{"alpha1", "alpha2", "gamma", "beta", "eta", "K"});
}

TEST_CASE("toggle forward model agrees with a half-step integration") {
  const ParamVector x = toggle_true_parameters();
  const double v = toggle_forward(spec_with_step(0.01), x, 1e-6);
  const double half = toggle_forward(spec_with_step(0.005), x, 1e-6);
  CHECK(std::abs(v - half) <= 1e-6 * std::abs(half));
}

TEST_CASE("toggle forward error shrinks at fourth order") {
  const ParamVector x = toggle_true_parameters();
  const ToggleSwitchSpec base;
  for (double iptg : base.iptg_levels) {
    const double ref = toggle_forward(spec_with_step(0.005 / 16), x, iptg);
    // Near steady state (v ~ 16) the h = 0.005 error sits at the rounding floor, so
    // only pairs whose finer error is clearly above it are scored.
    const double floor = 1e-12 * std::max(1.0, std::abs(ref));
    double prev = std::abs(toggle_forward(spec_with_step(0.04), x, iptg) - ref);
    for (double h : {0.02, 0.01, 0.005}) {
      const double err = std::abs(toggle_forward(spec_with_step(h), x, iptg) - ref);
      if (err > floor) CHECK(std::log2(prev / err) >= 3.7);
      prev = err;
    }
  }
  const double ref = toggle_forward(spec_with_step(0.005 / 16), x, 1e-6);
  double prev = std::abs(toggle_forward(spec_with_step(0.04), x, 1e-6) - ref);
  for (double h : {0.02, 0.01, 0.005}) {
    const double err = std::abs(toggle_forward(spec_with_step(h), x, 1e-6) - ref);
    CHECK(std::log2(prev / err) >= 3.7);
    prev = err;
  }
}

TEST_CASE("decoupled v decays exponentially") {
  ParamVector x = toggle_true_parameters();
  x[1] = 0.0;
  ToggleSwitchSpec s;
  s.initial_condition = std::array<double, 2>{5.0, 2.0};
  const double v = toggle_forward(s, x, 1e-3);
  CHECK(v == doctest::Approx(2.0 * std::exp(-10.0)).epsilon(1e-8));
}

TEST_CASE("toggle forward model is continuous in K") {
  const ParamVector x = toggle_true_parameters();
  ParamVector y = x;
  y[5] += 1e-8;
  const ToggleSwitchSpec s;
  for (double iptg : s.iptg_levels) CHECK(std::abs(toggle_forward(s, y, iptg) - toggle_forward(s, x, iptg)) < 1e-4);
}

TEST_CASE("toggle forward model rejects bad inputs") {
  const ToggleSwitchSpec s;
  CHECK_THROWS_AS(toggle_forward(s, Vector::Ones(5), 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(toggle_forward(s, toggle_true_parameters(), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(toggle_forward(spec_with_step(0.03), toggle_true_parameters(), 1e-3), std::invalid_argument);
  ToggleSwitchSpec neg;
  neg.initial_condition = std::array<double, 2>{-1.0, -1.0};
  CHECK_THROWS_AS(toggle_forward(neg, toggle_true_parameters(), 1e-3), EvaluationError);
}

TEST_CASE("toggle log-likelihood") {
  ToggleSwitchSpec s;
  s.noise_variance = kToggleLargeNoiseVariance;
  const ParamVector truth = toggle_true_parameters();
  s.observed_data = toggle_outputs(s, truth);
  const double top = -6.0 * 0.5 * std::log(2.0 * M_PI * s.noise_variance);
  CHECK(toggle_log_likelihood(s, truth) == doctest::Approx(top).epsilon(1e-14));

  ParamVector off = truth;
  off[1] = 15.2;
  ToggleSwitchSpec halved = s;
  halved.noise_variance = s.noise_variance / 2.0;
  const double d_full = toggle_log_likelihood(s, off) - toggle_log_likelihood(s, truth);
  const double d_half = toggle_log_likelihood(halved, off) - toggle_log_likelihood(halved, truth);
  CHECK(d_half == doctest::Approx(2.0 * d_full).epsilon(1e-12));

  ToggleSwitchSpec small = s;
  small.noise_variance = kToggleSmallNoiseVariance;
  const Vector resid = s.observed_data - toggle_outputs(s, off);
  REQUIRE(resid.squaredNorm() > 6.0 * s.noise_variance);
  CHECK(toggle_log_likelihood(small, off) < toggle_log_likelihood(s, off));
}

TEST_CASE("synthetic data") {
  ToggleSwitchSpec s;
  const ParamVector truth = toggle_true_parameters();
  CHECK(make_synthetic_data(s, truth, 4) == make_synthetic_data(s, truth, 4));
  CHECK(make_synthetic_data(s, truth, 4) != make_synthetic_data(s, truth, 5));
  ToggleSwitchSpec exact = s;
  exact.noise_variance = 0.0;
  const Vector clean = toggle_outputs(s, truth);
  CHECK(make_synthetic_data(exact, truth, 4) == clean);

  double sum2 = 0.0;
  long n = 0;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const Vector d = make_synthetic_data(s, truth, r) - clean;
    sum2 += d.squaredNorm();
    n += d.size();
  }
  CHECK(std::abs(sum2 / n / s.noise_variance - 1.0) < 0.05);
}

TEST_CASE("toggle data file round trip") {
  ToggleSwitchSpec s;
  s.observed_data = make_synthetic_data(s, toggle_true_parameters(), 2017);
  const auto path = (std::filesystem::temp_directory_path() / "agp_toggle_data.csv").string();
  write_toggle_data(path, s, "# test header");
  CHECK(read_toggle_data(path, s) == s.observed_data);
  ToggleSwitchSpec other = s;
  other.iptg_levels[2] = 8e-4;
  CHECK_THROWS_AS(read_toggle_data(path, other), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("toggle problem construction") {
  ToggleSwitchSpec s;
  s.observed_data = make_synthetic_data(s, toggle_true_parameters(), 1);
  const Problem p = make_toggle_switch(s);
  CHECK(p.dim() == 6);
  CHECK(std::isfinite(log_joint(p, toggle_true_parameters())));
  ToggleSwitchSpec bad = s;
  bad.noise_variance = 0.0;
  CHECK_THROWS_AS(make_toggle_switch(bad), ConfigError);
}
