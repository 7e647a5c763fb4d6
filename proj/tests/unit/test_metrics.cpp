#include <doctest.h>

#include <cmath>
#include <random>

#include "agp/metrics.hpp"
#include "agp/problems.hpp"
#include "oracles/gaussian.hpp"

using namespace agp;

namespace {

GridDensity gaussian_grid_1d(double mu, double var, int points = 4000) {
  const BoxDomain box(Vector::Constant(1, -14.0), Vector::Constant(1, 15.0));
  return evaluate_on_grid([&](const ParamVector& x) { return oracle::normal_log_pdf(x[0], mu, var); }, box, points);
}

GridDensity random_grid(std::mt19937_64& rng) {
  const BoxDomain box(Eigen::Vector2d(-1.0, 0.0), Eigen::Vector2d(2.0, 3.0));
  std::normal_distribution<double> z;
  GridDensity g{box, {17, 17}, Vector(17 * 17)};
  for (Eigen::Index i = 0; i < g.log_values.size(); ++i) g.log_values[i] = 2.0 * z(rng);
  return g;
}

Vector normal_draws(std::mt19937_64& rng, int n, double mu, double sd) {
  std::normal_distribution<double> z(mu, sd);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}

}  // namespace

TEST_CASE("logsumexp handles -inf and large values") {
  CHECK(logsumexp(Eigen::Vector3d(1000.0, 1000.0, kNegInf)) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(logsumexp(Eigen::Vector2d(kNegInf, kNegInf)) == kNegInf);
}

TEST_CASE("grid cell geometry") {
  const BoxDomain box(Eigen::Vector2d(0.0, -1.0), Eigen::Vector2d(2.0, 1.0));
  GridDensity g{box, {4, 2}, Vector::Zero(8)};
  CHECK(g.cell_volume() == doctest::Approx(0.5));
  const ParamVector c = g.cell_center(5);  // i = 1, j = 1
  CHECK(c[0] == doctest::Approx(0.75));
  CHECK(c[1] == doctest::Approx(0.5));
  CHECK(g.log_normalizer() == doctest::Approx(std::log(4.0)));
  CHECK(std::exp(logsumexp(g.log_masses())) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("identical densities give zero divergence") {
  const GridDensity p = gaussian_grid_1d(0.3, 0.7);
  CHECK(grid_kl(p, p) < 1e-6);
  CHECK(grid_hellinger(p, p) < 1e-6);

  const Problem rb = make_rosenbrock();
  const auto f = [&](const ParamVector& x) { return log_joint(rb, x); };
  const GridDensity a = evaluate_on_grid(f, rb.prior, 400);
  const GridDensity b = evaluate_on_grid(f, rb.prior, 400);
  CHECK(grid_kl(a, b) < 1e-6);
  CHECK(grid_hellinger(a, b) < 1e-6);
}

TEST_CASE("disjoint supports give Hellinger one") {
  const BoxDomain box(Vector::Constant(1, 0.0), Vector::Constant(1, 2.0));
  const auto left = [](const ParamVector& x) { return x[0] < 1.0 ? 0.0 : kNegInf; };
  const auto right = [](const ParamVector& x) { return x[0] >= 1.0 ? 0.0 : kNegInf; };
  const GridDensity p = evaluate_on_grid(left, box, 100);
  const GridDensity q = evaluate_on_grid(right, box, 100);
  CHECK(grid_hellinger(p, q) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isinf(grid_kl(p, q)));
}

TEST_CASE("unit-shifted Gaussians match closed forms") {
  const GridDensity p = gaussian_grid_1d(0.0, 1.0);
  const GridDensity q = gaussian_grid_1d(1.0, 1.0);
  CHECK(std::abs(grid_kl(p, q) - 0.5) < 1e-6);
  CHECK(std::abs(grid_hellinger(p, q) - (1.0 - std::exp(-0.125))) < 1e-6);
  CHECK(std::abs(grid_hellinger(p, q) - 0.117503) < 1e-6);

  const GridDensity wide = gaussian_grid_1d(0.5, 2.0);
  const double ref = oracle::gaussian_kl(Vector::Constant(1, 0.0), Matrix::Constant(1, 1, 1.0),
                                         Vector::Constant(1, 0.5), Matrix::Constant(1, 1, 2.0));
  CHECK(std::abs(grid_kl(p, wide) - ref) < 1e-6);
}

TEST_CASE("Hellinger is symmetric and KL(p,p) vanishes on random grids") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 25; ++t) {
    const GridDensity p = random_grid(rng);
    const GridDensity q = random_grid(rng);
    const double h = grid_hellinger(p, q);
    CHECK(h == doctest::Approx(grid_hellinger(q, p)).epsilon(1e-12));
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    CHECK(grid_kl(p, q) >= 0.0);
    CHECK(grid_kl(p, p) == doctest::Approx(0.0));
  }
}

TEST_CASE("grid shape mismatch is rejected") {
  const GridDensity p = gaussian_grid_1d(0.0, 1.0, 100);
  const GridDensity q = gaussian_grid_1d(0.0, 1.0, 120);
  CHECK_THROWS_AS(grid_kl(p, q), std::invalid_argument);
}

TEST_CASE("Rosenbrock grid density normalizes") {
  const Problem rb = make_rosenbrock();
  const GridDensity g = evaluate_on_grid([&](const ParamVector& x) { return log_joint(rb, x); }, rb.prior, 400);
  CHECK(g.log_values.size() == 400 * 400);
  CHECK(std::abs(std::exp(logsumexp(g.log_masses())) - 1.0) < 1e-6);
  CHECK(std::isfinite(g.log_normalizer()));
}

TEST_CASE("quantile interpolates linearly") {
  const Vector v = Eigen::Vector4d(4.0, 1.0, 3.0, 2.0);
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 1.0 / 3.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(quantile(Vector(0), 0.5), std::invalid_argument);
}

TEST_CASE("Silverman bandwidth and KDE normalization") {
  std::mt19937_64 rng(7);
  const Vector s = normal_draws(rng, 5000, 1.0, 2.0);
  const double h = silverman_bandwidth(s);
  CHECK(h == doctest::Approx(0.9 * 2.0 * std::pow(5000.0, -0.2)).epsilon(0.05));

  const int n = 4000;
  Vector at(n);
  const double lo = -12.0, hi = 14.0, dx = (hi - lo) / n;
  for (int i = 0; i < n; ++i) at[i] = lo + (i + 0.5) * dx;
  const double mass = kde_log_density(s, h, at).array().exp().sum() * dx;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(kde_log_density(s, 0.0, at), std::invalid_argument);
}

TEST_CASE("marginal comparison") {
  std::mt19937_64 rng(11);
  const Vector a = normal_draws(rng, 4000, 0.0, 1.0);
  const MarginalComparison same = compare_marginals(a, a, -6.0, 6.0);
  CHECK(same.kl < 1e-12);
  CHECK(same.hellinger < 1e-12);

  const Vector b = normal_draws(rng, 4000, 1.0, 1.0);
  const MarginalComparison shifted = compare_marginals(a, b, -6.0, 7.0);
  const double h = silverman_bandwidth(a);
  // KDE smoothing inflates both variances by h^2.
  CHECK(shifted.kl == doctest::Approx(0.5 / (1.0 + h * h)).epsilon(0.15));

  Matrix ref(2, 3000), app(2, 3000);
  ref.row(0) = normal_draws(rng, 3000, 0.0, 1.0).transpose();
  ref.row(1) = normal_draws(rng, 3000, 5.0, 0.1).transpose();
  app = ref;
  const auto all = compare_all_marginals(ref, app);
  REQUIRE(all.size() == 2);
  CHECK(all[0].kl < 1e-12);
  CHECK(all[1].kl < 1e-12);
  CHECK_THROWS_AS(compare_all_marginals(ref, Matrix(3, 10)), std::invalid_argument);
}

TEST_CASE("compare_to_truth modes") {
  const Problem rb = make_rosenbrock();
  const auto f = [&](const ParamVector& x) { return log_joint(rb, x); };
  TruthReference grid_truth;
  grid_truth.grid = evaluate_on_grid(f, rb.prior, 200);
  const TruthMetrics exact = compare_to_truth(grid_truth, f, nullptr);
  CHECK(exact.kl < 1e-6);
  CHECK(exact.hellinger < 1e-6);
  const TruthMetrics prior = compare_to_truth(grid_truth, [&](const ParamVector&) { return 0.0; }, nullptr);
  CHECK(prior.kl > 0.5);
  CHECK(prior.hellinger > 0.1);

  std::mt19937_64 rng(3);
  Matrix s(2, 2000);
  s.row(0) = normal_draws(rng, 2000, 0.0, 1.0).transpose();
  s.row(1) = normal_draws(rng, 2000, 1.0, 1.0).transpose();
  TruthReference sample_truth;
  sample_truth.samples = s;
  const TruthMetrics self = compare_to_truth(sample_truth, f, &s);
  CHECK(self.kl < 1e-12);

  CHECK_THROWS_AS(compare_to_truth(TruthReference{}, f, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(compare_to_truth(sample_truth, f, nullptr), std::invalid_argument);
}
