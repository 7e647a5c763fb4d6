#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <random>

#include "agp/agp_loop.hpp"
#include "agp/problems.hpp"

using namespace agp;

namespace {

Problem gaussian_problem(std::atomic<long>* calls = nullptr) {
  Problem p{"gauss2", BoxDomain(Eigen::Vector2d(-4.0, -4.0), Eigen::Vector2d(4.0, 4.0)), {}, {"a", "b"}};
  p.log_likelihood = [calls](const ParamVector& x) {
    if (calls) calls->fetch_add(1);
    const double a = x[0] - 0.5, b = x[1] + 0.5;
    return -0.5 * (a * a / 0.4 + b * b / 0.2);
  };
  return p;
}

RunConfig small_config(std::uint64_t seed = 5) {
  RunConfig c;
  c.m0 = 12;
  c.m = 3;
  c.M = 2000;
  c.n_max = 4;
  c.K = 2;
  c.seed = seed;
  c.gmm_max_components = 2;
  c.gp.n_starts = 2;
  c.gp.max_iters = 60;
  c.gp.refit_max_iters = 20;
  c.mcmc.adapt_start = 200;
  c.sa.n_restarts = 2;
  c.sa.steps_per_restart = 100;
  return c;
}

bool same_trace(const std::vector<IterationRecord>& a, const std::vector<IterationRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].evals != b[i].evals || a[i].d_kl != b[i].d_kl || a[i].accept_rate != b[i].accept_rate ||
        a[i].kernel.lengthscales != b[i].kernel.lengthscales ||
        a[i].kernel.signal_variance != b[i].kernel.signal_variance) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("initialize draws m0 prior points") {
  const Problem rb = make_rosenbrock();
  RunConfig c;
  c.seed = 9;
  const AgpState s = initialize(rb, c);
  REQUIRE(s.designs.size() == 20);
  CHECK(s.eval_count == 20);
  CHECK(s.n == 0);
  CHECK_FALSE(s.mixture.has_value());
  CHECK(s.terminated == Termination::Running);
  for (std::size_t i = 0; i < s.designs.size(); ++i) {
    CHECK(rb.prior.contains(s.designs.points[i]));
    CHECK(s.designs.log_f_values[i] == doctest::Approx(log_joint(rb, s.designs.points[i])));
    CHECK(s.designs.provenance[i] == 0);
  }
  const AgpState again = initialize(rb, c);
  for (std::size_t i = 0; i < s.designs.size(); ++i) CHECK(again.designs.points[i] == s.designs.points[i]);
}

TEST_CASE("m0 below d+1 is rejected before any likelihood call") {
  std::atomic<long> calls{0};
  const Problem p = gaussian_problem(&calls);
  RunConfig c = small_config();
  c.m0 = 2;
  CHECK_THROWS_AS(initialize(p, c), ConfigError);
  CHECK_THROWS_AS(run(p, c), ConfigError);
  CHECK(calls.load() == 0);
}

TEST_CASE("failed initial evaluations are redrawn") {
  Problem p = gaussian_problem();
  const auto inner = p.log_likelihood;
  p.log_likelihood = [inner](const ParamVector& x) {
    return x[0] < 0.0 ? std::numeric_limits<double>::quiet_NaN() : inner(x);
  };
  const AgpState s = initialize(p, small_config());
  REQUIRE(s.designs.size() == 12);
  for (const auto& x : s.designs.points) CHECK(x[0] >= 0.0);

  p.log_likelihood = [](const ParamVector&) { return std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS_AS(initialize(p, small_config()), EvaluationError);
}

TEST_CASE("residual targets") {
  const Problem p = gaussian_problem();
  const AgpState s = initialize(p, small_config());

  SUBCASE("prior base gives log l plus a constant") {
    const Vector g = residual_targets(s.designs, nullptr, p.prior);
    for (std::size_t i = 0; i < s.designs.size(); ++i) {
      CHECK(g[static_cast<Eigen::Index>(i)] - p.log_likelihood(s.designs.points[i]) ==
            doctest::Approx(0.0).epsilon(1e-12));
    }
  }

  SUBCASE("a mixture proportional to f gives constant targets") {
    const GaussianMixture exact(Vector::Ones(1), {Eigen::Vector2d(0.5, -0.5)},
                                {Eigen::Vector2d(0.4, 0.2).asDiagonal().toDenseMatrix()});
    const Vector g = residual_targets(s.designs, &exact, p.prior);
    CHECK(g.maxCoeff() - g.minCoeff() < 1e-10);
  }

  SUBCASE("unnormalized weights give identical targets") {
    const std::vector<ParamVector> means{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, -1.0)};
    const std::vector<Matrix> covs{Matrix::Identity(2, 2), 0.5 * Matrix::Identity(2, 2)};
    const GaussianMixture a(Eigen::Vector2d(0.3, 0.7), means, covs);
    const GaussianMixture b(Eigen::Vector2d(0.6, 1.4), means, covs);
    const Vector ga = residual_targets(s.designs, &a, p.prior);
    const Vector gb = residual_targets(s.designs, &b, p.prior);
    CHECK((ga - gb).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("KL counter and termination decision") {
  CHECK(update_kl_counter(0, 0.001, 0.01) == 1);
  CHECK(update_kl_counter(3, 0.001, 0.01) == 4);
  CHECK(update_kl_counter(3, 0.01, 0.01) == 0);
  CHECK(update_kl_counter(3, 0.0, 0.0) == 0);
  CHECK(termination_after(5, 3, 5, 100) == Termination::KlConverged);
  CHECK(termination_after(4, 99, 5, 100) == Termination::MaxIterations);
  CHECK(termination_after(5, 99, 5, 100) == Termination::KlConverged);
  CHECK(termination_after(4, 3, 5, 100) == Termination::Running);
}

TEST_CASE("stopping rule fires exactly after K consecutive hits on random streams") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const int K = 1 + static_cast<int>(rng() % 6);
    const int n_max = 1 + static_cast<int>(rng() % 40);
    const double D_max = 0.05 + 0.5 * u(rng);
    const double p_hit = u(rng);
    std::vector<double> stream;
    int k = 0;
    Termination t = Termination::Running;
    int n = 0;
    for (;; ++n) {
      if (n >= 1) {
        const double d = u(rng) < p_hit ? D_max * u(rng) : D_max * (1.0 + u(rng));
        stream.push_back(d);
        k = update_kl_counter(k, d, D_max);
      }
      t = termination_after(k, n, K, n_max);
      if (t != Termination::Running) break;
    }
    bool last_k_below = static_cast<int>(stream.size()) >= K;
    for (int j = 0; last_k_below && j < K; ++j) last_k_below = stream[stream.size() - 1 - j] < D_max;
    bool earlier_run = false;
    for (std::size_t end = K; end < stream.size(); ++end) {
      bool all = true;
      for (int j = 0; j < K; ++j) all = all && stream[end - 1 - j] < D_max;
      earlier_run = earlier_run || all;
    }
    CHECK_FALSE(earlier_run);
    CHECK((t == Termination::KlConverged) == last_k_below);
    if (t == Termination::MaxIterations) CHECK(n + 1 == n_max);
    CHECK(k <= K);
  }
}

TEST_CASE("n_max = 1 returns after one cycle") {
  const Problem p = gaussian_problem();
  RunConfig c = small_config();
  c.n_max = 1;
  const RunResult r = run(p, c);
  CHECK(r.state.terminated == Termination::MaxIterations);
  REQUIRE(r.trace.size() == 1);
  CHECK(r.state.eval_count == 12);
  CHECK(r.state.kl_history.empty());
}

TEST_CASE("infinite D_max terminates at n = K with the budget law") {
  const Problem p = gaussian_problem();
  RunConfig c = small_config();
  c.D_max = std::numeric_limits<double>::infinity();
  c.K = 2;
  c.n_max = 10;
  const RunResult r = run(p, c);
  CHECK(r.state.terminated == Termination::KlConverged);
  CHECK(r.state.n == 2);
  REQUIRE(r.trace.size() == 3);
  CHECK(r.state.kl_history.size() == 2);
  CHECK(r.state.eval_count == 12 + 3 * 2);
  CHECK(r.trace[0].evals == 15);
  CHECK(r.trace[1].evals == 18);
  CHECK(r.trace[2].evals == 18);
  CHECK_FALSE(r.trace[0].d_kl.has_value());
}

TEST_CASE("zero D_max runs to n_max") {
  const Problem p = gaussian_problem();
  RunConfig c = small_config();
  c.n_max = 3;
  AgpState s = initialize(p, c);
  c.D_max = 0.0;
  while (s.terminated == Termination::Running) s = step(std::move(s), p, c);
  CHECK(s.terminated == Termination::MaxIterations);
  CHECK(s.n == 2);
  CHECK(s.consecutive_hits == 0);
  CHECK(s.eval_count == 12 + 2 * 3);
  CHECK_THROWS_AS(step(s, p, c), std::logic_error);
}

TEST_CASE("run invariants, approximation and determinism") {
  const Problem p = gaussian_problem();
  RunConfig c = small_config(17);
  c.D_max = 0.05;
  c.n_max = 5;
  std::vector<AgpState> seen;
  RunOptions opts;
  opts.on_iteration = [&seen](const AgpState& s) { seen.push_back(s); };
  const RunResult r = run(p, c, opts);

  REQUIRE(seen.size() == r.trace.size());
  const int completed_nonterminal = static_cast<int>(r.trace.size()) - 1;
  CHECK(r.state.eval_count == c.m0 + c.m * completed_nonterminal);
  CHECK(r.state.designs.size() == static_cast<std::size_t>(r.state.eval_count));
  CHECK(r.state.kl_history.size() == r.trace.size() - 1);
  for (const auto& s : seen) {
    CHECK(s.consecutive_hits <= c.K);
    REQUIRE(s.samples.has_value());
    for (Eigen::Index j = 0; j < s.samples->points.cols(); ++j) CHECK(p.prior.contains(s.samples->points.col(j)));
    for (const auto& x : s.designs.points) CHECK(p.prior.contains(x));
  }
  for (std::size_t i = 0; i < r.state.designs.size(); ++i) {
    for (std::size_t j = i + 1; j < r.state.designs.size(); ++j) {
      CHECK((r.state.designs.points[i] - r.state.designs.points[j]).norm() > 0.0);
    }
  }

  CHECK(approx_log_density(r.approx, Eigen::Vector2d(4.5, 0.0)) == kNegInf);
  CHECK(approx_log_density(r.approx, Eigen::Vector2d(0.0, -4.01)) == kNegInf);
  const double nugget_scale = std::sqrt(r.approx.gp.kernel().nugget) * 1e3 + 1e-3;
  for (std::size_t i = 0; i < r.state.designs.size(); ++i) {
    const double err = approx_log_density(r.approx, r.state.designs.points[i]) - r.state.designs.log_f_values[i];
    CHECK(std::abs(err) < nugget_scale * std::max(1.0, std::abs(r.state.designs.log_f_values[i])));
  }
  const GridDensity g = evaluate_on_grid([&](const ParamVector& x) { return approx_log_density(r.approx, x); },
                                         p.prior, 100);
  CHECK(std::isfinite(g.log_normalizer()));

  if (r.state.terminated == Termination::KlConverged) {
    const std::size_t last = seen.size() - 1;
    const auto lp = [&](const ParamVector& x) { return seen[last].mixture->log_pdf(x); };
    const auto lq = [&](const ParamVector& x) { return seen[last - 1].mixture->log_pdf(x); };
    CHECK(grid_kl(evaluate_on_grid(lq, p.prior, 200), evaluate_on_grid(lp, p.prior, 200)) < 2.0 * c.D_max);
    for (int j = 0; j < c.K; ++j) CHECK(r.state.kl_history[r.state.kl_history.size() - 1 - j] < c.D_max);
  }

  const RunResult again = run(p, c);
  CHECK(same_trace(r.trace, again.trace));
  CHECK(again.state.designs.points == r.state.designs.points);
}

TEST_CASE("truth diagnostics are recorded when a reference is supplied") {
  const Problem p = gaussian_problem();
  RunConfig c = small_config();
  c.n_max = 2;
  TruthReference truth;
  truth.grid = evaluate_on_grid([&](const ParamVector& x) { return log_joint(p, x); }, p.prior, 100);
  RunOptions opts;
  opts.truth = &truth;
  const RunResult r = run(p, c, opts);
  for (const auto& rec : r.trace) {
    REQUIRE(rec.kl_truth.has_value());
    CHECK(*rec.kl_truth >= 0.0);
    CHECK(*rec.hellinger_truth <= 1.0);
  }
}

TEST_CASE("step errors carry the iteration index") {
  Problem p = gaussian_problem();
  RunConfig c = small_config();
  AgpState s = initialize(p, c);
  p.log_likelihood = [](const ParamVector&) { return std::numeric_limits<double>::quiet_NaN(); };
  try {
    step(s, p, c);
    FAIL("expected an evaluation error");
  } catch (const EvaluationError& e) {
    CHECK(std::string(e.what()).find("iteration 0") != std::string::npos);
  }
}

TEST_CASE("termination names round-trip") {
  for (Termination t : {Termination::Running, Termination::KlConverged, Termination::MaxIterations}) {
    CHECK(termination_from_string(to_string(t)) == t);
  }
  CHECK_THROWS_AS(termination_from_string("bogus"), ConfigError);
}
