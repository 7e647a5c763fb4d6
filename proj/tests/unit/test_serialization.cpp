#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "agp/serialization.hpp"

using namespace agp;

namespace {

Problem quad_problem() {
  Problem p{"quad", BoxDomain(Eigen::Vector2d(-3.0, -3.0), Eigen::Vector2d(3.0, 3.0)), {}, {"a", "b"}};
  p.log_likelihood = [](const ParamVector& x) { return -0.5 * (x[0] * x[0] / 0.5 + (x[1] - 1.0) * (x[1] - 1.0)); };
  return p;
}

RunConfig quick_config() {
  RunConfig c;
  c.m0 = 8;
  c.m = 2;
  c.M = 1500;
  c.n_max = 2;
  c.seed = 3;
  c.gmm_max_components = 2;
  c.gp.n_starts = 2;
  c.gp.max_iters = 40;
  c.mcmc.adapt_start = 200;
  c.sa.n_restarts = 2;
  c.sa.steps_per_restart = 50;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("vector and matrix round-trip exactly") {
  const Vector v = Eigen::Vector3d(0.1, -1e-300, 12345.678901234567);
  CHECK(vector_from_json(Json::parse(vector_to_json(v).dump())) == v);
  Matrix m(2, 3);
  m << 1.0 / 3.0, 2, 3, 4, 5, std::nextafter(6.0, 7.0);
  CHECK(matrix_from_json(Json::parse(matrix_to_json(m).dump())) == m);
  CHECK_THROWS_AS(vector_from_json(Json::object()), ConfigError);
  CHECK_THROWS_AS(matrix_from_json(Json::parse("[[1,2],[3]]")), ConfigError);
}

TEST_CASE("mixture round-trip preserves the density") {
  Matrix c2(2, 2);
  c2 << 0.5, 0.1, 0.1, 0.3;
  const GaussianMixture g(Eigen::Vector2d(0.25, 0.75), {Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(-1.0, 2.0)},
                          {Matrix::Identity(2, 2), c2});
  const GaussianMixture back = mixture_from_json(Json::parse(mixture_to_json(g).dump()));
  CHECK(back.weights() == g.weights());
  CHECK(back.means() == g.means());
  CHECK(back.covariances() == g.covariances());
  const ParamVector x = Eigen::Vector2d(0.3, 1.1);
  CHECK(back.log_pdf(x) == g.log_pdf(x));
}

TEST_CASE("state and approximation round-trip after real iterations") {
  const Problem p = quad_problem();
  const RunConfig c = quick_config();
  const RunResult r = run(p, c);

  const AgpState back = state_from_json(Json::parse(state_to_json(r.state).dump()));
  CHECK(back.n == r.state.n);
  CHECK(back.terminated == r.state.terminated);
  CHECK(back.consecutive_hits == r.state.consecutive_hits);
  CHECK(back.eval_count == r.state.eval_count);
  CHECK(back.kl_history == r.state.kl_history);
  CHECK(back.designs.points == r.state.designs.points);
  CHECK(back.designs.log_f_values == r.state.designs.log_f_values);
  CHECK(back.designs.provenance == r.state.designs.provenance);
  REQUIRE(back.mixture.has_value());
  CHECK(back.mixture->weights() == r.state.mixture->weights());
  REQUIRE(back.warm_start.has_value());
  CHECK(back.warm_start->lengthscales == r.state.warm_start->lengthscales);
  REQUIRE(back.trace.size() == r.trace.size());
  for (std::size_t i = 0; i < back.trace.size(); ++i) {
    CHECK(back.trace[i].evals == r.trace[i].evals);
    CHECK(back.trace[i].d_kl == r.trace[i].d_kl);
    CHECK(back.trace[i].accept_rate == r.trace[i].accept_rate);
    CHECK(back.trace[i].gmm_components == r.trace[i].gmm_components);
  }

  const PosteriorApprox a = approx_from_json(Json::parse(approx_to_json(r.approx).dump()));
  for (const auto& x : r.state.designs.points) {
    CHECK(approx_log_density(a, x) == doctest::Approx(approx_log_density(r.approx, x)).epsilon(1e-9));
  }
  CHECK(approx_log_density(a, Eigen::Vector2d(5.0, 0.0)) == kNegInf);
}

TEST_CASE("resuming from a serialized mid-run state reproduces the run") {
  const Problem p = quad_problem();
  RunConfig c = quick_config();
  c.n_max = 3;
  std::optional<Json> after_first;
  RunOptions opts;
  opts.on_iteration = [&after_first](const AgpState& s) {
    if (!after_first) after_first = state_to_json(s);
  };
  const RunResult full = run(p, c, opts);
  REQUIRE(after_first.has_value());

  RunOptions resume;
  resume.resume = state_from_json(Json::parse(after_first->dump()));
  const RunResult resumed = run(p, c, resume);
  REQUIRE(resumed.trace.size() == full.trace.size());
  CHECK(resumed.state.designs.points == full.state.designs.points);
  for (std::size_t i = 0; i < full.trace.size(); ++i) {
    CHECK(resumed.trace[i].d_kl == full.trace[i].d_kl);
    CHECK(resumed.trace[i].accept_rate == full.trace[i].accept_rate);
  }
}

TEST_CASE("schema and consistency checks") {
  Json bad = Json::object({{"schema", "agp-checkpoint/0"}});
  CHECK_THROWS_AS(state_from_json(bad), ConfigError);
  CHECK_THROWS_AS(approx_from_json(Json::object({{"schema", "nope"}})), ConfigError);

  AgpState s;
  s.designs.add(Eigen::Vector2d(0.0, 0.0), -1.0, 0);
  s.eval_count = 1;
  Json j = state_to_json(s);
  CHECK_NOTHROW(state_from_json(j));
  j["eval_count"] = 2;
  CHECK_THROWS_AS(state_from_json(j), ConfigError);
}

TEST_CASE("atomic write replaces the file and leaves no temporary") {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "agp_serialization_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "out.json").string();
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  CHECK(slurp(path) == "second");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK_THROWS(write_file_atomic((dir / "missing" / "x.json").string(), "x"));
  std::filesystem::remove_all(dir);
}
