#include "agp/serialization.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace agp {

Json vector_to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected a JSON array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json matrix_to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(vector_to_json(m.row(r).transpose()));
  return j;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty JSON array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r]);
    if (row.size() != cols) throw ConfigError("ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json mixture_to_json(const GaussianMixture& g) {
  Json means = Json::array();
  Json covs = Json::array();
  for (int k = 0; k < g.components(); ++k) {
    means.push_back(vector_to_json(g.means()[static_cast<std::size_t>(k)]));
    covs.push_back(matrix_to_json(g.covariances()[static_cast<std::size_t>(k)]));
  }
  return {{"weights", vector_to_json(g.weights())}, {"means", means}, {"covariances", covs}};
}

GaussianMixture mixture_from_json(const Json& j) {
  std::vector<ParamVector> means;
  std::vector<Matrix> covs;
  for (const auto& m : j.at("means")) means.push_back(vector_from_json(m));
  for (const auto& c : j.at("covariances")) covs.push_back(matrix_from_json(c));
  return GaussianMixture(vector_from_json(j.at("weights")), std::move(means), std::move(covs));
}

Json kernel_to_json(const KernelParams& p) {
  return {{"lengthscales", vector_to_json(p.lengthscales)},
          {"signal_variance", p.signal_variance},
          {"nugget", p.nugget}};
}

KernelParams kernel_from_json(const Json& j) {
  KernelParams p;
  p.lengthscales = vector_from_json(j.at("lengthscales"));
  p.signal_variance = j.at("signal_variance").get<double>();
  p.nugget = j.at("nugget").get<double>();
  return p;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> number_or_null(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

Json record_to_json(const IterationRecord& r) {
  return {{"iter", r.iter},
          {"evals", r.evals},
          {"d_kl", optional_number(r.d_kl)},
          {"kl_truth", optional_number(r.kl_truth)},
          {"hellinger_truth", optional_number(r.hellinger_truth)},
          {"kernel", kernel_to_json(r.kernel)},
          {"accept_rate", r.accept_rate},
          {"gmm_components", r.gmm_components}};
}

IterationRecord record_from_json(const Json& j) {
  IterationRecord r;
  r.iter = j.at("iter").get<int>();
  r.evals = j.at("evals").get<long>();
  r.d_kl = number_or_null(j, "d_kl");
  r.kl_truth = number_or_null(j, "kl_truth");
  r.hellinger_truth = number_or_null(j, "hellinger_truth");
  r.kernel = kernel_from_json(j.at("kernel"));
  r.accept_rate = j.at("accept_rate").get<double>();
  r.gmm_components = j.at("gmm_components").get<int>();
  return r;
}

Json state_to_json(const AgpState& s) {
  Json points = Json::array();
  for (const auto& x : s.designs.points) points.push_back(vector_to_json(x));
  Json trace = Json::array();
  for (const auto& r : s.trace) trace.push_back(record_to_json(r));
  Json kl = Json::array();
  for (double v : s.kl_history) kl.push_back(v);
  return {{"schema", kCheckpointSchema},
          {"n", s.n},
          {"terminated", to_string(s.terminated)},
          {"consecutive_hits", s.consecutive_hits},
          {"eval_count", s.eval_count},
          {"kl_history", kl},
          {"designs",
           {{"points", points}, {"log_f_values", s.designs.log_f_values}, {"provenance", s.designs.provenance}}},
          {"mixture", s.mixture ? mixture_to_json(*s.mixture) : Json(nullptr)},
          {"warm_start", s.warm_start ? kernel_to_json(*s.warm_start) : Json(nullptr)},
          {"trace", trace}};
}

AgpState state_from_json(const Json& j) {
  if (j.value("schema", std::string()) != kCheckpointSchema) {
    throw ConfigError("checkpoint schema mismatch: expected " + std::string(kCheckpointSchema));
  }
  AgpState s;
  s.n = j.at("n").get<int>();
  s.terminated = termination_from_string(j.at("terminated").get<std::string>());
  s.consecutive_hits = j.at("consecutive_hits").get<int>();
  s.eval_count = j.at("eval_count").get<long>();
  s.kl_history = j.at("kl_history").get<std::vector<double>>();
  const Json& d = j.at("designs");
  for (const auto& p : d.at("points")) s.designs.points.push_back(vector_from_json(p));
  s.designs.log_f_values = d.at("log_f_values").get<std::vector<double>>();
  s.designs.provenance = d.at("provenance").get<std::vector<int>>();
  if (s.designs.points.size() != s.designs.log_f_values.size() ||
      s.designs.points.size() != s.designs.provenance.size() ||
      static_cast<long>(s.designs.points.size()) != s.eval_count) {
    throw ConfigError("checkpoint design set is inconsistent");
  }
  if (!j.at("mixture").is_null()) s.mixture = mixture_from_json(j.at("mixture"));
  if (!j.at("warm_start").is_null()) s.warm_start = kernel_from_json(j.at("warm_start"));
  for (const auto& r : j.at("trace")) s.trace.push_back(record_from_json(r));
  return s;
}

Json approx_to_json(const PosteriorApprox& a) {
  Json train_x = Json::array();
  for (const auto& x : a.gp.train_x()) train_x.push_back(vector_to_json(x));
  return {{"schema", kApproxSchema},
          {"box", {{"lower", vector_to_json(a.box.lower())}, {"upper", vector_to_json(a.box.upper())}}},
          {"base", a.base ? mixture_to_json(*a.base) : Json(nullptr)},
          {"kernel", kernel_to_json(a.gp.kernel())},
          {"train_x", train_x},
          {"train_y", vector_to_json(a.gp.train_y())}};
}

PosteriorApprox approx_from_json(const Json& j) {
  if (j.value("schema", std::string()) != kApproxSchema) {
    throw ConfigError("approximation schema mismatch: expected " + std::string(kApproxSchema));
  }
  BoxDomain box(vector_from_json(j.at("box").at("lower")), vector_from_json(j.at("box").at("upper")));
  std::vector<ParamVector> train_x;
  for (const auto& x : j.at("train_x")) train_x.push_back(vector_from_json(x));
  const KernelParams kernel = kernel_from_json(j.at("kernel"));
  GpModel gp = GpModel::condition(box, std::move(train_x), vector_from_json(j.at("train_y")), kernel,
                                  std::max(kernel.nugget, 1e-2));
  std::optional<GaussianMixture> base;
  if (!j.at("base").is_null()) base = mixture_from_json(j.at("base"));
  return PosteriorApprox{std::move(base), std::move(gp), std::move(box)};
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace agp
