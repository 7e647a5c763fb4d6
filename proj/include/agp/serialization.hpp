#pragma once

#include <string>

#include <json.hpp>

#include "agp/agp_loop.hpp"
#include "agp/density_model.hpp"
#include "agp/gp_surrogate.hpp"

namespace agp {

using Json = nlohmann::json;

inline constexpr const char* kCheckpointSchema = "agp-checkpoint/1";
inline constexpr const char* kApproxSchema = "agp-approx/1";

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);
Json matrix_to_json(const Matrix& m);  // list of rows
Matrix matrix_from_json(const Json& j);

/// {"weights": [...], "means": [[...]], "covariances": [[[row], ...]]}
Json mixture_to_json(const GaussianMixture& g);
GaussianMixture mixture_from_json(const Json& j);

Json kernel_to_json(const KernelParams& p);
KernelParams kernel_from_json(const Json& j);

Json record_to_json(const IterationRecord& r);
IterationRecord record_from_json(const Json& j);

/// Design set, latest mixture, GP warm start, stopping counters and trace.
/// The GP itself is refit on resume, so it is not stored.
Json state_to_json(const AgpState& s);
AgpState state_from_json(const Json& j);

/// Everything needed to rebuild approx_log_density: box, base mixture (or
/// null for the prior), kernel and GP training data.
Json approx_to_json(const PosteriorApprox& a);
PosteriorApprox approx_from_json(const Json& j);

/// Write `text` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace agp
