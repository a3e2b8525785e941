#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "scq/bench.hpp"

namespace scq {

using Json = nlohmann::json;

/// Parsers for the JSON experiment configs. Each takes the path of the node
/// inside the document (e.g. "methods[2].classifier") and throws ConfigError
/// naming the offending field.

Json read_json_file(const std::filesystem::path& path);

/// {"family": "OCC", "method": "kde", "hyperparams": {"bandwidth_scale": 0.5}}
ClassifierSpec classifier_from_json(const Json& j, const std::string& path);

/// A list of classifiers, each optionally carrying a "name".
Toolbox toolbox_from_json(const Json& j, const std::string& path);

/// {"mode": "structure"|"unit"|"fixed", "kind": "group"|"kernel",
///  "bandwidth": "silverman"|number, "lambda", "fixed": [...], "jitter": bool}
WeightConfig weights_from_json(const Json& j, const std::string& path);

/// Either a preset {"preset": "benchmark", "m", "p", "mu", "null_pool_size", ...}
/// or {"preset": "attainment", "m", "null_pool_size"}, or an explicit layout
/// with "sparsity_blocks" and "alt_components".
SyntheticConfig synthetic_from_json(const Json& j, const std::string& path);

MethodSpec method_from_json(const Json& j, const std::string& path);

SplitOptions split_from_json(const Json& j, const std::string& path);

ColumnSchema schema_from_json(const Json& j, const std::string& path);

/// Reads `key` as a probability in (0, 1).
double alpha_from_json(const Json& j, const std::string& key, const std::string& path);

}  // namespace scq
