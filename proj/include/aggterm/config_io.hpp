#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "aggterm/architectures.hpp"
#include "aggterm/models.hpp"

namespace aggterm {

using Json = nlohmann::json;

/// Parses a JSON file; ConfigError names the path on failure.
Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);

/// {"kind": "dense", "p": 0.1} | {"kind": "root", "K": 1, "beta": 0.5}
/// | {"kind": "log", "K": 1} | {"kind": "sparse", "K": 1}
/// | {"kind": "alternating", "even": {...}, "odd": {...}}
Schedule schedule_from_json(const Json& j);
Json to_json(const Schedule& s);

/// {"model": "er", "schedule": {...}} | {"model": "sbm", "fractions": [...], "P": [[...]]}
/// | {"model": "ba", "m": 5}
GraphModelSpec model_from_json(const Json& j);
Json to_json(const GraphModelSpec& m);

/// {"dist": "uniform01" | "uniform" | "bernoulli" | "constant", "dim": d,
///  "a", "b" | "q" | "c"}
FeatureDistSpec features_from_json(const Json& j);
/// The optional "features" member of a model document.
std::optional<FeatureDistSpec> model_features(const Json& model_doc);

/// {"kind": "MeanGNN", "layers": 3, "hidden": 16, "classes": 5, "input_dim": 16,
///  "rw_length": 0, "activation": "relu", "output": "softmax", "skip": [[0, 2]],
///  "global_readout": false, "seed": 0}
ArchConfig arch_from_json(const Json& j);
Json to_json(const ArchConfig& c);

}  // namespace aggterm
