#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "patchservo/bench.hpp"

namespace patchservo {

/// Parses a YAML benchmark configuration. Relative paths resolve against
/// `base_dir`. Errors carry "<source>:<line>:<column>" locations.
BenchmarkConfig parse_config(const std::string& yaml_text, const std::string& base_dir = ".",
                             const std::string& source_name = "<config>");

BenchmarkConfig load_config(const std::string& path);

/// Fully expanded configuration, used as the report snapshot.
nlohmann::json config_to_json(const BenchmarkConfig& cfg);

}  // namespace patchservo
