#pragma once

#include <string>

#include <json.hpp>

namespace calib96 {

// Parses the TOML subset used by the experiment configs into JSON: comments,
// [dotted.tables], and key = value lines where the value is a string, bool,
// integer, float, or a flat array of those. Nothing else is accepted.
nlohmann::json toml_lite_parse(const std::string& text);

nlohmann::json load_config_file(const std::string& path);  // .toml or .json

}  // namespace calib96
