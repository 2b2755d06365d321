#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "locfuse/experiment.hpp"

namespace locfuse {

/// Strict parse of a JSON document (text). Unknown keys and invariant
/// violations raise ParseError naming the key; syntax errors carry the line.
ExperimentConfig parse_config_text(const std::string& text);

/// Reads a config file. A manifest written by the CLI is accepted too and
/// yields its embedded resolved config.
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Fully resolved config (every default expanded).
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& doc);

}  // namespace locfuse
