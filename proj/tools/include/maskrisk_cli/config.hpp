#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskrisk/experiments.hpp"

namespace maskrisk::cli {

/// Malformed or out-of-range experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses one experiment config. Unknown keys are rejected at every level;
/// absent keys keep their defaults. "gamma" may replace "d" (d = round(gamma n)).
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

/// Accepts a single config object or an array of them.
std::vector<ExperimentConfig> configs_from_json(const nlohmann::json& j);
std::vector<ExperimentConfig> load_configs(const std::filesystem::path& path);

}  // namespace maskrisk::cli
