#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedforget/scenario.hpp"

namespace fedforget {

/// Schema violation; `path` is the dotted field path ("unlearn.gamma").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Parses one scenario from a JSON tree. Unknown keys are rejected.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& cfg);

/// Desk-scale analogs of the four attack settings ("id1".."id4").
void apply_attack_setting(const std::string& id, nlohmann::json& j);
std::vector<std::string> attack_setting_ids();

struct AblationAxis {
  std::string path;
  std::vector<nlohmann::json> values;
};

struct ExperimentCell {
  std::string id;  // directory-safe, "base" when nothing is ablated
  std::vector<std::pair<std::string, nlohmann::json>> assignment;
  ScenarioConfig config;
};

struct Experiment {
  std::string name;
  nlohmann::json base;
  std::vector<AblationAxis> axes;
  std::vector<ExperimentCell> cells;
};

/// Accepts // and /* */ comments. Throws ConfigError.
Experiment parse_experiment(const std::string& text);
Experiment load_experiment(const std::filesystem::path& path);

std::string serialize_config(const ScenarioConfig& cfg);
ScenarioConfig parse_config(const std::string& text);

/// FNV-1a over the canonical dump of `j`.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace fedforget
