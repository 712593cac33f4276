#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qers/model.hpp"
#include "qers/scoring.hpp"

namespace qers {

using nlohmann::json;

json to_json(const WeightPreset& preset);
// Parses and validates; ValidationError/ConfigError on bad input.
WeightPreset preset_from_json(const json& j);

json to_json(const AlgorithmProfile& profile);
// Fields absent from `j` keep the values of `base`.
AlgorithmProfile profile_from_json(const json& j, const AlgorithmProfile& base);

struct ActivePresets {
    std::string basic = "Basic-B";
    std::string tuned = "Tuned-B";
    std::string fusion = "Fusion-default";
};

struct ServiceSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string store_path;      // empty = in-memory only
    ActivePresets active;
    std::size_t window = 500;    // samples per scenario
    double lambda = kDefaultSmoothing;
    std::string model_path;      // empty = no forest
    std::string static_dir;      // optional dashboard assets
};

// Contents of qers.config.json.
struct QersConfig {
    double ms = kDefaultScale;
    std::vector<WeightPreset> presets = builtin_presets(); // built-ins first, then customs
    ProfileCatalog profiles = builtin_profile_catalog();
    ServiceSettings service;

    const WeightPreset& preset(const std::string& name) const; // UnknownPreset
    PresetTriple active_triple() const;
};

inline constexpr int kConfigVersion = 1;

QersConfig config_from_json(const json& j);
json to_json(const QersConfig& config);

QersConfig load_config(const std::filesystem::path& path); // IoError / ConfigError

// "host:port" or ":port" or "port".
void apply_bind(ServiceSettings& settings, const std::string& bind);

// QERS_BIND and QERS_STORE override the service settings when set.
void apply_environment(QersConfig& config);

} // namespace qers
