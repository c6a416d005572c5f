#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "tagcorr/simulator.hpp"

namespace tagcorr {

inline constexpr const char* kConfigSchema = "tagcorr-config-1";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Strict parse of the versioned experiment-config JSON. Unknown keys are
// rejected; errors name the offending key with its dotted path. Only
// schema, source.pair_rate, and source.duration are required; everything
// else takes the documented toolkit defaults.
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical full-explicit snapshot of a config (sorted keys); the form
// embedded in run manifests.
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace tagcorr
