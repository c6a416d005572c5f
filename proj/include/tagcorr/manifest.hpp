#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace tagcorr {

inline constexpr const char* kManifestSchema = "tagcorr-manifest-1";

// Reproducibility record written next to every command's outputs: the exact
// config, seed and tool version that produced them plus SHA-256 digests of
// all files touched. cmd_report chains manifests by digest to recover which
// simulation produced which analysis.
struct RunManifest {
    std::string command;
    std::string tool_version;
    std::uint64_t seed = 0;
    std::string config_json;   // canonical config snapshot; empty when n/a
    std::string results_json;  // command-specific results object; empty when n/a
    std::map<std::string, std::string> input_digests;   // path -> sha256 hex
    std::map<std::string, std::string> output_digests;  // path -> sha256 hex
    std::map<std::string, double> metrics;              // e.g. events_per_s

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);

    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

}  // namespace tagcorr
