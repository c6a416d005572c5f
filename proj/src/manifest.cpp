#include "tagcorr/manifest.hpp"

#include "json.hpp"
#include "tagcorr/stream_io.hpp"

namespace tagcorr {

namespace {

using nlohmann::json;

json parse_or_throw(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw FormatError(std::string("manifest: ") + what + " is not valid JSON");
    return j;
}

}  // namespace

std::string RunManifest::to_json() const {
    json j;
    j["schema"] = kManifestSchema;
    j["command"] = command;
    j["tool_version"] = tool_version;
    j["seed"] = seed;
    j["config"] = config_json.empty() ? json(nullptr)
                                      : parse_or_throw(config_json, "config snapshot");
    j["results"] = results_json.empty() ? json(nullptr)
                                        : parse_or_throw(results_json, "results object");
    j["inputs"] = json::object();
    for (const auto& [path, digest] : input_digests) j["inputs"][path] = digest;
    j["outputs"] = json::object();
    for (const auto& [path, digest] : output_digests) j["outputs"][path] = digest;
    j["metrics"] = json::object();
    for (const auto& [key, value] : metrics) j["metrics"][key] = value;
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    json j = parse_or_throw(text, "document");
    if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string() ||
        j["schema"].get<std::string>() != kManifestSchema)
        throw FormatError("manifest: missing or unsupported schema field");

    RunManifest m;
    if (j.contains("command") && j["command"].is_string())
        m.command = j["command"].get<std::string>();
    if (j.contains("tool_version") && j["tool_version"].is_string())
        m.tool_version = j["tool_version"].get<std::string>();
    if (j.contains("seed") && j["seed"].is_number_unsigned())
        m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("config") && j["config"].is_object())
        m.config_json = j["config"].dump();
    if (j.contains("results") && j["results"].is_object())
        m.results_json = j["results"].dump();
    auto read_map = [&](const char* key, std::map<std::string, std::string>& out) {
        if (!j.contains(key)) return;
        const json& obj = j[key];
        if (!obj.is_object())
            throw FormatError(std::string("manifest: ") + key + " must be an object");
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!it.value().is_string())
                throw FormatError(std::string("manifest: ") + key + " digests must be strings");
            out[it.key()] = it.value().get<std::string>();
        }
    };
    read_map("inputs", m.input_digests);
    read_map("outputs", m.output_digests);
    if (j.contains("metrics") && j["metrics"].is_object()) {
        for (auto it = j["metrics"].begin(); it != j["metrics"].end(); ++it) {
            if (it.value().is_number()) m.metrics[it.key()] = it.value().get<double>();
        }
    }
    return m;
}

void RunManifest::save(const std::filesystem::path& path) const {
    atomic_write_text(path, to_json());
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    return from_json(read_text(path));
}

}  // namespace tagcorr
