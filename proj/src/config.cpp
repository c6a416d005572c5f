#include "tagcorr/config.hpp"

#include <set>

#include "json.hpp"
#include "tagcorr/stream_io.hpp"

namespace tagcorr {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void check_keys(const json& obj, const std::string& prefix,
                const std::set<std::string>& allowed) {
    if (!obj.is_object())
        fail((prefix.empty() ? std::string("top level") : prefix) + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) fail("unknown key " + join(prefix, it.key()));
    }
}

double require_number(const json& obj, const std::string& prefix, const std::string& key) {
    const json* v = find(obj, key);
    if (!v) fail("missing key " + join(prefix, key));
    if (!v->is_number()) fail(join(prefix, key) + " must be a number");
    return v->get<double>();
}

double number_or(const json& obj, const std::string& prefix, const std::string& key,
                 double fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number()) fail(join(prefix, key) + " must be a number");
    return v->get<double>();
}

std::uint64_t uint_or(const json& obj, const std::string& prefix, const std::string& key,
                      std::uint64_t fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) fail(join(prefix, key) + " must be a non-negative integer");
    return v->get<std::uint64_t>();
}

SourceConfig parse_source(const json& j) {
    check_keys(j, "source", {"pair_rate", "duration", "correlation_jitter", "start_time"});
    SourceConfig s;
    s.pair_rate_hz = require_number(j, "source", "pair_rate");
    s.duration_s = require_number(j, "source", "duration");
    s.correlation_jitter_ps = number_or(j, "source", "correlation_jitter", 10.0);
    s.start_time_s = number_or(j, "source", "start_time", 0.0);
    return s;
}

ChannelConfig parse_channel(const json* j, const std::string& prefix) {
    ChannelConfig c;  // delay 0, transmission 1
    if (!j) return c;
    check_keys(*j, prefix, {"delay", "transmission"});
    c.delay_ps = number_or(*j, prefix, "delay", c.delay_ps);
    c.transmission = number_or(*j, prefix, "transmission", c.transmission);
    return c;
}

DetectorConfig parse_detector(const json* j, const std::string& prefix) {
    // Toolkit hardware defaults for unspecified detectors.
    DetectorConfig d{0.8, 50.0, 25'000.0, 100.0};
    if (!j) return d;
    check_keys(*j, prefix, {"efficiency", "jitter", "dead_time", "dark_rate"});
    d.efficiency = number_or(*j, prefix, "efficiency", d.efficiency);
    d.jitter_ps = number_or(*j, prefix, "jitter", d.jitter_ps);
    d.dead_time_ps = number_or(*j, prefix, "dead_time", d.dead_time_ps);
    d.dark_rate_hz = number_or(*j, prefix, "dark_rate", d.dark_rate_hz);
    return d;
}

ClockModel parse_clock(const json* j, const std::string& prefix) {
    ClockModel c{0.0, 0.0, 0.0, 0.0, 5};
    if (!j) return c;
    check_keys(*j, prefix,
               {"phase_offset", "frac_freq_offset", "freq_drift", "white_jitter",
                "quantization"});
    c.phase_offset_ps = number_or(*j, prefix, "phase_offset", c.phase_offset_ps);
    c.frac_freq_offset = number_or(*j, prefix, "frac_freq_offset", c.frac_freq_offset);
    c.freq_drift_per_s = number_or(*j, prefix, "freq_drift", c.freq_drift_per_s);
    c.white_jitter_ps = number_or(*j, prefix, "white_jitter", c.white_jitter_ps);
    const std::uint64_t q = uint_or(*j, prefix, "quantization", c.quantization_ps);
    if (q < 1 || q > 0xffffffffull) fail(join(prefix, "quantization") + " must be in [1, 2^32)");
    c.quantization_ps = static_cast<std::uint32_t>(q);
    return c;
}

json clock_to_json(const ClockModel& c) {
    return json{{"phase_offset", c.phase_offset_ps},
                {"frac_freq_offset", c.frac_freq_offset},
                {"freq_drift", c.freq_drift_per_s},
                {"white_jitter", c.white_jitter_ps},
                {"quantization", c.quantization_ps}};
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) fail("not valid JSON");
    check_keys(j, "",
               {"schema", "label", "seed", "source", "herald_channel", "signal_channel",
                "herald_detector", "signal_detector", "clock_a", "clock_b"});

    const json* schema = find(j, "schema");
    if (!schema) fail("missing key schema");
    if (!schema->is_string() || schema->get<std::string>() != kConfigSchema)
        fail("schema must be \"" + std::string(kConfigSchema) + "\"");

    const json* source = find(j, "source");
    if (!source) fail("missing key source");

    ExperimentConfig cfg;
    cfg.source = parse_source(*source);
    cfg.herald_channel = parse_channel(find(j, "herald_channel"), "herald_channel");
    cfg.signal_channel = parse_channel(find(j, "signal_channel"), "signal_channel");
    cfg.herald_detector = parse_detector(find(j, "herald_detector"), "herald_detector");
    cfg.signal_detector = parse_detector(find(j, "signal_detector"), "signal_detector");
    cfg.clock_a = parse_clock(find(j, "clock_a"), "clock_a");
    cfg.clock_b = parse_clock(find(j, "clock_b"), "clock_b");
    cfg.seed = uint_or(j, "", "seed", 0);
    const json* label = find(j, "label");
    if (label) {
        if (!label->is_string()) fail("label must be a string");
        cfg.label = label->get<std::string>();
    }

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config_json(read_text(path));
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["schema"] = kConfigSchema;
    if (!cfg.label.empty()) j["label"] = cfg.label;
    j["seed"] = cfg.seed;
    j["source"] = {{"pair_rate", cfg.source.pair_rate_hz},
                   {"duration", cfg.source.duration_s},
                   {"correlation_jitter", cfg.source.correlation_jitter_ps},
                   {"start_time", cfg.source.start_time_s}};
    j["herald_channel"] = {{"delay", cfg.herald_channel.delay_ps},
                           {"transmission", cfg.herald_channel.transmission}};
    j["signal_channel"] = {{"delay", cfg.signal_channel.delay_ps},
                           {"transmission", cfg.signal_channel.transmission}};
    j["herald_detector"] = {{"efficiency", cfg.herald_detector.efficiency},
                            {"jitter", cfg.herald_detector.jitter_ps},
                            {"dead_time", cfg.herald_detector.dead_time_ps},
                            {"dark_rate", cfg.herald_detector.dark_rate_hz}};
    j["signal_detector"] = {{"efficiency", cfg.signal_detector.efficiency},
                            {"jitter", cfg.signal_detector.jitter_ps},
                            {"dead_time", cfg.signal_detector.dead_time_ps},
                            {"dark_rate", cfg.signal_detector.dark_rate_hz}};
    j["clock_a"] = clock_to_json(cfg.clock_a);
    j["clock_b"] = clock_to_json(cfg.clock_b);
    return j.dump(2) + "\n";
}

}  // namespace tagcorr
