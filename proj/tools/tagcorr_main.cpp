#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tagcorr/clockstats.hpp"
#include "tagcorr/config.hpp"
#include "tagcorr/correlation.hpp"
#include "tagcorr/manifest.hpp"
#include "tagcorr/simulator.hpp"
#include "tagcorr/stream_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;   // CLI, config or file-format violation
constexpr int kExitIo = 3;      // filesystem failure
constexpr int kExitAnalysis = 4;  // no significant offset / no peak / no fit
constexpr int kExitDigest = 5;  // manifest digest mismatch

struct DigestMismatch {
    std::string path;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void ensure_parent(const fs::path& path) {
    const fs::path dir = path.parent_path();
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw tagcorr::IoError("cannot create directory: " + dir.string());
}

unsigned worker_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void print_diagnostic(const json& j) { std::cout << j.dump(2) << "\n"; }

struct FineParams {
    std::int64_t bin_ps = 5;
    double span_ns = 100.0;        // full window width
    double coarse_bin_ns = 10.0;
    double coarse_range_us = 1000.0;  // one-sided

    std::int64_t span_ps() const {
        return static_cast<std::int64_t>(std::llround(span_ns * 1000.0));
    }
    tagcorr::CoarseSearchParams coarse() const {
        tagcorr::CoarseSearchParams p;
        p.coarse_bin_ps = static_cast<std::int64_t>(std::llround(coarse_bin_ns * 1000.0));
        p.search_range_ps =
            static_cast<std::int64_t>(std::llround(coarse_range_us * 1e6));
        return p;
    }
};

void add_fine_flags(CLI::App* cmd, FineParams& p) {
    cmd->add_option("--bin-ps", p.bin_ps, "fine histogram bin width in ps")
        ->default_val(p.bin_ps);
    cmd->add_option("--span-ns", p.span_ns,
                    "full fine-histogram span in ns, centered on the coarse offset")
        ->default_val(p.span_ns);
    cmd->add_option("--coarse-bin-ns", p.coarse_bin_ns, "coarse search bin in ns")
        ->default_val(p.coarse_bin_ns);
    cmd->add_option("--coarse-range-us", p.coarse_range_us,
                    "one-sided coarse search range in us")
        ->default_val(p.coarse_range_us);
}

json fit_to_json(const tagcorr::PeakFit& fit) {
    return json{{"center_ps", fit.center_ps},     {"fwhm_ps", fit.fwhm_ps},
                {"amplitude", fit.amplitude},     {"background", fit.background},
                {"residual_rms", fit.residual_rms}, {"converged", fit.converged}};
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_prefix) {
    tagcorr::ExperimentConfig cfg = tagcorr::load_config(config_path);
    if (seed) cfg.seed = *seed;

    Stopwatch timer;
    auto [a, b] = tagcorr::run_experiment(cfg);
    const double sim_s = timer.seconds();

    const fs::path path_a = out_prefix + "-a.ttg";
    const fs::path path_b = out_prefix + "-b.ttg";
    ensure_parent(path_a);
    tagcorr::write_stream(path_a, a);
    tagcorr::write_stream(path_b, b);

    tagcorr::RunManifest m;
    m.command = "simulate";
    m.tool_version = TAGCORR_VERSION;
    m.seed = cfg.seed;
    m.config_json = tagcorr::config_to_json(cfg);
    m.output_digests[path_a.string()] = tagcorr::sha256_file_hex(path_a);
    m.output_digests[path_b.string()] = tagcorr::sha256_file_hex(path_b);
    const double total = static_cast<double>(a.events.size() + b.events.size());
    m.metrics["elapsed_s"] = sim_s;
    m.metrics["events_a"] = static_cast<double>(a.events.size());
    m.metrics["events_b"] = static_cast<double>(b.events.size());
    m.metrics["events_per_s"] = sim_s > 0.0 ? total / sim_s : 0.0;
    m.save(out_prefix + "-manifest.json");

    std::cout << "wrote " << path_a.string() << " (" << a.events.size() << " events), "
              << path_b.string() << " (" << b.events.size() << " events)\n";
    return kExitOk;
}

int cmd_correlate(const std::string& a_path, const std::string& b_path,
                  const std::string& out_prefix, const FineParams& p) {
    const tagcorr::TimestampStream a = tagcorr::read_stream(a_path);
    const tagcorr::TimestampStream b = tagcorr::read_stream(b_path);

    Stopwatch timer;
    tagcorr::CoarseOffset coarse;
    try {
        coarse = tagcorr::coarse_offset_search(a, b, p.coarse());
    } catch (const tagcorr::NoSignificantOffset& e) {
        print_diagnostic(json{{"error", "no_significant_offset"},
                              {"candidate_offset_ps", e.candidate_ps},
                              {"significance", e.significance},
                              {"threshold", p.coarse().significance_threshold}});
        return kExitAnalysis;
    }

    const tagcorr::CorrelationHistogram hist = tagcorr::coincidence_histogram(
        a, b, coarse.offset_ps, p.span_ps(), p.bin_ps, worker_threads());

    tagcorr::PeakFit fit;
    try {
        fit = tagcorr::fit_peak(hist);
    } catch (const tagcorr::NoPeak& e) {
        print_diagnostic(json{{"error", "no_peak"},
                              {"background_per_bin", e.background},
                              {"coarse_offset_ps", coarse.offset_ps}});
        return kExitAnalysis;
    }
    const double elapsed = timer.seconds();

    const fs::path hist_path = out_prefix + "-hist.csv";
    const fs::path fit_path = out_prefix + "-fit.json";
    ensure_parent(hist_path);
    tagcorr::write_histogram_csv(hist_path, hist);

    json inputs{{a_path, tagcorr::sha256_file_hex(a_path)},
                {b_path, tagcorr::sha256_file_hex(b_path)}};
    json fit_doc = fit_to_json(fit);
    fit_doc["schema"] = "tagcorr-fit-1";
    fit_doc["coarse_offset_ps"] = coarse.offset_ps;
    fit_doc["coarse_significance"] = coarse.significance;
    fit_doc["histogram"] = json{{"bin_width_ps", hist.bin_width_ps},
                                {"span_ps", hist.span_ps},
                                {"center_offset_ps", hist.center_offset_ps},
                                {"n_a", hist.n_a},
                                {"n_b", hist.n_b},
                                {"acq_duration_ps", hist.acq_duration_ps}};
    fit_doc["inputs"] = inputs;
    tagcorr::atomic_write_text(fit_path, fit_doc.dump(2) + "\n");

    tagcorr::RunManifest m;
    m.command = "correlate";
    m.tool_version = TAGCORR_VERSION;
    for (auto& [path, digest] : inputs.items())
        m.input_digests[path] = digest.get<std::string>();
    m.output_digests[hist_path.string()] = tagcorr::sha256_file_hex(hist_path);
    m.output_digests[fit_path.string()] = tagcorr::sha256_file_hex(fit_path);
    json results = fit_to_json(fit);
    results["coarse_offset_ps"] = coarse.offset_ps;
    results["coarse_significance"] = coarse.significance;
    m.results_json = results.dump();
    const double total = static_cast<double>(a.events.size() + b.events.size());
    m.metrics["elapsed_s"] = elapsed;
    m.metrics["events_per_s"] = elapsed > 0.0 ? total / elapsed : 0.0;
    m.save(out_prefix + "-manifest.json");

    std::printf("center_ps=%.3f fwhm_ps=%.3f\n", fit.center_ps, fit.fwhm_ps);
    return kExitOk;
}

int cmd_drift(const std::string& a_path, const std::string& b_path,
              const std::string& out_prefix, double slice_s, bool do_compensate,
              const FineParams& p) {
    const tagcorr::TimestampStream a = tagcorr::read_stream(a_path);
    const tagcorr::TimestampStream b = tagcorr::read_stream(b_path);

    tagcorr::TrackParams params;
    params.slice_duration_s = slice_s;
    params.bin_width_ps = p.bin_ps;
    params.span_ps = p.span_ps();
    params.coarse = p.coarse();
    params.threads = worker_threads();

    Stopwatch timer;
    tagcorr::DriftTrack track;
    try {
        track = tagcorr::track_drift(a, b, params);
    } catch (const tagcorr::NoSignificantOffset& e) {
        print_diagnostic(json{{"error", "no_significant_offset"},
                              {"candidate_offset_ps", e.candidate_ps},
                              {"significance", e.significance}});
        return kExitAnalysis;
    } catch (const std::runtime_error& e) {
        print_diagnostic(json{{"error", "drift_track_failed"}, {"message", e.what()}});
        return kExitAnalysis;
    }

    const fs::path slices_path = out_prefix + "-slices.csv";
    const fs::path drift_path = out_prefix + "-drift.json";
    ensure_parent(slices_path);
    tagcorr::write_slices_csv(slices_path, track);

    json inputs{{a_path, tagcorr::sha256_file_hex(a_path)},
                {b_path, tagcorr::sha256_file_hex(b_path)}};
    json drift_doc{{"schema", "tagcorr-drift-1"},
                   {"slope_ps_per_s", track.slope_ps_per_s()},
                   {"fitted_y", track.fitted_y},
                   {"intercept_ps", track.fitted_intercept_ps},
                   {"residual_rms_ps", track.fit_residual_rms_ps},
                   {"slice_duration_s", track.slice_duration_s},
                   {"n_slices", track.slices.size()},
                   {"failed_slices", track.failed_slices},
                   {"inputs", inputs}};

    tagcorr::RunManifest m;
    m.command = "drift";
    m.tool_version = TAGCORR_VERSION;
    for (auto& [path, digest] : inputs.items())
        m.input_digests[path] = digest.get<std::string>();

    std::printf("slope_ps_per_s=%.4f\n", track.slope_ps_per_s());

    if (do_compensate) {
        const tagcorr::TimestampStream b2 = tagcorr::compensate(b, track);
        const fs::path comp_path = out_prefix + "-b-comp.ttg";
        tagcorr::write_stream(comp_path, b2);

        // The compensated stream should carry its peak near zero offset; run
        // the normal pipeline to re-measure the width.
        json comp{{"stream", comp_path.string()}};
        try {
            const tagcorr::CoarseOffset c2 =
                tagcorr::coarse_offset_search(a, b2, p.coarse());
            const tagcorr::CorrelationHistogram h2 = tagcorr::coincidence_histogram(
                a, b2, c2.offset_ps, p.span_ps(), p.bin_ps, worker_threads());
            const tagcorr::PeakFit f2 = tagcorr::fit_peak(h2);
            comp["fit"] = fit_to_json(f2);
            std::printf("compensated_fwhm_ps=%.3f\n", f2.fwhm_ps);
        } catch (const tagcorr::NoSignificantOffset& e) {
            comp["error"] = "no_significant_offset";
        } catch (const tagcorr::NoPeak& e) {
            comp["error"] = "no_peak";
        }
        drift_doc["compensated"] = comp;
        m.output_digests[comp_path.string()] = tagcorr::sha256_file_hex(comp_path);
    }

    tagcorr::atomic_write_text(drift_path, drift_doc.dump(2) + "\n");

    m.output_digests[slices_path.string()] = tagcorr::sha256_file_hex(slices_path);
    m.output_digests[drift_path.string()] = tagcorr::sha256_file_hex(drift_path);
    json results{{"slope_ps_per_s", track.slope_ps_per_s()},
                 {"fitted_y", track.fitted_y},
                 {"intercept_ps", track.fitted_intercept_ps},
                 {"residual_rms_ps", track.fit_residual_rms_ps},
                 {"n_slices", track.slices.size()},
                 {"n_failed", track.failed_slices.size()}};
    if (drift_doc.contains("compensated") && drift_doc["compensated"].contains("fit"))
        results["compensated_fwhm_ps"] = drift_doc["compensated"]["fit"]["fwhm_ps"];
    m.results_json = results.dump();
    const double total = static_cast<double>(a.events.size() + b.events.size());
    const double elapsed = timer.seconds();
    m.metrics["elapsed_s"] = elapsed;
    m.metrics["events_per_s"] = elapsed > 0.0 ? total / elapsed : 0.0;
    m.save(out_prefix + "-manifest.json");
    return kExitOk;
}

int cmd_adev(const std::string& phase_path, const std::string& out_prefix,
             const std::string& m_list) {
    const tagcorr::PhaseSeries p = tagcorr::read_phase_csv(phase_path);

    std::vector<std::uint64_t> ms;
    if (!m_list.empty()) {
        std::size_t pos = 0;
        while (pos < m_list.size()) {
            std::size_t comma = m_list.find(',', pos);
            if (comma == std::string::npos) comma = m_list.size();
            const std::string tok = m_list.substr(pos, comma - pos);
            try {
                std::size_t used = 0;
                const unsigned long long v = std::stoull(tok, &used);
                if (used != tok.size() || v == 0) throw std::invalid_argument(tok);
                ms.push_back(v);
            } catch (const std::exception&) {
                throw tagcorr::ConfigError("--m-list entries must be positive integers, got \"" +
                                           tok + "\"");
            }
            pos = comma + 1;
        }
    }

    Stopwatch timer;
    const tagcorr::AdevCurve curve = tagcorr::overlapping_adev(p, ms);
    for (std::uint64_t m : curve.omitted_m)
        std::cerr << "adev: omitted m=" << m << " (series has too few samples)\n";

    const fs::path out_path = out_prefix + "-adev.csv";
    ensure_parent(out_path);
    tagcorr::write_adev_csv(out_path, curve);

    tagcorr::RunManifest m;
    m.command = "adev";
    m.tool_version = TAGCORR_VERSION;
    m.input_digests[phase_path] = tagcorr::sha256_file_hex(phase_path);
    m.output_digests[out_path.string()] = tagcorr::sha256_file_hex(out_path);
    m.metrics["elapsed_s"] = timer.seconds();
    m.metrics["n_samples"] = static_cast<double>(p.x_s.size());
    m.save(out_prefix + "-manifest.json");

    std::cout << "wrote " << out_path.string() << " (" << curve.points.size()
              << " points)\n";
    return kExitOk;
}

// Resolve a manifest-recorded path: as given first, then relative to the
// manifest's own directory.
std::optional<fs::path> resolve_recorded(const std::string& recorded,
                                         const fs::path& manifest_dir) {
    fs::path as_given(recorded);
    std::error_code ec;
    if (fs::exists(as_given, ec)) return as_given;
    fs::path near = manifest_dir / as_given.filename();
    if (fs::exists(near, ec)) return near;
    return std::nullopt;
}

int cmd_report(const std::string& out_prefix, const std::vector<std::string>& manifest_paths) {
    if (manifest_paths.empty())
        throw tagcorr::ConfigError("report: at least one manifest is required");

    struct Entry {
        tagcorr::RunManifest m;
        fs::path dir;
        std::string label;  // resolved via digest chaining
    };
    std::vector<Entry> entries;
    for (const std::string& path : manifest_paths) {
        Entry e;
        e.m = tagcorr::RunManifest::load(path);
        e.dir = fs::path(path).parent_path();
        entries.push_back(std::move(e));
    }

    // Verify every recorded digest whose file is still present.
    std::size_t verified = 0;
    for (const Entry& e : entries) {
        for (const auto& digests : {e.m.input_digests, e.m.output_digests}) {
            for (const auto& [recorded, digest] : digests) {
                auto path = resolve_recorded(recorded, e.dir);
                if (!path) continue;
                if (tagcorr::sha256_file_hex(*path) != digest)
                    throw DigestMismatch{recorded};
                ++verified;
            }
        }
    }

    // Chain analysis manifests back to the simulation that produced their
    // inputs: any input digest matching a simulate output digest inherits
    // that run's config label.
    std::map<std::string, Entry*> digest_to_sim;
    for (Entry& e : entries) {
        if (e.m.command != "simulate") continue;
        json cfg = json::parse(e.m.config_json, nullptr, false);
        e.label = cfg.is_object() && cfg.contains("label") && cfg["label"].is_string()
                      ? cfg["label"].get<std::string>()
                      : "";
        for (const auto& [path, digest] : e.m.output_digests) digest_to_sim[digest] = &e;
    }
    for (Entry& e : entries) {
        if (e.m.command == "simulate") continue;
        std::set<std::string> labels;
        for (const auto& [path, digest] : e.m.input_digests) {
            auto it = digest_to_sim.find(digest);
            if (it != digest_to_sim.end() && !it->second->label.empty())
                labels.insert(it->second->label);
        }
        if (labels.size() == 1) e.label = *labels.begin();
    }

    auto find_hist_csv = [&](const Entry& e) -> std::optional<fs::path> {
        for (const auto& [recorded, digest] : e.m.output_digests) {
            if (recorded.size() >= 9 &&
                recorded.compare(recorded.size() - 9, 9, "-hist.csv") == 0)
                return resolve_recorded(recorded, e.dir);
        }
        return std::nullopt;
    };
    auto find_slices_csv = [&](const Entry& e) -> std::optional<fs::path> {
        for (const auto& [recorded, digest] : e.m.output_digests) {
            if (recorded.size() >= 11 &&
                recorded.compare(recorded.size() - 11, 11, "-slices.csv") == 0)
                return resolve_recorded(recorded, e.dir);
        }
        return std::nullopt;
    };

    json report{{"schema", "tagcorr-report-1"},
                {"tool_version", TAGCORR_VERSION},
                {"verified_digests", verified},
                {"figures", json::object()}};

    // (a), (b): one histogram each from the matching correlate run.
    for (const auto& [fig, label] :
         std::vector<std::pair<std::string, std::string>>{{"a", "preset-a"},
                                                          {"b", "preset-b"}}) {
        const Entry* found = nullptr;
        for (const Entry& e : entries)
            if (e.m.command == "correlate" && e.label == label) found = &e;
        if (!found) {
            std::cerr << "report: no correlate manifest chained to " << label << "\n";
            report["figures"][fig] = nullptr;
            continue;
        }
        auto src = find_hist_csv(*found);
        if (!src)
            throw tagcorr::IoError("report: histogram CSV for " + label + " not found");
        const fs::path dst = out_prefix + "-fig_" + fig + ".csv";
        ensure_parent(dst);
        tagcorr::atomic_write_text(dst, tagcorr::read_text(*src));
        json results = json::parse(found->m.results_json, nullptr, false);
        report["figures"][fig] = {{"label", label},
                                  {"csv", dst.string()},
                                  {"fwhm_ps", results.is_object() ? results["fwhm_ps"]
                                                                  : json(nullptr)}};
    }

    // (c): FWHM of each preset-c correlate run against its acquisition start
    // time, the s1..s4 sample series.
    {
        struct Sample {
            double start_s;
            double fwhm;
        };
        std::vector<Sample> samples;
        for (const Entry& e : entries) {
            if (e.m.command != "correlate" || e.label != "preset-c") continue;
            json results = json::parse(e.m.results_json, nullptr, false);
            if (!results.is_object() || !results.contains("fwhm_ps")) continue;
            double start_s = 0.0;
            for (const auto& [path, digest] : e.m.input_digests) {
                auto it = digest_to_sim.find(digest);
                if (it == digest_to_sim.end()) continue;
                json cfg = json::parse(it->second->m.config_json, nullptr, false);
                if (cfg.is_object() && cfg.contains("source"))
                    start_s = cfg["source"].value("start_time", 0.0);
            }
            samples.push_back({start_s, results["fwhm_ps"].get<double>()});
        }
        if (samples.empty()) {
            std::cerr << "report: no correlate manifests chained to preset-c\n";
            report["figures"]["c"] = nullptr;
        } else {
            std::sort(samples.begin(), samples.end(),
                      [](const Sample& x, const Sample& y) { return x.start_s < y.start_s; });
            std::string csv = "sample,start_time_s,fwhm_ps\n";
            json arr = json::array();
            for (std::size_t i = 0; i < samples.size(); ++i) {
                csv += "s" + std::to_string(i + 1) + "," +
                       json(samples[i].start_s).dump() + "," +
                       json(samples[i].fwhm).dump() + "\n";
                arr.push_back({{"sample", "s" + std::to_string(i + 1)},
                               {"start_time_s", samples[i].start_s},
                               {"fwhm_ps", samples[i].fwhm}});
            }
            const fs::path dst = out_prefix + "-fig_c.csv";
            ensure_parent(dst);
            tagcorr::atomic_write_text(dst, csv);
            report["figures"]["c"] = {{"csv", dst.string()}, {"samples", arr}};
        }
    }

    // (d): per-slice drift data plus the fitted slope.
    {
        const Entry* found = nullptr;
        for (const Entry& e : entries)
            if (e.m.command == "drift") found = &e;
        if (!found) {
            std::cerr << "report: no drift manifest given\n";
            report["figures"]["d"] = nullptr;
        } else {
            auto src = find_slices_csv(*found);
            if (!src)
                throw tagcorr::IoError("report: slices CSV not found");
            const fs::path dst = out_prefix + "-fig_d.csv";
            ensure_parent(dst);
            tagcorr::atomic_write_text(dst, tagcorr::read_text(*src));
            json results = json::parse(found->m.results_json, nullptr, false);
            report["figures"]["d"] = {{"label", found->label},
                                      {"csv", dst.string()},
                                      {"fit", results.is_object() ? results : json(nullptr)}};
        }
    }

    const fs::path report_path = out_prefix + "-report.json";
    ensure_parent(report_path);
    tagcorr::atomic_write_text(report_path, report.dump(2) + "\n");
    std::cout << "wrote " << report_path.string() << " (" << verified
              << " digests verified)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"photon time-tag correlation toolkit"};
    app.set_version_flag("--version", std::string(TAGCORR_VERSION));
    app.require_subcommand(1);

    // simulate
    std::string sim_config, sim_out = "run";
    std::optional<std::uint64_t> sim_seed;
    CLI::App* simulate =
        app.add_subcommand("simulate", "generate a pair of timestamp stream files");
    simulate->add_option("--config", sim_config, "experiment config JSON")->required();
    simulate->add_option("--seed", sim_seed, "override the config seed");
    simulate->add_option("--out", sim_out, "output path prefix")->default_val(sim_out);

    // correlate
    std::string cor_a, cor_b, cor_out = "corr";
    FineParams cor_params;
    CLI::App* correlate = app.add_subcommand(
        "correlate", "recover the coincidence peak between two stream files");
    correlate->add_option("stream_a", cor_a, "herald-side stream file")->required();
    correlate->add_option("stream_b", cor_b, "signal-side stream file")->required();
    correlate->add_option("--out", cor_out, "output path prefix")->default_val(cor_out);
    add_fine_flags(correlate, cor_params);

    // drift
    std::string drift_a, drift_b, drift_out = "drift";
    double drift_slice_s = 1.0;
    bool drift_comp = false;
    FineParams drift_params;
    CLI::App* drift = app.add_subcommand(
        "drift", "track the coincidence peak across wall-time slices");
    drift->add_option("stream_a", drift_a, "herald-side stream file")->required();
    drift->add_option("stream_b", drift_b, "signal-side stream file")->required();
    drift->add_option("--out", drift_out, "output path prefix")->default_val(drift_out);
    drift->add_option("--slice-s", drift_slice_s, "slice duration in seconds")
        ->default_val(drift_slice_s);
    drift->add_flag("--compensate", drift_comp,
                    "write a drift-compensated copy of stream B and re-fit");
    add_fine_flags(drift, drift_params);

    // adev
    std::string adev_phase, adev_out = "adev", adev_mlist;
    CLI::App* adev = app.add_subcommand(
        "adev", "overlapping Allan deviation of a phase-difference CSV");
    adev->add_option("phase_csv", adev_phase, "two-column t_s,x_s CSV")->required();
    adev->add_option("--out", adev_out, "output path prefix")->default_val(adev_out);
    adev->add_option("--m-list", adev_mlist,
                     "comma-separated averaging factors (default octave ladder)");

    // report
    std::string report_out = "report";
    std::vector<std::string> report_manifests;
    CLI::App* report = app.add_subcommand(
        "report", "verify manifests and assemble the figure data set");
    report->add_option("manifests", report_manifests, "manifest JSON files")
        ->required();
    report->add_option("--out", report_out, "output path prefix")
        ->default_val(report_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim_config, sim_seed, sim_out);
        if (correlate->parsed()) return cmd_correlate(cor_a, cor_b, cor_out, cor_params);
        if (drift->parsed())
            return cmd_drift(drift_a, drift_b, drift_out, drift_slice_s, drift_comp,
                             drift_params);
        if (adev->parsed()) return cmd_adev(adev_phase, adev_out, adev_mlist);
        if (report->parsed()) return cmd_report(report_out, report_manifests);
    } catch (const DigestMismatch& e) {
        std::cerr << "digest mismatch: " << e.path << "\n";
        return kExitDigest;
    } catch (const tagcorr::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const tagcorr::FormatError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const tagcorr::IoError& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << e.what() << "\n";
        return kExitAnalysis;
    }
    return kExitOk;
}
