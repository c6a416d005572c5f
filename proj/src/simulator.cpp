#include "tagcorr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tagcorr/rng.hpp"

namespace tagcorr {

void SourceConfig::validate() const {
    if (pair_rate_hz <= 0.0)
        throw std::invalid_argument("source.pair_rate must be > 0");
    if (duration_s < 0.0)
        throw std::invalid_argument("source.duration must be >= 0");
    if (correlation_jitter_ps < 0.0)
        throw std::invalid_argument("source.correlation_jitter must be >= 0");
    if (start_time_s < 0.0)
        throw std::invalid_argument("source.start_time must be >= 0");
}

void ChannelConfig::validate() const {
    if (transmission < 0.0 || transmission > 1.0)
        throw std::invalid_argument("channel.transmission must be in [0, 1]");
    if (delay_ps < 0.0)
        throw std::invalid_argument("channel.delay must be >= 0");
}

void DetectorConfig::validate() const {
    if (efficiency < 0.0 || efficiency > 1.0)
        throw std::invalid_argument("detector.efficiency must be in [0, 1]");
    if (jitter_ps < 0.0 || dead_time_ps < 0.0 || dark_rate_hz < 0.0)
        throw std::invalid_argument("detector parameters must be >= 0");
}

void ExperimentConfig::validate() const {
    source.validate();
    herald_channel.validate();
    signal_channel.validate();
    herald_detector.validate();
    signal_detector.validate();
    const double span_ps = (source.start_time_s + source.duration_s) * kPsPerSec + 1e9;
    clock_a.validate(span_ps);
    clock_b.validate(span_ps);
}

PairEvents generate_pairs(const SourceConfig& source, std::uint64_t seed) {
    source.validate();
    Rng rng(seed);

    const std::uint64_t start_ps =
        static_cast<std::uint64_t>(std::llround(source.start_time_s * kPsPerSec));
    const long double window_ps =
        static_cast<long double>(source.duration_s) * 1e12L;

    PairEvents out;
    const double expected = source.pair_rate_hz * source.duration_s;
    out.herald_ps.reserve(static_cast<std::size_t>(expected * 1.05 + 64));
    out.signal_ps.reserve(out.herald_ps.capacity());

    // Local time inside the window accumulates in long double so the
    // picosecond grain survives multi-hour start offsets.
    long double local_ps = 0.0L;
    const double rate_per_ps = source.pair_rate_hz / kPsPerSec;
    while (true) {
        local_ps += static_cast<long double>(rng.exponential(rate_per_ps));
        if (local_ps >= window_ps) break;
        const std::uint64_t herald =
            start_ps + static_cast<std::uint64_t>(std::llrintl(local_ps));
        long double signal_ld = static_cast<long double>(herald) +
                                static_cast<long double>(
                                    rng.normal(source.correlation_jitter_ps));
        if (signal_ld < 0.0L) signal_ld = 0.0L;
        out.herald_ps.push_back(herald);
        out.signal_ps.push_back(
            static_cast<std::uint64_t>(std::llrintl(signal_ld)));
    }
    // Jitter can invert neighbors when it is comparable to the pair spacing.
    if (!std::is_sorted(out.signal_ps.begin(), out.signal_ps.end()))
        std::sort(out.signal_ps.begin(), out.signal_ps.end());
    return out;
}

std::vector<std::uint64_t> propagate(std::span<const std::uint64_t> times_ps,
                                     const ChannelConfig& channel,
                                     std::uint64_t seed) {
    channel.validate();
    Rng rng(seed);
    const std::uint64_t delay =
        static_cast<std::uint64_t>(std::llround(channel.delay_ps));
    std::vector<std::uint64_t> out;
    out.reserve(static_cast<std::size_t>(
        static_cast<double>(times_ps.size()) * channel.transmission + 64));
    for (std::uint64_t t : times_ps) {
        if (rng.bernoulli(channel.transmission)) out.push_back(t + delay);
    }
    return out;
}

std::vector<std::uint64_t> detect(std::span<const std::uint64_t> times_ps,
                                  const DetectorConfig& det,
                                  std::uint64_t window_start_ps,
                                  std::uint64_t window_duration_ps,
                                  std::uint64_t seed) {
    det.validate();
    Rng rng(seed);

    std::vector<std::uint64_t> hits;
    hits.reserve(times_ps.size());
    for (std::uint64_t t : times_ps) {
        if (!rng.bernoulli(det.efficiency)) continue;
        long double smeared = static_cast<long double>(t) +
                              static_cast<long double>(rng.normal(det.jitter_ps));
        if (smeared < 0.0L) smeared = 0.0L;
        hits.push_back(static_cast<std::uint64_t>(std::llrintl(smeared)));
    }

    if (det.dark_rate_hz > 0.0 && window_duration_ps > 0) {
        const double rate_per_ps = det.dark_rate_hz / kPsPerSec;
        long double local = 0.0L;
        const long double window = static_cast<long double>(window_duration_ps);
        while (true) {
            local += static_cast<long double>(rng.exponential(rate_per_ps));
            if (local >= window) break;
            hits.push_back(window_start_ps +
                           static_cast<std::uint64_t>(std::llrintl(local)));
        }
    }

    std::sort(hits.begin(), hits.end());

    if (det.dead_time_ps <= 0.0 || hits.empty()) return hits;

    // Non-paralyzable: only accepted events arm the dead time.
    const std::uint64_t dead =
        static_cast<std::uint64_t>(std::llround(det.dead_time_ps));
    std::vector<std::uint64_t> out;
    out.reserve(hits.size());
    std::uint64_t last = 0;
    bool any = false;
    for (std::uint64_t t : hits) {
        if (any && t - last < dead) continue;
        out.push_back(t);
        last = t;
        any = true;
    }
    return out;
}

std::pair<TimestampStream, TimestampStream> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    const PairEvents pairs = generate_pairs(cfg.source, derive_seed(cfg.seed, "pairs"));

    auto herald = propagate(pairs.herald_ps, cfg.herald_channel,
                            derive_seed(cfg.seed, "herald.channel"));
    auto signal = propagate(pairs.signal_ps, cfg.signal_channel,
                            derive_seed(cfg.seed, "signal.channel"));

    const std::uint64_t dur_ps =
        static_cast<std::uint64_t>(std::llround(cfg.source.duration_s * kPsPerSec));
    const std::uint64_t start_ps =
        static_cast<std::uint64_t>(std::llround(cfg.source.start_time_s * kPsPerSec));
    const std::uint64_t herald_win =
        start_ps + static_cast<std::uint64_t>(std::llround(cfg.herald_channel.delay_ps));
    const std::uint64_t signal_win =
        start_ps + static_cast<std::uint64_t>(std::llround(cfg.signal_channel.delay_ps));

    herald = detect(herald, cfg.herald_detector, herald_win, dur_ps,
                    derive_seed(cfg.seed, "herald.detector"));
    signal = detect(signal, cfg.signal_detector, signal_win, dur_ps,
                    derive_seed(cfg.seed, "signal.detector"));

    TimestampStream a = apply_clock(herald, cfg.clock_a,
                                    derive_seed(cfg.seed, "clock.a"), 0, dur_ps);
    TimestampStream b = apply_clock(signal, cfg.clock_b,
                                    derive_seed(cfg.seed, "clock.b"), 1, dur_ps);
    return {std::move(a), std::move(b)};
}

namespace {

// Shared hardware defaults for the bundled presets. The 10 km fiber delay
// uses group index 1.468 at 1570 nm, rounded to 48.97 us.
ExperimentConfig base_config() {
    ExperimentConfig cfg;
    cfg.source = {3e6, 5.0, 10.0, 0.0};
    cfg.herald_channel = {0.0, 0.95};
    cfg.signal_channel = {48'970'000.0, 0.63};
    cfg.herald_detector = {0.8, 50.0, 25'000.0, 100.0};
    cfg.signal_detector = {0.8, 50.0, 25'000.0, 100.0};
    cfg.clock_a = {0.0, 0.0, 0.0, 0.0, 5};
    cfg.clock_b = {0.0, 0.0, 0.0, 0.0, 5};
    cfg.seed = 1;
    return cfg;
}

}  // namespace

ExperimentConfig preset_a() {
    ExperimentConfig cfg = base_config();
    cfg.label = "preset-a";
    // both channels share one tagger: common reference cancels, no clock terms
    return cfg;
}

ExperimentConfig preset_b() {
    ExperimentConfig cfg = base_config();
    cfg.label = "preset-b";
    // network-disciplined taggers: frequency locked, residual per-tag jitter
    cfg.clock_a.white_jitter_ps = 100.0;
    cfg.clock_b.white_jitter_ps = 100.0;
    return cfg;
}

ExperimentConfig preset_c() {
    ExperimentConfig cfg = base_config();
    cfg.label = "preset-c";
    // free-running Rb-disciplined taggers: residual relative frequency offset
    // of 5.65 ps/s on the signal side, larger reference jitter than preset-b
    cfg.clock_a.white_jitter_ps = 150.0;
    cfg.clock_b.white_jitter_ps = 150.0;
    cfg.clock_b.frac_freq_offset = 5.65e-12;
    return cfg;
}

}  // namespace tagcorr
