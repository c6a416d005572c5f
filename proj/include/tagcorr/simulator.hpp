#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tagcorr/timebase.hpp"

namespace tagcorr {

// Correlated pair source. Pairs are emitted as a homogeneous Poisson process
// over [start, start + duration); the signal member is spread around its
// herald by the intrinsic correlation jitter.
struct SourceConfig {
    double pair_rate_hz = 0.0;
    double duration_s = 0.0;
    double correlation_jitter_ps = 0.0;  // std dev of signal-minus-herald spread
    double start_time_s = 0.0;           // acquisition start on the true timeline

    void validate() const;
};

// Optical path from source to detector: a fixed propagation delay plus a
// survival probability.
struct ChannelConfig {
    double delay_ps = 0.0;
    double transmission = 1.0;

    void validate() const;
};

// Single-photon detector: Bernoulli efficiency, Gaussian timing jitter,
// non-paralyzable dead time, dark counts as an independent Poisson process.
struct DetectorConfig {
    double efficiency = 1.0;
    double jitter_ps = 0.0;
    double dead_time_ps = 0.0;
    double dark_rate_hz = 0.0;

    void validate() const;
};

struct ExperimentConfig {
    SourceConfig source;
    ChannelConfig herald_channel;
    ChannelConfig signal_channel;
    DetectorConfig herald_detector;
    DetectorConfig signal_detector;
    ClockModel clock_a;  // herald-side tagger
    ClockModel clock_b;  // signal-side tagger
    std::uint64_t seed = 0;
    std::string label;

    void validate() const;
};

struct PairEvents {
    std::vector<std::uint64_t> herald_ps;
    std::vector<std::uint64_t> signal_ps;
};

// True-time emission of correlated pairs. Both outputs are sorted; with zero
// jitter the i-th entries of the two vectors form the i-th pair.
PairEvents generate_pairs(const SourceConfig& source, std::uint64_t seed);

// Bernoulli thinning by the channel transmission, then the fixed delay.
// Order preserved.
std::vector<std::uint64_t> propagate(std::span<const std::uint64_t> times_ps,
                                     const ChannelConfig& channel,
                                     std::uint64_t seed);

// Detection model: efficiency thinning, Gaussian jitter, dark counts merged
// over [window_start, window_start + window_duration), then non-paralyzable
// dead-time pruning. Output sorted.
std::vector<std::uint64_t> detect(std::span<const std::uint64_t> times_ps,
                                  const DetectorConfig& det,
                                  std::uint64_t window_start_ps,
                                  std::uint64_t window_duration_ps,
                                  std::uint64_t seed);

// Full two-arm experiment: stream A is the herald arm on clock_a, stream B
// the fiber-delayed signal arm on clock_b. Deterministic in config.seed; each
// stage consumes a sub-seed derived with derive_seed(seed, stage_tag).
std::pair<TimestampStream, TimestampStream> run_experiment(const ExperimentConfig& cfg);

// Ready-made configurations mirroring the three timing setups the toolkit
// reproduces: a shared reference clock, network-disciplined taggers with
// residual jitter, and free-running Rb-disciplined taggers with a relative
// frequency offset. Detector and channel numbers are toolkit defaults, not
// measured values.
ExperimentConfig preset_a();
ExperimentConfig preset_b();
ExperimentConfig preset_c();

}  // namespace tagcorr
