#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace tagcorr {

inline constexpr double kPsPerSec = 1e12;

// Largest timestamp the toolkit accepts. Staying a factor of two inside the
// signed 64-bit range keeps every downstream difference (B minus A) exactly
// representable in int64.
inline constexpr std::uint64_t kMaxTimestampPs = (1ull << 62);

// One detector channel worth of time tags, in integer picoseconds of the
// owning tagger's local timescale. Events are non-decreasing; equal stamps
// occur when the tagger quantization collapses nearby detections.
struct TimestampStream {
    std::uint8_t channel_id = 0;
    std::uint32_t resolution_ps = 1;  // picoseconds per least-significant unit
    std::uint64_t duration_ps = 0;    // nominal acquisition span
    std::vector<std::uint64_t> events;

    // Acquisition span used for rate normalization: the nominal duration when
    // set, otherwise the observed event span.
    std::uint64_t effective_duration_ps() const {
        if (duration_ps > 0) return duration_ps;
        if (events.size() < 2) return 0;
        return events.back() - events.front();
    }

    void validate() const;  // throws std::invalid_argument
};

// Deterministic oscillator model mapping true time t onto a tagger's local
// timescale,
//     tau(t) = phi0 + (1 + y0) t + D/2 t^2 + noise,
// with t in picoseconds and the quadratic drift term expressed per true
// second. White phase noise is drawn per event; the result is quantized to
// the tagger bin size.
struct ClockModel {
    double phase_offset_ps = 0.0;   // phi0
    double frac_freq_offset = 0.0;  // y0, dimensionless (1e-12 == 1 ps/s)
    double freq_drift_per_s = 0.0;  // D, fractional frequency change per second
    double white_jitter_ps = 0.0;   // per-event white phase noise, std dev
    std::uint32_t quantization_ps = 1;

    // Noiseless, unquantized local-minus-true offset at true time t:
    //     phi0 + y0 t + D/2 t^2 / 1e12      [ps]
    double offset_at(double t_ps) const {
        return phase_offset_ps +
               frac_freq_offset * t_ps +
               0.5 * freq_drift_per_s * 1e-12 * t_ps * t_ps;
    }

    // Noiseless, unquantized local timescale value tau(t).
    double warp(double t_ps) const { return t_ps + offset_at(t_ps); }

    // d tau / d t; the mapping is monotone while this stays positive.
    double rate_at(double t_ps) const {
        return 1.0 + frac_freq_offset + freq_drift_per_s * 1e-12 * t_ps;
    }

    void validate(double span_ps) const;  // throws std::invalid_argument
};

// Relative delay between two clocks observing the same true event:
//     tau_a(t) - tau_b(t)
// This is the quantity the correlation pipeline estimates.
inline double relative_delay_ps(const ClockModel& a, const ClockModel& b, double t_ps) {
    return (a.phase_offset_ps - b.phase_offset_ps) +
           (a.frac_freq_offset - b.frac_freq_offset) * t_ps +
           0.5 * (a.freq_drift_per_s - b.freq_drift_per_s) * 1e-12 * t_ps * t_ps;
}

// Phase-difference samples between two clocks (A minus B), in seconds, on a
// uniform tau0 grid.
struct PhaseSeries {
    double tau0_s = 1.0;
    std::vector<double> x_s;
};

// Maps true event times through the clock model: warp, add white phase noise,
// quantize round-to-nearest (ties to even) to the tagger bin, re-sort if the
// noise produced local inversions. duration_ps == 0 infers the span from the
// last input event.
TimestampStream apply_clock(std::span<const std::uint64_t> true_times_ps,
                            const ClockModel& clock,
                            std::uint64_t rng_seed,
                            std::uint8_t channel_id = 0,
                            std::uint64_t duration_ps = 0);

// Exact noiseless inverse of the clock mapping: returns t with tau(t) equal
// to each observed stamp, to sub-picosecond accuracy. Noise and quantization
// are not invertible and are left in place.
TimestampStream invert_clock(const TimestampStream& stream, const ClockModel& clock);

}  // namespace tagcorr
