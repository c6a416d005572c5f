#pragma once

#include <cstdint>
#include <vector>

#include "tagcorr/timebase.hpp"

namespace tagcorr {

struct AdevPoint {
    double tau_s = 0.0;
    double adev = 0.0;
    std::uint64_t n_samples = 0;  // second differences entering the estimate
};

struct AdevCurve {
    std::vector<AdevPoint> points;       // tau strictly increasing
    std::vector<std::uint64_t> omitted_m;  // requested m with too few samples
};

// Overlapping Allan deviation of a phase-difference series:
//   sigma_y^2(m tau0) = sum_i (x[i+2m] - 2 x[i+m] + x[i])^2
//                       / (2 m^2 tau0^2 (N - 2m)).
// m_values empty selects the octave ladder 1, 2, 4, ... while N - 2m >= 1.
// m with N - 2m < 1 are skipped and reported in omitted_m.
AdevCurve overlapping_adev(const PhaseSeries& p,
                           const std::vector<std::uint64_t>& m_values = {});

// Least squares of x(t) = c0 + y0 t + (D/2) t^2 over t_i = i tau0.
struct FreqDriftFit {
    double c0_s = 0.0;
    double y0 = 0.0;            // dimensionless
    double drift_per_s = 0.0;   // D
    double y0_stderr = 0.0;
    double drift_stderr = 0.0;
    double residual_rms_s = 0.0;
};

FreqDriftFit fit_frequency_drift(const PhaseSeries& p);

struct TuningStep {
    double gate_time_s = 0.0;
    double measured_y = 0.0;
    double applied_correction = 0.0;
};

struct TuningResult {
    std::vector<TuningStep> steps;
    double final_residual_y = 0.0;  // last measured fractional frequency
    bool converged = false;
};

// Digital tuning loop: each step compares the free clock's phase against the
// reference over one gate (both phase samples carry the clocks' white
// jitter), applies correction = -round(measured_y / resolution) * resolution
// to the free clock's frequency word, and stops once |measured_y| <
// resolution. Drift D is left untouched; digital tuning sets frequency only.
std::pair<ClockModel, TuningResult> discipline(const ClockModel& free_clock,
                                               const ClockModel& reference,
                                               double gate_time_s,
                                               double tuning_resolution,
                                               int max_steps,
                                               std::uint64_t seed);

// Phase difference (free minus reference, in seconds) sampled on a uniform
// grid of n points spaced tau0 apart, each sample carrying both clocks'
// white phase jitter. Feeds overlapping_adev and fit_frequency_drift.
PhaseSeries sample_phase_series(const ClockModel& free_clock,
                                const ClockModel& reference,
                                double tau0_s,
                                std::size_t n,
                                std::uint64_t seed);

}  // namespace tagcorr
