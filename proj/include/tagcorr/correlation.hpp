#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tagcorr/timebase.hpp"

namespace tagcorr {

// Binned counts of signal-minus-herald time differences around a candidate
// offset. Bin k covers [window_lo + k*bin_width, window_lo + (k+1)*bin_width)
// with window_lo = center_offset - span/2.
struct CorrelationHistogram {
    std::int64_t center_offset_ps = 0;
    std::int64_t bin_width_ps = 1;
    std::int64_t span_ps = 0;
    std::uint64_t acq_duration_ps = 0;
    std::uint64_t n_a = 0;
    std::uint64_t n_b = 0;
    std::vector<std::uint64_t> counts;

    std::int64_t window_lo_ps() const { return center_offset_ps - span_ps / 2; }
    double bin_center_ps(std::size_t k) const {
        return static_cast<double>(window_lo_ps()) +
               (static_cast<double>(k) + 0.5) * static_cast<double>(bin_width_ps);
    }
};

struct G2Point {
    double tau_ps = 0.0;
    double g2 = 0.0;
};

// Gaussian-plus-background fit of a coincidence peak. center is absolute
// (B minus A delay); fwhm = 2 sqrt(2 ln 2) sigma.
struct PeakFit {
    double center_ps = 0.0;
    double fwhm_ps = 0.0;
    double amplitude = 0.0;       // counts at peak above background
    double background = 0.0;      // counts per bin
    double residual_rms = 0.0;    // counts
    bool converged = false;
};

struct CoarseSearchParams {
    std::int64_t coarse_bin_ps = 10'000;          // 10 ns
    std::int64_t search_range_ps = 1'000'000'000; // +/- 1 ms
    // Number of coarse bins of data cross-correlated. 0 picks a window
    // automatically: at least 64x the searched lag range, clamped to
    // [2^16, 2^21] bins and to the available span.
    std::size_t max_window_bins = 0;
    double significance_threshold = 3.0;
};

struct CoarseOffset {
    std::int64_t offset_ps = 0;
    double significance = 0.0;  // sigma-equivalent, corrected for the number of lags searched
};

// Raised when no coincidence peak stands out of the accidental background.
// Carries the best candidate anyway.
class NoSignificantOffset : public std::runtime_error {
public:
    NoSignificantOffset(std::int64_t candidate_ps, double significance);
    std::int64_t candidate_ps;
    double significance;
};

class NoPeak : public std::runtime_error {
public:
    explicit NoPeak(double background);
    double background;
};

// FFT cross-correlation of coarsely binned streams; returns the lag (at
// coarse-bin granularity) with the most significant coincidence excess.
// Significance is the sigma equivalent of the Poisson tail probability of the
// peak bin given the estimated accidental level, Bonferroni-corrected for the
// number of lags searched; below the threshold this throws
// NoSignificantOffset.
CoarseOffset coarse_offset_search(const TimestampStream& a,
                                  const TimestampStream& b,
                                  const CoarseSearchParams& params = {});

// Exact coincidence histogram counts[k] = #{(i,j) : b_j - a_i - center in
// bin k}, computed with a two-pointer sliding window in
// O(n_a + n_b + matches). span must be an exact multiple of bin_width;
// span/bin_width is capped at 1e7 bins. threads > 1 partitions stream A into
// contiguous chunks whose per-chunk histograms add up to exactly the serial
// result (pairs are owned by their A event).
CorrelationHistogram coincidence_histogram(const TimestampStream& a,
                                           const TimestampStream& b,
                                           std::int64_t center_offset_ps,
                                           std::int64_t span_ps,
                                           std::int64_t bin_width_ps,
                                           unsigned threads = 1);

// Same contract as coincidence_histogram, by full pair enumeration. Requires
// n_a * n_b <= 1e8. Kept deliberately independent of the two-pointer path.
CorrelationHistogram brute_force_histogram(const TimestampStream& a,
                                           const TimestampStream& b,
                                           std::int64_t center_offset_ps,
                                           std::int64_t span_ps,
                                           std::int64_t bin_width_ps);

// g2(tau_k) = counts[k] * T / (n_a * n_b * bin_width); 1 for uncorrelated
// streams far from the peak.
std::vector<G2Point> normalize_g2(const CorrelationHistogram& h);

// Gaussian + flat background fit: background from the outer-quartile bins,
// centroid/second-moment initialization, then damped (Levenberg-style)
// Gauss-Newton. Throws NoPeak when no bin clears background + 5*sqrt(background).
PeakFit fit_peak(const CorrelationHistogram& h);

struct DriftSlice {
    double wall_time_s = 0.0;   // slice midpoint on stream A's timescale
    double center_ps = 0.0;     // absolute fitted peak position
    double fwhm_ps = 0.0;
};

// Peak centers per wall-time slice with an ordinary least-squares line:
// slope (ps/s) * 1e-12 is the relative frequency offset estimate.
struct DriftTrack {
    double slice_duration_s = 0.0;
    std::vector<DriftSlice> slices;
    std::vector<std::size_t> failed_slices;  // indices with no usable fit
    double fitted_y = 0.0;                   // dimensionless relative frequency
    double fitted_intercept_ps = 0.0;        // extrapolated center at wall time 0
    double fit_residual_rms_ps = 0.0;

    double slope_ps_per_s() const { return fitted_y * 1e12; }
};

struct TrackParams {
    double slice_duration_s = 1.0;
    std::int64_t bin_width_ps = 5;
    std::int64_t span_ps = 100'000;  // +/- 50 ns fine window
    CoarseSearchParams coarse{};
    unsigned threads = 1;
};

// Slices wall time, runs coarse search + fine histogram + peak fit per slice,
// and fits center vs wall time. Throws if fewer than two slices fit.
DriftTrack track_drift(const TimestampStream& a,
                       const TimestampStream& b,
                       const TrackParams& params = {});

// Removes the fitted relative clock: b' = (b - intercept) / (1 + y), rounded
// to 1 ps.
TimestampStream compensate(const TimestampStream& b, const DriftTrack& track);

// FWHM of the intrinsic Gaussian peak (fwhm0) convolved with the rectangular
// smear |y| * acq_duration that a constant relative frequency offset produces
// over one acquisition. Closed form via erf, solved by bisection.
double predict_broadened_fwhm(double fwhm0_ps, double rel_freq_offset,
                              double acq_duration_s);

namespace detail {

// log P(X >= k) for X ~ Poisson(lambda).
double log_poisson_sf(std::uint64_t k, double lambda);

// Sigma equivalent of an upper-tail log probability; 0 for p >= 0.5.
double z_from_log_p(double log_p);

}  // namespace detail

}  // namespace tagcorr
