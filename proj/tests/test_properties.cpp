#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "tagcorr/clockstats.hpp"
#include "tagcorr/correlation.hpp"
#include "tagcorr/rng.hpp"
#include "tagcorr/simulator.hpp"

using namespace tagcorr;

namespace {

TimestampStream random_stream(Rng& rng, std::size_t max_events,
                              std::uint64_t span_ps) {
    TimestampStream s;
    const std::size_t n =
        1 + static_cast<std::size_t>(rng.uniform01() * (max_events - 1));
    s.events.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        s.events.push_back(static_cast<std::uint64_t>(rng.uniform01() * span_ps));
    std::sort(s.events.begin(), s.events.end());
    return s;
}

}  // namespace

TEST_CASE("two-pointer histogram equals the brute-force oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        TimestampStream a = random_stream(rng, 1000, 1'000'000'000ull);
        TimestampStream b = random_stream(rng, 1000, 1'000'000'000ull);
        const std::int64_t bin = 1 + static_cast<std::int64_t>(rng.uniform01() * 50);
        const std::int64_t n_bins = 7 + static_cast<std::int64_t>(rng.uniform01() * 393);
        const std::int64_t span = bin * n_bins;
        const std::int64_t center =
            static_cast<std::int64_t>((rng.uniform01() - 0.5) * 2'000'000.0);
        CorrelationHistogram fast = coincidence_histogram(a, b, center, span, bin);
        CorrelationHistogram slow = brute_force_histogram(a, b, center, span, bin);
        REQUIRE(fast.counts == slow.counts);
        CHECK(fast.center_offset_ps == slow.center_offset_ps);
        CHECK(fast.span_ps == slow.span_ps);
        CHECK(fast.n_a == slow.n_a);
        CHECK(fast.n_b == slow.n_b);
    }
}

TEST_CASE("partitioned histogramming merges to the serial result") {
    Rng rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        TimestampStream a = random_stream(rng, 20'000, 10'000'000'000ull);
        TimestampStream b = random_stream(rng, 20'000, 10'000'000'000ull);
        if (a.events.empty()) continue;
        const std::int64_t bin = 5;
        const std::int64_t span = 100'000;
        CorrelationHistogram serial = coincidence_histogram(a, b, 0, span, bin, 1);
        for (unsigned threads : {2u, 3u, 8u}) {
            CorrelationHistogram par = coincidence_histogram(a, b, 0, span, bin, threads);
            REQUIRE(par.counts == serial.counts);
        }
    }
}

TEST_CASE("shifting stream B shifts the recovered center and nothing else") {
    ExperimentConfig cfg = preset_a();
    cfg.source.pair_rate_hz = 1e5;
    cfg.source.duration_s = 1.0;
    auto [a, b] = run_experiment(cfg);

    CoarseSearchParams cs;
    cs.search_range_ps = 100'000'000;
    CoarseOffset off0 = coarse_offset_search(a, b, cs);
    PeakFit fit0 = fit_peak(coincidence_histogram(a, b, off0.offset_ps, 100'000, 5));

    Rng rng(404);
    for (int trial = 0; trial < 4; ++trial) {
        const std::int64_t s =
            static_cast<std::int64_t>(rng.uniform01() * 20'000'000.0) - 5'000'000;
        TimestampStream shifted = b;
        for (auto& t : shifted.events)
            t = static_cast<std::uint64_t>(static_cast<std::int64_t>(t) + s);
        CoarseOffset off = coarse_offset_search(a, shifted, cs);
        PeakFit fit = fit_peak(
            coincidence_histogram(a, shifted, off.offset_ps, 100'000, 5));
        const double center0 = fit0.center_ps;  // already absolute
        const double center1 = fit.center_ps;
        CHECK(std::abs(center1 - center0 - static_cast<double>(s)) <= 5.0);
        CHECK(fit.fwhm_ps == doctest::Approx(fit0.fwhm_ps).epsilon(0.02));
    }
}

TEST_CASE("predicted broadening is monotone in offset and duration") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double fwhm0 = 50.0 + rng.uniform01() * 500.0;
        const double T = 0.5 + rng.uniform01() * 10.0;
        double prev = 0.0;
        for (double y = 0.0; y <= 2e-9; y += 1e-10) {
            const double f = predict_broadened_fwhm(fwhm0, y, T);
            CHECK(f >= prev - 1e-9);
            CHECK(f >= fwhm0 - 1e-9);
            prev = f;
        }
        const double y = 1e-10 + rng.uniform01() * 1e-9;
        prev = 0.0;
        for (double t = 0.5; t <= 8.0; t += 0.5) {
            const double f = predict_broadened_fwhm(fwhm0, y, t);
            CHECK(f >= prev - 1e-9);
            prev = f;
        }
    }
}

TEST_CASE("compensation never widens a well-fitted track") {
    Rng rng(515);
    for (int trial = 0; trial < 3; ++trial) {
        ExperimentConfig cfg = preset_a();
        cfg.source.pair_rate_hz = 1e5;
        cfg.source.duration_s = 3.0;
        cfg.seed = 600 + trial;
        cfg.clock_b.frac_freq_offset = (0.5 + rng.uniform01() * 1.5) * 1e-9;
        auto [a, b] = run_experiment(cfg);

        TrackParams tp;
        tp.slice_duration_s = 0.5;
        tp.coarse.search_range_ps = 100'000'000;
        DriftTrack track = track_drift(a, b, tp);
        if (track.fit_residual_rms_ps >= static_cast<double>(tp.bin_width_ps))
            continue;  // the guarantee is conditioned on a good fit

        CoarseSearchParams cs;
        cs.search_range_ps = 100'000'000;
        CoarseOffset off0 = coarse_offset_search(a, b, cs);
        PeakFit before =
            fit_peak(coincidence_histogram(a, b, off0.offset_ps, 100'000, 5));

        TimestampStream bc = compensate(b, track);
        CoarseOffset off1 = coarse_offset_search(a, bc, cs);
        PeakFit after =
            fit_peak(coincidence_histogram(a, bc, off1.offset_ps, 100'000, 5));
        CHECK(after.fwhm_ps <= before.fwhm_ps * 1.01 + 1.0);
    }
}

TEST_CASE("adev estimator is homogeneous in the phase amplitude") {
    Rng rng(31);
    PhaseSeries p;
    p.tau0_s = 0.25;
    for (int i = 0; i < 500; ++i) p.x_s.push_back(rng.normal(2e-9));
    AdevCurve base = overlapping_adev(p);
    for (double k : {-2.5, 3.75}) {
        PhaseSeries q = p;
        for (double& x : q.x_s) x *= k;
        AdevCurve scaled = overlapping_adev(q);
        REQUIRE(scaled.points.size() == base.points.size());
        for (std::size_t i = 0; i < base.points.size(); ++i) {
            CHECK(scaled.points[i].adev ==
                  doctest::Approx(std::abs(k) * base.points[i].adev).epsilon(1e-12));
            CHECK(scaled.points[i].n_samples == base.points[i].n_samples);
        }
    }
}

TEST_CASE("noiseless disciplining never increases the frequency magnitude") {
    ClockModel ref;
    Rng rng(88);
    for (int trial = 0; trial < 40; ++trial) {
        ClockModel free;
        const double mag = std::pow(10.0, -12.0 + 4.0 * rng.uniform01());
        free.frac_freq_offset = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * mag;
        const double res = std::pow(10.0, -13.0 + 2.0 * rng.uniform01());
        auto [tuned, result] = discipline(free, ref, 5.0, res, 10, trial);
        CHECK(std::abs(tuned.frac_freq_offset) <=
              std::abs(free.frac_freq_offset) * (1.0 + 1e-12) + 1e-18);
    }
}

TEST_CASE("histogram counts are invariant under a common time translation") {
    Rng rng(616);
    TimestampStream a = random_stream(rng, 2000, 1'000'000'000ull);
    TimestampStream b = random_stream(rng, 2000, 1'000'000'000ull);
    CorrelationHistogram h0 = coincidence_histogram(a, b, 0, 10'000, 10);
    const std::uint64_t shift = 123'456'789ull;
    for (auto& t : a.events) t += shift;
    for (auto& t : b.events) t += shift;
    CorrelationHistogram h1 = coincidence_histogram(a, b, 0, 10'000, 10);
    CHECK(h0.counts == h1.counts);
}
