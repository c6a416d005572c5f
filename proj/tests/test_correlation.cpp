#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "tagcorr/correlation.hpp"
#include "tagcorr/rng.hpp"
#include "tagcorr/simulator.hpp"

using namespace tagcorr;

namespace {

TimestampStream make_stream(std::vector<std::uint64_t> events,
                            std::uint64_t duration_ps = 0) {
    TimestampStream s;
    s.events = std::move(events);
    s.duration_ps = duration_ps;
    return s;
}

TimestampStream poisson_stream(double rate_hz, double duration_s,
                               std::uint64_t seed) {
    Rng rng(seed);
    TimestampStream s;
    double cur = 0.0;
    const double end = duration_s * 1e12;
    while (true) {
        cur += rng.exponential(rate_hz) * 1e12;
        if (cur >= end) break;
        s.events.push_back(static_cast<std::uint64_t>(cur));
    }
    s.duration_ps = static_cast<std::uint64_t>(end);
    return s;
}

}  // namespace

TEST_CASE("self-pairs land in the central bin only") {
    TimestampStream s = make_stream({0, 100, 200});
    CorrelationHistogram h = coincidence_histogram(s, s, 0, 100, 5);
    REQUIRE(h.counts.size() == 20);
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
        total += h.counts[k];
        if (k == 10)
            CHECK(h.counts[k] == 3);
        else
            CHECK(h.counts[k] == 0);
    }
    CHECK(total == 3);
    CHECK(h.bin_center_ps(10) == doctest::Approx(2.5));
}

TEST_CASE("brute force trivia") {
    // empty streams are rejected the same way on both paths
    TimestampStream empty = make_stream({});
    TimestampStream b = make_stream({50});
    CHECK_THROWS_AS(brute_force_histogram(empty, b, 0, 100, 5), std::invalid_argument);
    CHECK_THROWS_AS(coincidence_histogram(empty, b, 0, 100, 5), std::invalid_argument);

    TimestampStream a1 = make_stream({1000});
    TimestampStream b1 = make_stream({1010});
    CorrelationHistogram h1 = brute_force_histogram(a1, b1, 0, 100, 5);
    // tau = +10 falls in bin (10+50)/5 = 12
    for (std::size_t k = 0; k < h1.counts.size(); ++k)
        CHECK(h1.counts[k] == (k == 12 ? 1u : 0u));
}

TEST_CASE("histogram invariants hold") {
    TimestampStream a = poisson_stream(1e5, 0.01, 1);
    TimestampStream b = poisson_stream(1e5, 0.01, 2);
    CorrelationHistogram h = coincidence_histogram(a, b, 0, 10'000, 50);
    CHECK(h.span_ps == static_cast<std::int64_t>(h.counts.size()) * h.bin_width_ps);
    std::uint64_t total = 0;
    for (std::uint64_t c : h.counts) total += c;
    CHECK(total <= h.n_a * h.n_b);
}

TEST_CASE("binning preconditions are enforced") {
    TimestampStream a = make_stream({0, 10});
    TimestampStream unsorted = make_stream({10, 0});
    unsorted.events = {10, 0};
    CHECK_THROWS_AS(coincidence_histogram(a, unsorted, 0, 100, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(coincidence_histogram(a, a, 0, 101, 5), std::invalid_argument);
    CHECK_THROWS_AS(coincidence_histogram(a, a, 0, 0, 5), std::invalid_argument);
    // bin count cap of 1e7
    CHECK_THROWS_AS(coincidence_histogram(a, a, 0, 20'000'002, 2),
                    std::invalid_argument);
}

TEST_CASE("brute force size cap") {
    std::vector<std::uint64_t> big(10'001);
    for (std::size_t i = 0; i < big.size(); ++i) big[i] = i * 1000;
    TimestampStream a = make_stream(big);
    CHECK_THROWS_AS(brute_force_histogram(a, a, 0, 100, 5), std::invalid_argument);
}

TEST_CASE("g2 of independent streams averages to one") {
    TimestampStream a = poisson_stream(1e5, 5.0, 11);
    TimestampStream b = poisson_stream(1e5, 5.0, 12);
    CorrelationHistogram h = coincidence_histogram(a, b, 0, 100'000, 500);
    std::vector<G2Point> g2 = normalize_g2(h);
    double mean = 0.0;
    for (const G2Point& p : g2) mean += p.g2;
    mean /= static_cast<double>(g2.size());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("g2 scales linearly with acquisition duration") {
    TimestampStream a = make_stream({0, 1000}, 1000);
    CorrelationHistogram h = coincidence_histogram(a, a, 0, 20, 5);
    std::vector<G2Point> g1 = normalize_g2(h);
    h.acq_duration_ps *= 2;
    std::vector<G2Point> g2 = normalize_g2(h);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t k = 0; k < g1.size(); ++k)
        CHECK(g2[k].g2 == doctest::Approx(2.0 * g1[k].g2));
}

TEST_CASE("normalize_g2 rejects zero rates") {
    CorrelationHistogram h;
    h.bin_width_ps = 5;
    h.span_ps = 20;
    h.counts = {0, 0, 0, 0};
    CHECK_THROWS_AS(normalize_g2(h), std::invalid_argument);
}

TEST_CASE("fit recovers an exact Gaussian") {
    CorrelationHistogram h;
    h.center_offset_ps = 0;
    h.bin_width_ps = 10;
    h.span_ps = 2000;
    h.acq_duration_ps = 1'000'000;
    h.n_a = h.n_b = 1000;
    const double A = 1000.0, mu = 0.0, sigma = 100.0, B = 10.0;
    h.counts.resize(200);
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
        const double tau = h.bin_center_ps(k);
        const double v = B + A * std::exp(-(tau - mu) * (tau - mu) / (2 * sigma * sigma));
        h.counts[k] = static_cast<std::uint64_t>(std::llround(v));
    }
    PeakFit fit = fit_peak(h);
    CHECK(fit.converged);
    CHECK(std::abs(fit.center_ps - mu) <= 1.0);
    CHECK(fit.fwhm_ps == doctest::Approx(235.4820045).epsilon(0.01));
    CHECK(fit.amplitude == doctest::Approx(A).epsilon(0.02));
    CHECK(fit.background == doctest::Approx(B).epsilon(0.2));
}

TEST_CASE("flat histogram raises no-peak") {
    CorrelationHistogram h;
    h.bin_width_ps = 10;
    h.span_ps = 1000;
    h.counts.assign(100, 50);
    h.n_a = h.n_b = 100;
    h.acq_duration_ps = 1000;
    CHECK_THROWS_AS(fit_peak(h), NoPeak);
    try {
        fit_peak(h);
    } catch (const NoPeak& e) {
        CHECK(e.background == doctest::Approx(50.0));
    }
}

TEST_CASE("fit is stable under Poisson noise") {
    const double A = 1000.0, sigma = 100.0, B = 10.0;
    int bad = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        CorrelationHistogram h;
        h.bin_width_ps = 10;
        h.span_ps = 2000;
        h.acq_duration_ps = 1'000'000;
        h.n_a = h.n_b = 1000;
        h.counts.resize(200);
        for (std::size_t k = 0; k < h.counts.size(); ++k) {
            const double tau = h.bin_center_ps(k);
            const double lam = B + A * std::exp(-tau * tau / (2 * sigma * sigma));
            std::uint64_t x = 0;
            if (lam > 50.0) {
                const long long v = std::llround(lam + std::sqrt(lam) * rng.normal());
                x = v > 0 ? static_cast<std::uint64_t>(v) : 0;
            } else {
                double u = rng.uniform01();
                double p = std::exp(-lam), cdf = p;
                while (u > cdf && x < 100000) {
                    ++x;
                    p *= lam / static_cast<double>(x);
                    cdf += p;
                }
            }
            h.counts[k] = x;
        }
        PeakFit fit = fit_peak(h);
        if (std::abs(fit.fwhm_ps - 235.482) > 0.05 * 235.482) ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("coarse search finds a shifted copy") {
    Rng rng(31);
    std::vector<std::uint64_t> base;
    std::uint64_t cur = 0;
    for (int i = 0; i < 20'000; ++i) {
        cur += 1 + static_cast<std::uint64_t>(rng.exponential(2e-7));
        base.push_back(cur);
    }
    TimestampStream a = make_stream(base);
    std::vector<std::uint64_t> shifted(base);
    for (auto& t : shifted) t += 1'000'000;
    TimestampStream b = make_stream(shifted);

    CoarseSearchParams params;
    params.coarse_bin_ps = 10'000;
    params.search_range_ps = 10'000'000;
    CoarseOffset off = coarse_offset_search(a, b, params);
    CHECK(off.offset_ps >= 990'000);
    CHECK(off.offset_ps <= 1'010'000);
    CHECK(off.significance >= 5.0);
}

TEST_CASE("coarse search rejects independent Poisson streams") {
    TimestampStream a = poisson_stream(1e6, 1.0, 7);
    TimestampStream b = poisson_stream(1e6, 1.0, 8);
    CoarseSearchParams params;
    CHECK_THROWS_AS(coarse_offset_search(a, b, params), NoSignificantOffset);
    try {
        coarse_offset_search(a, b, params);
    } catch (const NoSignificantOffset& e) {
        CHECK(e.significance < params.significance_threshold);
    }
}

TEST_CASE("coarse search validates range against stream span") {
    TimestampStream a = poisson_stream(1e5, 0.001, 3);
    TimestampStream b = poisson_stream(1e5, 0.001, 4);
    CoarseSearchParams params;  // default range 1 ms exceeds the 1 ms span edge
    params.search_range_ps = 2'000'000'000;
    CHECK_THROWS_AS(coarse_offset_search(a, b, params), std::invalid_argument);
}

TEST_CASE("simulated fiber delay is recovered within one coarse bin") {
    ExperimentConfig cfg = preset_a();
    cfg.source.pair_rate_hz = 1e5;
    cfg.source.duration_s = 1.0;
    auto [a, b] = run_experiment(cfg);
    CoarseSearchParams params;
    params.search_range_ps = 100'000'000;  // 100 us
    CoarseOffset off = coarse_offset_search(a, b, params);
    CHECK(std::llabs(off.offset_ps - 48'970'000) <= params.coarse_bin_ps);
    CHECK(off.significance >= 5.0);

    CorrelationHistogram h =
        coincidence_histogram(a, b, off.offset_ps, 100'000, 5);
    PeakFit fit = fit_peak(h);
    // combined jitter: two 50 ps detectors and the 10 ps source
    const double expect = 2.3548200450 * std::sqrt(50.0 * 50 + 50.0 * 50 + 10.0 * 10);
    CHECK(fit.fwhm_ps == doctest::Approx(expect).epsilon(0.04));
    CHECK(std::abs(fit.center_ps - 48'970'000.0) < 50.0);
}

TEST_CASE("track_drift recovers a pure frequency offset") {
    ExperimentConfig cfg = preset_a();
    cfg.source.pair_rate_hz = 1e5;
    cfg.source.duration_s = 4.0;
    cfg.clock_b.frac_freq_offset = 1e-9;
    auto [a, b] = run_experiment(cfg);
    TrackParams params;
    params.slice_duration_s = 0.5;
    params.coarse.search_range_ps = 100'000'000;
    DriftTrack track = track_drift(a, b, params);
    CHECK(track.slices.size() == 8);
    CHECK(track.failed_slices.empty());
    CHECK(track.slope_ps_per_s() == doctest::Approx(1000.0).epsilon(0.01));
    CHECK(track.fitted_y == doctest::Approx(1e-9).epsilon(0.01));
    for (std::size_t i = 1; i < track.slices.size(); ++i)
        CHECK(track.slices[i].wall_time_s > track.slices[i - 1].wall_time_s);
}

TEST_CASE("identical clocks track to zero slope at desk scale") {
    ExperimentConfig cfg = preset_a();
    cfg.source.pair_rate_hz = 1e5;
    cfg.source.duration_s = 4.0;
    auto [a, b] = run_experiment(cfg);
    TrackParams params;
    params.slice_duration_s = 1.0;
    params.coarse.search_range_ps = 100'000'000;
    DriftTrack track = track_drift(a, b, params);
    CHECK(std::abs(track.slope_ps_per_s()) < 0.1);
}

TEST_CASE("quadratic drift shows up as residual curvature") {
    ExperimentConfig cfg = preset_a();
    cfg.source.pair_rate_hz = 2e4;
    cfg.source.duration_s = 30.0;
    cfg.clock_b.frac_freq_offset = 1e-9;
    TrackParams params;
    params.slice_duration_s = 1.0;
    params.coarse.search_range_ps = 100'000'000;

    auto [a1, b1] = run_experiment(cfg);
    DriftTrack linear = track_drift(a1, b1, params);

    // D = 1e-12 bows the center track by ~33 ps rms over 30 s, well above the
    // few-ps scatter the rectangle-smeared slice fits carry
    cfg.clock_b.freq_drift_per_s = 1e-12;
    auto [a2, b2] = run_experiment(cfg);
    DriftTrack curved = track_drift(a2, b2, params);

    CHECK(curved.fit_residual_rms_ps > 2.0 * linear.fit_residual_rms_ps);
    CHECK(curved.fit_residual_rms_ps > 2.0);
}

TEST_CASE("track_drift needs at least two slices") {
    TimestampStream a = poisson_stream(1e5, 0.5, 1);
    TrackParams params;
    params.slice_duration_s = 1.0;
    CHECK_THROWS_AS(track_drift(a, a, params), std::invalid_argument);
}

TEST_CASE("zero-drift compensation is the identity") {
    TimestampStream b = make_stream({0, 1000, 2000}, 5000);
    DriftTrack track;
    track.fitted_y = 0.0;
    track.fitted_intercept_ps = 0.0;
    track.slices.resize(2);
    TimestampStream out = compensate(b, track);
    CHECK(out.events == b.events);
    CHECK(out.duration_ps == b.duration_ps);
}

TEST_CASE("compensation restores the intrinsic peak width") {
    ExperimentConfig cfg = preset_a();
    cfg.source.pair_rate_hz = 1e5;
    cfg.source.duration_s = 4.0;
    cfg.clock_b.frac_freq_offset = 1e-9;
    auto [a, b] = run_experiment(cfg);

    TrackParams tp;
    tp.slice_duration_s = 0.5;
    tp.coarse.search_range_ps = 100'000'000;
    DriftTrack track = track_drift(a, b, tp);

    CoarseSearchParams cs;
    cs.search_range_ps = 100'000'000;
    CoarseOffset off0 = coarse_offset_search(a, b, cs);
    PeakFit before = fit_peak(coincidence_histogram(a, b, off0.offset_ps, 100'000, 5));

    TimestampStream bc = compensate(b, track);
    CoarseOffset off1 = coarse_offset_search(a, bc, cs);
    PeakFit after = fit_peak(coincidence_histogram(a, bc, off1.offset_ps, 100'000, 5));

    // 1e-9 over 4 s smears the peak by 4 ns; compensation recovers the
    // detector-limited width
    const double intrinsic = 2.3548200450 * std::sqrt(50.0 * 50 + 50.0 * 50 + 10.0 * 10);
    CHECK(before.fwhm_ps > 5.0 * intrinsic);
    CHECK(after.fwhm_ps == doctest::Approx(intrinsic).epsilon(0.1));
    CHECK(after.fwhm_ps < before.fwhm_ps);

    // closed loop: the compensated pair tracks to zero slope. The slope
    // estimate carries ~0.3 ps/s of center noise at this record length, so
    // gate at 1 ps/s here (one part in a thousand of the injected slope).
    DriftTrack re = track_drift(a, bc, tp);
    CHECK(std::abs(re.slope_ps_per_s()) < 1.0);
}

TEST_CASE("predict_broadened_fwhm frozen values") {
    // zero offset: exact passthrough
    CHECK(predict_broadened_fwhm(168.0, 0.0, 100.0) == 168.0);
    // rectangle-dominated: w = 1e5 ps from y = 2e-8 over 5 s
    CHECK(predict_broadened_fwhm(10.0, 2e-8, 5.0) ==
          doctest::Approx(1e5).epsilon(0.01));
    // reference values from a high-precision convolution of the closed form
    CHECK(predict_broadened_fwhm(200.0, 5.65e-12, 5.0) ==
          doctest::Approx(200.92374914630259).epsilon(1e-9));
    CHECK(predict_broadened_fwhm(235.48200450309493, 6e-11, 5.0) ==
          doctest::Approx(333.25778763003185).epsilon(1e-9));
}

TEST_CASE("significance helpers match reference values") {
    struct Case {
        double k, lam, expect;
    };
    const Case cases[] = {
        {5, 1.0, -5.6103339828971544},     {20, 3.0, -23.210444234617719},
        {100, 50.0, -21.862679706410286},  {3, 10.0, -0.0027732375865730182},
        {1000, 900.0, -7.5057699942338924}, {10, 1e-3, -84.182874450362306},
    };
    for (const Case& c : cases)
        CHECK(detail::log_poisson_sf(c.k, c.lam) ==
              doctest::Approx(c.expect).epsilon(1e-9));

    CHECK(detail::z_from_log_p(-1.0) ==
          doctest::Approx(0.33747496376420246).epsilon(1e-9));
    CHECK(detail::z_from_log_p(-10.0) ==
          doctest::Approx(3.9139462405318931).epsilon(1e-9));
    CHECK(detail::z_from_log_p(-100.0) ==
          doctest::Approx(13.888476033003886).epsilon(1e-9));
    CHECK(detail::z_from_log_p(-1000.0) ==
          doctest::Approx(44.615747731969403).epsilon(1e-9));
    CHECK(std::abs(detail::z_from_log_p(std::log(0.5))) < 1e-9);
}
