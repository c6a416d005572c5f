#include "tagcorr/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include <fftw3.h>

namespace tagcorr {

namespace {

constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)
constexpr std::int64_t kMaxHistogramBins = 10'000'000;

std::int64_t floor_div(std::int64_t n, std::int64_t d) {
    std::int64_t q = n / d;
    std::int64_t r = n % d;
    if (r != 0 && ((r < 0) != (d < 0))) --q;
    return q;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void check_stream(const TimestampStream& s, const char* fn, const char* which) {
    if (s.events.empty())
        throw std::invalid_argument(std::string(fn) + ": stream " + which + " is empty");
    s.validate();
}

void check_binning(std::int64_t span_ps, std::int64_t bin_width_ps, const char* fn) {
    if (bin_width_ps < 1)
        throw std::invalid_argument(std::string(fn) + ": bin_width must be >= 1 ps");
    if (span_ps < bin_width_ps)
        throw std::invalid_argument(std::string(fn) + ": span must cover at least one bin");
    if (span_ps % bin_width_ps != 0)
        throw std::invalid_argument(std::string(fn) + ": span must be a multiple of bin_width");
    if (span_ps / bin_width_ps > kMaxHistogramBins)
        throw std::invalid_argument(std::string(fn) + ": more than 1e7 bins requested");
}

std::uint64_t overlap_duration_ps(const TimestampStream& a, const TimestampStream& b) {
    std::uint64_t da = a.effective_duration_ps();
    std::uint64_t db = b.effective_duration_ps();
    if (da == 0) return db;
    if (db == 0) return da;
    return std::min(da, db);
}

// Upper-tail log probability of a standard normal.
double log_normal_sf(double z) {
    if (z < 37.0)
        return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
    double z2 = z * z;
    return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

}  // namespace

namespace detail {

double log_poisson_sf(std::uint64_t k, double lambda) {
    if (k == 0) return 0.0;
    if (!(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
    double kd = static_cast<double>(k);
    if (kd <= lambda) {
        // Bulk or lower tail: the complement is the small quantity. Sum the
        // PMF below k directly; at most ~lambda + few sqrt(lambda) terms
        // matter and lambda is modest wherever this branch is hit.
        if (lambda > 1e6) return 0.0;  // P(X >= k) ~ 1/2 or more
        double log_pmf = -lambda;  // j = 0
        double cdf = std::exp(log_pmf);
        for (std::uint64_t j = 1; j < k; ++j) {
            log_pmf += std::log(lambda) - std::log(static_cast<double>(j));
            cdf += std::exp(log_pmf);
        }
        return std::log1p(-std::min(cdf, 1.0 - 1e-300));
    }
    // Upper tail via the lower incomplete gamma series:
    //   P(X >= k) = P(k, lambda) = lambda^k e^-lambda / Gamma(k+1) * S,
    //   S = sum_{n>=0} lambda^n / ((k+1)(k+2)...(k+n)),  converges for lambda < k.
    double term = 1.0;
    double sum = 1.0;
    for (int n = 1; n < 10000; ++n) {
        term *= lambda / (kd + n);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0) + std::log(sum);
}

double z_from_log_p(double log_p) {
    if (!(log_p < std::log(0.5))) return 0.0;
    double z = std::sqrt(std::max(2.0 * (-log_p - 0.5 * std::log(2.0 * std::numbers::pi)), 1e-6));
    z = std::max(z, 0.05);
    for (int it = 0; it < 80; ++it) {
        double lq = log_normal_sf(z);
        double lphi = -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
        double step = (lq - log_p) * std::exp(lq - lphi);
        double limit = std::max(1.0, 0.5 * z);
        step = std::clamp(step, -limit, limit);
        z += step;
        if (z <= 0.0) z = 1e-3;
        if (std::abs(step) < 1e-10 * std::max(1.0, z)) break;
    }
    return z;
}

}  // namespace detail

NoSignificantOffset::NoSignificantOffset(std::int64_t cand, double sig)
    : std::runtime_error("coarse_offset_search: no significant coincidence peak "
                         "(best candidate " + std::to_string(cand) + " ps at " +
                         std::to_string(sig) + " sigma)"),
      candidate_ps(cand),
      significance(sig) {}

NoPeak::NoPeak(double bg)
    : std::runtime_error("fit_peak: no bin stands above the accidental background (" +
                         std::to_string(bg) + " per bin)"),
      background(bg) {}

CoarseOffset coarse_offset_search(const TimestampStream& a,
                                  const TimestampStream& b,
                                  const CoarseSearchParams& params) {
    check_stream(a, "coarse_offset_search", "a");
    check_stream(b, "coarse_offset_search", "b");
    if (params.coarse_bin_ps < 1)
        throw std::invalid_argument("coarse_offset_search: coarse_bin must be >= 1 ps");
    if (params.search_range_ps < params.coarse_bin_ps)
        throw std::invalid_argument("coarse_offset_search: search_range must cover at least one bin");
    const std::uint64_t min_dur = overlap_duration_ps(a, b);
    if (static_cast<std::uint64_t>(params.search_range_ps) > min_dur)
        throw std::invalid_argument(
            "coarse_offset_search: search_range exceeds the stream duration");

    const std::int64_t bin = params.coarse_bin_ps;
    const std::int64_t range_bins =
        (params.search_range_ps + bin - 1) / bin;

    std::size_t window = params.max_window_bins;
    if (window == 0) {
        window = std::clamp<std::size_t>(64 * static_cast<std::size_t>(range_bins),
                                         std::size_t{1} << 16, std::size_t{1} << 21);
    }
    const std::int64_t a0 = static_cast<std::int64_t>(a.events.front());
    const std::int64_t a_span = static_cast<std::int64_t>(a.events.back()) - a0;
    window = std::min<std::size_t>(window, static_cast<std::size_t>(a_span / bin) + 1);
    window = std::max<std::size_t>(window, 1);

    const std::size_t b_len = window + 2 * static_cast<std::size_t>(range_bins);
    const std::int64_t b_base = a0 - range_bins * bin;

    const std::size_t n = next_pow2(b_len + 1);
    double* fa = fftw_alloc_real(n);
    double* fb = fftw_alloc_real(n);
    fftw_complex* sa = fftw_alloc_complex(n / 2 + 1);
    fftw_complex* sb = fftw_alloc_complex(n / 2 + 1);
    if (!fa || !fb || !sa || !sb) {
        fftw_free(fa); fftw_free(fb); fftw_free(sa); fftw_free(sb);
        throw std::bad_alloc();
    }
    std::memset(fa, 0, n * sizeof(double));
    std::memset(fb, 0, n * sizeof(double));

    std::uint64_t n_a_win = 0;
    for (std::uint64_t t : a.events) {
        std::int64_t k = (static_cast<std::int64_t>(t) - a0) / bin;
        if (k < 0) continue;
        if (k >= static_cast<std::int64_t>(window)) break;
        fa[k] += 1.0;
        ++n_a_win;
    }
    std::uint64_t n_b_win = 0;
    for (std::uint64_t t : b.events) {
        std::int64_t k = floor_div(static_cast<std::int64_t>(t) - b_base, bin);
        if (k < 0) continue;
        if (k >= static_cast<std::int64_t>(b_len)) break;
        fb[k] += 1.0;
        ++n_b_win;
    }

    fftw_plan pa = fftw_plan_dft_r2c_1d(static_cast<int>(n), fa, sa, FFTW_ESTIMATE);
    fftw_plan pb = fftw_plan_dft_r2c_1d(static_cast<int>(n), fb, sb, FFTW_ESTIMATE);
    fftw_execute(pa);
    fftw_execute(pb);
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);

    // conj(A) * B, correlation r[m] = sum_k a[k] b[k+m] after the inverse.
    for (std::size_t i = 0; i <= n / 2; ++i) {
        double re = sa[i][0] * sb[i][0] + sa[i][1] * sb[i][1];
        double im = sa[i][0] * sb[i][1] - sa[i][1] * sb[i][0];
        sa[i][0] = re / static_cast<double>(n);
        sa[i][1] = im / static_cast<double>(n);
    }
    fftw_plan pc = fftw_plan_dft_c2r_1d(static_cast<int>(n), sa, fb, FFTW_ESTIMATE);
    fftw_execute(pc);
    fftw_destroy_plan(pc);

    const std::size_t n_lags = 2 * static_cast<std::size_t>(range_bins) + 1;
    std::size_t best_m = 0;
    double best_v = -1.0;
    double total = 0.0;
    for (std::size_t m = 0; m < n_lags; ++m) {
        double v = std::max(fb[m], 0.0);
        total += v;
        if (v > best_v) {
            best_v = v;
            best_m = m;
        }
    }

    double excl = 0.0;
    std::size_t n_excl = 0;
    for (std::size_t m = best_m >= 2 ? best_m - 2 : 0;
         m < std::min(best_m + 3, n_lags); ++m) {
        excl += std::max(fb[m], 0.0);
        ++n_excl;
    }
    double lambda = 0.0;
    if (n_lags > n_excl)
        lambda = (total - excl) / static_cast<double>(n_lags - n_excl);
    // Floor at the analytic accidental level so a lone stray coincidence in a
    // nearly empty window cannot masquerade as a detection.
    double analytic = static_cast<double>(n_a_win) * static_cast<double>(n_b_win) /
                      static_cast<double>(b_len);
    lambda = std::max({lambda, analytic, 1e-12});

    auto peak_count = static_cast<std::uint64_t>(std::llround(best_v));
    double log_p = detail::log_poisson_sf(peak_count, lambda) +
                   std::log(static_cast<double>(n_lags));
    log_p = std::min(log_p, 0.0);
    double z = detail::z_from_log_p(log_p);

    fftw_free(fa); fftw_free(fb); fftw_free(sa); fftw_free(sb);

    CoarseOffset result;
    result.offset_ps = (static_cast<std::int64_t>(best_m) - range_bins) * bin;
    result.significance = z;
    if (z < params.significance_threshold)
        throw NoSignificantOffset(result.offset_ps, z);
    return result;
}

namespace {

void histogram_chunk(const std::vector<std::uint64_t>& av,
                     const std::vector<std::uint64_t>& bv,
                     std::size_t ia0, std::size_t ia1,
                     std::int64_t window_lo, std::int64_t window_hi,
                     std::int64_t bin_width,
                     std::vector<std::uint64_t>& counts) {
    if (ia0 >= ia1) return;
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = ia0; i < ia1; ++i) {
        const std::int64_t ai = static_cast<std::int64_t>(av[i]);
        const std::int64_t tlo = ai + window_lo;
        const std::int64_t thi = ai + window_hi;
        while (lo < bv.size() && static_cast<std::int64_t>(bv[lo]) < tlo) ++lo;
        if (hi < lo) hi = lo;
        while (hi < bv.size() && static_cast<std::int64_t>(bv[hi]) < thi) ++hi;
        for (std::size_t j = lo; j < hi; ++j) {
            std::int64_t k = (static_cast<std::int64_t>(bv[j]) - tlo) / bin_width;
            ++counts[static_cast<std::size_t>(k)];
        }
    }
}

}  // namespace

CorrelationHistogram coincidence_histogram(const TimestampStream& a,
                                           const TimestampStream& b,
                                           std::int64_t center_offset_ps,
                                           std::int64_t span_ps,
                                           std::int64_t bin_width_ps,
                                           unsigned threads) {
    check_stream(a, "coincidence_histogram", "a");
    check_stream(b, "coincidence_histogram", "b");
    check_binning(span_ps, bin_width_ps, "coincidence_histogram");

    CorrelationHistogram h;
    h.center_offset_ps = center_offset_ps;
    h.bin_width_ps = bin_width_ps;
    h.span_ps = span_ps;
    h.acq_duration_ps = overlap_duration_ps(a, b);
    h.n_a = a.events.size();
    h.n_b = b.events.size();
    const std::size_t n_bins = static_cast<std::size_t>(span_ps / bin_width_ps);
    h.counts.assign(n_bins, 0);

    const std::int64_t window_lo = h.window_lo_ps();
    const std::int64_t window_hi = window_lo + static_cast<std::int64_t>(n_bins) * bin_width_ps;

    // threads is a partition count, not a hardware hint; callers pick the
    // width, and requesting more partitions than cores is merely wasteful.
    if (threads == 0) threads = 1;
    threads = std::min<unsigned>(
        threads, static_cast<unsigned>(std::max<std::size_t>(a.events.size(), 1)));

    if (threads <= 1) {
        histogram_chunk(a.events, b.events, 0, a.events.size(),
                        window_lo, window_hi, bin_width_ps, h.counts);
        return h;
    }

    std::vector<std::vector<std::uint64_t>> partial(threads,
                                                    std::vector<std::uint64_t>(n_bins, 0));
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (a.events.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t ia0 = std::min<std::size_t>(t * chunk, a.events.size());
        const std::size_t ia1 = std::min<std::size_t>(ia0 + chunk, a.events.size());
        pool.emplace_back([&, ia0, ia1, t] {
            histogram_chunk(a.events, b.events, ia0, ia1,
                            window_lo, window_hi, bin_width_ps, partial[t]);
        });
    }
    for (auto& th : pool) th.join();
    for (unsigned t = 0; t < threads; ++t)
        for (std::size_t k = 0; k < n_bins; ++k) h.counts[k] += partial[t][k];
    return h;
}

CorrelationHistogram brute_force_histogram(const TimestampStream& a,
                                           const TimestampStream& b,
                                           std::int64_t center_offset_ps,
                                           std::int64_t span_ps,
                                           std::int64_t bin_width_ps) {
    check_stream(a, "brute_force_histogram", "a");
    check_stream(b, "brute_force_histogram", "b");
    check_binning(span_ps, bin_width_ps, "brute_force_histogram");
    if (static_cast<unsigned __int128>(a.events.size()) * b.events.size() > 100'000'000ull)
        throw std::invalid_argument(
            "brute_force_histogram: n_a * n_b exceeds 1e8; use coincidence_histogram");

    CorrelationHistogram h;
    h.center_offset_ps = center_offset_ps;
    h.bin_width_ps = bin_width_ps;
    h.span_ps = span_ps;
    h.acq_duration_ps = overlap_duration_ps(a, b);
    h.n_a = a.events.size();
    h.n_b = b.events.size();
    const std::int64_t n_bins = span_ps / bin_width_ps;
    h.counts.assign(static_cast<std::size_t>(n_bins), 0);
    const std::int64_t lo = center_offset_ps - span_ps / 2;

    for (std::uint64_t ta : a.events) {
        for (std::uint64_t tb : b.events) {
            std::int64_t d = static_cast<std::int64_t>(tb) - static_cast<std::int64_t>(ta);
            std::int64_t num = d - lo;
            if (num < 0) continue;
            std::int64_t k = num / bin_width_ps;
            if (k >= n_bins) continue;
            ++h.counts[static_cast<std::size_t>(k)];
        }
    }
    return h;
}

std::vector<G2Point> normalize_g2(const CorrelationHistogram& h) {
    if (h.counts.empty())
        throw std::invalid_argument("normalize_g2: empty histogram");
    if (h.n_a == 0 || h.n_b == 0 || h.acq_duration_ps == 0)
        throw std::invalid_argument("normalize_g2: histogram lacks rate information");
    const long double scale =
        static_cast<long double>(h.acq_duration_ps) /
        (static_cast<long double>(h.n_a) * static_cast<long double>(h.n_b) *
         static_cast<long double>(h.bin_width_ps));
    std::vector<G2Point> out(h.counts.size());
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
        out[k].tau_ps = h.bin_center_ps(k);
        out[k].g2 = static_cast<double>(h.counts[k] * scale);
    }
    return out;
}

namespace {

struct FitWork {
    std::vector<double> x;  // bin centers relative to window_lo (keeps values small)
    std::vector<double> y;
};

double sse_for(const FitWork& w, double A, double mu, double sig, double B) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.x.size(); ++i) {
        double u = (w.x[i] - mu) / sig;
        double r = w.y[i] - (A * std::exp(-0.5 * u * u) + B);
        s += r * r;
    }
    return s;
}

// Solves the symmetric 4x4 system in place; returns false when singular.
bool solve4(double m[4][4], double v[4]) {
    int idx[4] = {0, 1, 2, 3};
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r2 = c + 1; r2 < 4; ++r2)
            if (std::abs(m[idx[r2]][c]) > std::abs(m[idx[piv]][c])) piv = r2;
        std::swap(idx[c], idx[piv]);
        double d = m[idx[c]][c];
        if (std::abs(d) < 1e-300) return false;
        for (int r2 = c + 1; r2 < 4; ++r2) {
            double f = m[idx[r2]][c] / d;
            for (int cc = c; cc < 4; ++cc) m[idx[r2]][cc] -= f * m[idx[c]][cc];
            v[idx[r2]] -= f * v[idx[c]];
        }
    }
    double out[4];
    for (int c = 3; c >= 0; --c) {
        double s = v[idx[c]];
        for (int cc = c + 1; cc < 4; ++cc) s -= m[idx[c]][cc] * out[cc];
        out[c] = s / m[idx[c]][c];
    }
    for (int c = 0; c < 4; ++c) v[c] = out[c];
    return true;
}

}  // namespace

PeakFit fit_peak(const CorrelationHistogram& h) {
    const std::size_t n = h.counts.size();
    if (n < 7)
        throw std::invalid_argument("fit_peak: need at least 7 bins");

    // Background from the median of the outer quarter of bins on each side.
    const std::size_t q = std::max<std::size_t>(n / 4, 1);
    std::vector<double> outer;
    outer.reserve(2 * q);
    for (std::size_t k = 0; k < q; ++k) {
        outer.push_back(static_cast<double>(h.counts[k]));
        outer.push_back(static_cast<double>(h.counts[n - 1 - k]));
    }
    std::sort(outer.begin(), outer.end());
    double B = outer.size() % 2 == 1
                   ? outer[outer.size() / 2]
                   : 0.5 * (outer[outer.size() / 2 - 1] + outer[outer.size() / 2]);

    std::size_t k_max = 0;
    for (std::size_t k = 1; k < n; ++k)
        if (h.counts[k] > h.counts[k_max]) k_max = k;
    const double peak_val = static_cast<double>(h.counts[k_max]);
    if (!(peak_val > B + 5.0 * std::sqrt(B)))
        throw NoPeak(B);

    // Moment seed over the contiguous region around the maximum, tolerating
    // short gaps below threshold.
    const double thr = B + 0.05 * (peak_val - B);
    auto extend = [&](std::int64_t from, int dir) {
        std::int64_t k = from;
        int below = 0;
        std::int64_t last_good = from;
        while (true) {
            std::int64_t nx = k + dir;
            if (nx < 0 || nx >= static_cast<std::int64_t>(n)) break;
            k = nx;
            if (static_cast<double>(h.counts[static_cast<std::size_t>(k)]) >= thr) {
                below = 0;
                last_good = k;
            } else if (++below > 2) {
                break;
            }
        }
        return last_good;
    };
    const std::size_t k_lo = static_cast<std::size_t>(extend(static_cast<std::int64_t>(k_max), -1));
    const std::size_t k_hi = static_cast<std::size_t>(extend(static_cast<std::int64_t>(k_max), +1));

    const double x0 = static_cast<double>(h.window_lo_ps());
    FitWork w;
    w.x.resize(n);
    w.y.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        w.x[k] = h.bin_center_ps(k) - x0;
        w.y[k] = static_cast<double>(h.counts[k]);
    }

    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        double e = std::max(w.y[k] - B, 0.0);
        m0 += e;
        m1 += e * w.x[k];
        m2 += e * w.x[k] * w.x[k];
    }
    const double bw = static_cast<double>(h.bin_width_ps);
    double mu = m0 > 0.0 ? m1 / m0 : w.x[k_max];
    double var = m0 > 0.0 ? std::max(m2 / m0 - mu * mu, bw * bw / 12.0) : bw * bw;
    double sig = std::sqrt(var);
    double A = peak_val - B;

    double lm = 1e-3;
    double sse = sse_for(w, A, mu, sig, B);
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        double jtj[4][4] = {};
        double jtr[4] = {};
        for (std::size_t i = 0; i < n; ++i) {
            double u = (w.x[i] - mu) / sig;
            double e = std::exp(-0.5 * u * u);
            double f = A * e + B;
            double r = w.y[i] - f;
            double j[4] = {e, A * e * u / sig, A * e * u * u / sig, 1.0};
            for (int p = 0; p < 4; ++p) {
                jtr[p] += j[p] * r;
                for (int q2 = p; q2 < 4; ++q2) jtj[p][q2] += j[p] * j[q2];
            }
        }
        for (int p = 0; p < 4; ++p)
            for (int q2 = 0; q2 < p; ++q2) jtj[p][q2] = jtj[q2][p];

        bool stepped = false;
        for (int tries = 0; tries < 30; ++tries) {
            double m[4][4];
            double v[4] = {jtr[0], jtr[1], jtr[2], jtr[3]};
            for (int p = 0; p < 4; ++p) {
                for (int q2 = 0; q2 < 4; ++q2) m[p][q2] = jtj[p][q2];
                m[p][p] += lm * std::max(jtj[p][p], 1e-12);
            }
            if (!solve4(m, v)) {
                lm *= 10.0;
                continue;
            }
            double A2 = A + v[0];
            double mu2 = mu + v[1];
            double sig2 = std::abs(sig + v[2]);
            double B2 = B + v[3];
            sig2 = std::clamp(sig2, bw / 10.0,
                              static_cast<double>(h.span_ps));
            double sse2 = (std::isfinite(A2) && std::isfinite(mu2) && std::isfinite(B2))
                              ? sse_for(w, A2, mu2, sig2, B2)
                              : std::numeric_limits<double>::infinity();
            if (sse2 <= sse) {
                double rel = std::max(
                    {std::abs(A2 - A) / std::max(std::abs(A), 1e-12),
                     std::abs(mu2 - mu) / std::max(std::abs(mu), bw),
                     std::abs(sig2 - sig) / std::max(std::abs(sig), bw / 10.0),
                     std::abs(B2 - B) / std::max(std::abs(B), 1.0)});
                A = A2;
                mu = mu2;
                sig = sig2;
                B = B2;
                sse = sse2;
                lm = std::max(lm * 0.1, 1e-12);
                stepped = true;
                if (rel <= 1e-6) converged = true;
                break;
            }
            lm *= 10.0;
            if (lm > 1e12) break;
        }
        if (!stepped) {
            converged = true;  // gradient exhausted: no step improves the fit
            break;
        }
        if (converged) break;
    }

    PeakFit fit;
    fit.center_ps = mu + x0;
    fit.fwhm_ps = kFwhmPerSigma * sig;
    fit.amplitude = A;
    fit.background = B;
    fit.residual_rms = std::sqrt(sse / static_cast<double>(n));
    fit.converged = converged && A > 0.0 && std::isfinite(mu) && std::isfinite(sig);
    return fit;
}

DriftTrack track_drift(const TimestampStream& a,
                       const TimestampStream& b,
                       const TrackParams& params) {
    check_stream(a, "track_drift", "a");
    check_stream(b, "track_drift", "b");
    if (!(params.slice_duration_s > 0.0))
        throw std::invalid_argument("track_drift: slice_duration must be > 0");
    check_binning(params.span_ps, params.bin_width_ps, "track_drift");

    const std::uint64_t slice_ps =
        static_cast<std::uint64_t>(std::llround(params.slice_duration_s * kPsPerSec));
    if (slice_ps == 0)
        throw std::invalid_argument("track_drift: slice_duration must be > 0");
    const std::uint64_t t0 = a.events.front();
    const std::uint64_t t1 = a.events.back();
    const std::size_t n_slices =
        static_cast<std::size_t>((t1 - t0) / slice_ps) + 1;
    if (n_slices < 2)
        throw std::invalid_argument(
            "track_drift: stream spans fewer than two slices; shorten slice_duration");

    // B events are pulled from the slice window padded by the coarse search
    // range plus the fine span, so the true partner events are always present.
    const std::int64_t pad =
        params.coarse.search_range_ps + params.span_ps + params.coarse.coarse_bin_ps;

    DriftTrack track;
    track.slice_duration_s = params.slice_duration_s;

    for (std::size_t s = 0; s < n_slices; ++s) {
        const std::uint64_t lo = t0 + s * slice_ps;
        const std::uint64_t hi = (s + 1 == n_slices) ? t1 + 1 : lo + slice_ps;
        auto a_lo = std::lower_bound(a.events.begin(), a.events.end(), lo);
        auto a_hi = std::lower_bound(a.events.begin(), a.events.end(), hi);
        const std::int64_t blo_i = static_cast<std::int64_t>(lo) - pad;
        const std::uint64_t blo = blo_i > 0 ? static_cast<std::uint64_t>(blo_i) : 0;
        const std::uint64_t bhi = hi + static_cast<std::uint64_t>(pad);
        auto b_lo = std::lower_bound(b.events.begin(), b.events.end(), blo);
        auto b_hi = std::lower_bound(b.events.begin(), b.events.end(), bhi);

        if (std::distance(a_lo, a_hi) < 2 || std::distance(b_lo, b_hi) < 2) {
            track.failed_slices.push_back(s);
            continue;
        }
        TimestampStream sa{a.channel_id, a.resolution_ps, 0,
                           std::vector<std::uint64_t>(a_lo, a_hi)};
        TimestampStream sb{b.channel_id, b.resolution_ps, 0,
                           std::vector<std::uint64_t>(b_lo, b_hi)};
        // Short remainder slices cannot host the coarse search range.
        if (sa.events.back() - sa.events.front() <
                static_cast<std::uint64_t>(params.coarse.search_range_ps) ||
            sb.events.back() - sb.events.front() <
                static_cast<std::uint64_t>(params.coarse.search_range_ps)) {
            track.failed_slices.push_back(s);
            continue;
        }
        try {
            CoarseOffset coarse = coarse_offset_search(sa, sb, params.coarse);
            CorrelationHistogram h = coincidence_histogram(
                sa, sb, coarse.offset_ps, params.span_ps, params.bin_width_ps,
                params.threads);
            PeakFit fit = fit_peak(h);
            if (!fit.converged) {
                track.failed_slices.push_back(s);
                continue;
            }
            DriftSlice slice;
            slice.wall_time_s =
                (static_cast<double>(lo) + static_cast<double>(hi - lo) / 2.0) / kPsPerSec;
            slice.center_ps = fit.center_ps;
            slice.fwhm_ps = fit.fwhm_ps;
            track.slices.push_back(slice);
        } catch (const NoSignificantOffset&) {
            track.failed_slices.push_back(s);
        } catch (const NoPeak&) {
            track.failed_slices.push_back(s);
        }
    }

    if (track.slices.size() < 2)
        throw std::runtime_error(
            "track_drift: fewer than two slices produced a usable peak");

    long double sx = 0.0L, sy = 0.0L, sxx = 0.0L, sxy = 0.0L;
    const long double m = static_cast<long double>(track.slices.size());
    for (const DriftSlice& sl : track.slices) {
        sx += sl.wall_time_s;
        sy += sl.center_ps;
        sxx += static_cast<long double>(sl.wall_time_s) * sl.wall_time_s;
        sxy += static_cast<long double>(sl.wall_time_s) * sl.center_ps;
    }
    const long double det = m * sxx - sx * sx;
    if (!(std::abs(static_cast<double>(det)) > 0.0))
        throw std::runtime_error("track_drift: degenerate slice times");
    const long double slope = (m * sxy - sx * sy) / det;       // ps per s
    const long double intercept = (sy - slope * sx) / m;       // ps
    long double ss = 0.0L;
    for (const DriftSlice& sl : track.slices) {
        long double r = sl.center_ps - (intercept + slope * sl.wall_time_s);
        ss += r * r;
    }
    track.fitted_y = static_cast<double>(slope * 1e-12L);
    track.fitted_intercept_ps = static_cast<double>(intercept);
    track.fit_residual_rms_ps = static_cast<double>(std::sqrt(static_cast<double>(ss / m)));
    return track;
}

TimestampStream compensate(const TimestampStream& b, const DriftTrack& track) {
    b.validate();
    const long double y = track.fitted_y;
    const long double intercept = track.fitted_intercept_ps;
    if (!(1.0L + y > 0.0L))
        throw std::invalid_argument("compensate: fitted frequency offset is unphysical");

    TimestampStream out;
    out.channel_id = b.channel_id;
    out.resolution_ps = 1;
    out.events.reserve(b.events.size());
    for (std::uint64_t t : b.events) {
        long double mapped = (static_cast<long double>(t) - intercept) / (1.0L + y);
        if (mapped < 0.0L) continue;  // pre-window stamp pulled past zero
        if (mapped > static_cast<long double>(kMaxTimestampPs))
            throw std::out_of_range("compensate: timestamp out of range");
        out.events.push_back(static_cast<std::uint64_t>(std::llrintl(mapped)));
    }
    std::sort(out.events.begin(), out.events.end());
    if (b.duration_ps > 0) {
        long double d = (static_cast<long double>(b.duration_ps) - intercept) / (1.0L + y);
        out.duration_ps = d > 0.0L ? static_cast<std::uint64_t>(std::llrintl(d)) : 0;
    }
    return out;
}

double predict_broadened_fwhm(double fwhm0_ps, double rel_freq_offset,
                              double acq_duration_s) {
    if (!(fwhm0_ps >= 0.0))
        throw std::invalid_argument("predict_broadened_fwhm: fwhm0 must be >= 0");
    if (!(acq_duration_s >= 0.0))
        throw std::invalid_argument("predict_broadened_fwhm: duration must be >= 0");
    const double w = std::abs(rel_freq_offset) * acq_duration_s * 1e12;  // ps
    if (w < 1e-9) return fwhm0_ps;
    const double sig = std::max(fwhm0_ps / kFwhmPerSigma, 1e-9);

    // Gaussian convolved with a unit-area rectangle of full width w:
    //   h(t) = [Phi((t + w/2)/sig) - Phi((t - w/2)/sig)] / w
    auto shape = [&](double t) {
        const double r = std::numbers::sqrt2 * sig;
        return std::erf((t + 0.5 * w) / r) - std::erf((t - 0.5 * w) / r);
    };
    const double half = 0.5 * shape(0.0);
    double lo = 0.0;
    double hi = 0.5 * w + 6.0 * sig;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (shape(mid) > half)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
    }
    return lo + hi;  // 2 * midpoint
}

}  // namespace tagcorr
