#include "tagcorr/clockstats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tagcorr/rng.hpp"

namespace tagcorr {

AdevCurve overlapping_adev(const PhaseSeries& p,
                           const std::vector<std::uint64_t>& m_values) {
    if (!(p.tau0_s > 0.0))
        throw std::invalid_argument("overlapping_adev: tau0 must be > 0");
    const std::size_t n = p.x_s.size();
    if (n < 3)
        throw std::invalid_argument("overlapping_adev: need at least 3 phase samples");

    std::vector<std::uint64_t> ms = m_values;
    if (ms.empty()) {
        for (std::uint64_t m = 1; 2 * m + 1 <= n; m *= 2) ms.push_back(m);
    }

    AdevCurve curve;
    for (std::uint64_t m : ms) {
        if (m < 1 || 2 * m + 1 > n) {
            curve.omitted_m.push_back(m);
            continue;
        }
        const std::size_t terms = n - 2 * static_cast<std::size_t>(m);
        long double acc = 0.0L;
        for (std::size_t i = 0; i < terms; ++i) {
            long double d = static_cast<long double>(p.x_s[i + 2 * m]) -
                            2.0L * static_cast<long double>(p.x_s[i + m]) +
                            static_cast<long double>(p.x_s[i]);
            acc += d * d;
        }
        const long double tau = static_cast<long double>(m) * p.tau0_s;
        const long double var = acc / (2.0L * tau * tau * static_cast<long double>(terms));
        AdevPoint pt;
        pt.tau_s = static_cast<double>(tau);
        pt.adev = static_cast<double>(std::sqrt(static_cast<double>(var)));
        pt.n_samples = terms;
        curve.points.push_back(pt);
    }
    std::sort(curve.points.begin(), curve.points.end(),
              [](const AdevPoint& a, const AdevPoint& b) { return a.tau_s < b.tau_s; });
    curve.points.erase(std::unique(curve.points.begin(), curve.points.end(),
                                   [](const AdevPoint& a, const AdevPoint& b) {
                                       return a.tau_s == b.tau_s;
                                   }),
                       curve.points.end());
    return curve;
}

FreqDriftFit fit_frequency_drift(const PhaseSeries& p) {
    if (!(p.tau0_s > 0.0))
        throw std::invalid_argument("fit_frequency_drift: tau0 must be > 0");
    const std::size_t n = p.x_s.size();
    if (n < 3)
        throw std::invalid_argument("fit_frequency_drift: need at least 3 phase samples");

    // Center the time axis; the normal equations of the raw basis grow as
    // t^4 and shed precision over hour-long series.
    const long double tau0 = p.tau0_s;
    const long double tmid = 0.5L * tau0 * static_cast<long double>(n - 1);

    long double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    long double b0 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long double t = tau0 * static_cast<long double>(i) - tmid;
        const long double t2 = t * t;
        const long double x = p.x_s[i];
        s0 += 1;
        s1 += t;
        s2 += t2;
        s3 += t2 * t;
        s4 += t2 * t2;
        b0 += x;
        b1 += x * t;
        b2 += x * t2;
    }

    // Solve the symmetric 3x3 normal system for (a, b, c) in
    // x = a + b t + c t^2 about the centered axis.
    long double m[3][4] = {
        {s0, s1, s2, b0},
        {s1, s2, s3, b1},
        {s2, s3, s4, b2},
    };
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(static_cast<double>(m[r][col])) >
                std::abs(static_cast<double>(m[piv][col])))
                piv = r;
        std::swap(m[col], m[piv]);
        if (m[col][col] == 0.0L)
            throw std::invalid_argument("fit_frequency_drift: degenerate time axis");
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const long double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    const long double a = m[0][3] / m[0][0];
    const long double b = m[1][3] / m[1][1];
    const long double c = m[2][3] / m[2][2];

    long double sse = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double t = tau0 * static_cast<long double>(i) - tmid;
        const long double r = static_cast<long double>(p.x_s[i]) - (a + b * t + c * t * t);
        sse += r * r;
    }

    FreqDriftFit fit;
    // Uncenter: x = a + b (t - tmid) + c (t - tmid)^2
    //             = (a - b tmid + c tmid^2) + (b - 2 c tmid) t + c t^2.
    fit.c0_s = static_cast<double>(a - b * tmid + c * tmid * tmid);
    fit.y0 = static_cast<double>(b - 2.0L * c * tmid);
    fit.drift_per_s = static_cast<double>(2.0L * c);
    fit.residual_rms_s = static_cast<double>(std::sqrt(static_cast<double>(sse / s0)));

    // Standard errors from the centered system, where the covariance of
    // (b, c) is sigma^2 [S]^-1 with S the centered moment matrix. On the
    // centered axis odd moments vanish only for symmetric grids; invert the
    // 2x2 block of the full inverse instead.
    if (n > 3) {
        const long double sigma2 = sse / static_cast<long double>(n - 3);
        // Inverse diagonal entries for parameters b and c of the 3x3 moment
        // matrix via cofactors.
        const long double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s3 * s2) +
                                s2 * (s1 * s3 - s2 * s2);
        if (det != 0.0L) {
            const long double inv_bb = (s0 * s4 - s2 * s2) / det;
            const long double inv_cc = (s0 * s2 - s1 * s1) / det;
            const long double inv_bc = -(s0 * s3 - s1 * s2) / det;
            // y0 = b - 2 c tmid: var = var_b + 4 tmid^2 var_c - 4 tmid cov_bc
            const long double var_y0 =
                sigma2 * (inv_bb + 4.0L * tmid * tmid * inv_cc - 4.0L * tmid * inv_bc);
            const long double var_d = sigma2 * 4.0L * inv_cc;
            fit.y0_stderr = var_y0 > 0.0L
                                ? static_cast<double>(std::sqrt(static_cast<double>(var_y0)))
                                : 0.0;
            fit.drift_stderr =
                var_d > 0.0L ? static_cast<double>(std::sqrt(static_cast<double>(var_d)))
                             : 0.0;
        }
    }
    return fit;
}

std::pair<ClockModel, TuningResult> discipline(const ClockModel& free_clock,
                                               const ClockModel& reference,
                                               double gate_time_s,
                                               double tuning_resolution,
                                               int max_steps,
                                               std::uint64_t seed) {
    if (!(gate_time_s > 0.0))
        throw std::invalid_argument("discipline: gate_time must be > 0");
    if (!(tuning_resolution > 0.0))
        throw std::invalid_argument("discipline: tuning_resolution must be > 0");
    if (max_steps < 1)
        throw std::invalid_argument("discipline: max_steps must be >= 1");

    ClockModel tuned = free_clock;
    TuningResult result;
    Rng rng(seed);
    const double gate_ps = gate_time_s * kPsPerSec;
    const double sample_sigma = std::hypot(free_clock.white_jitter_ps,
                                           reference.white_jitter_ps);

    double t_ps = 0.0;
    for (int step = 0; step < max_steps; ++step) {
        const double x1 = tuned.offset_at(t_ps) - reference.offset_at(t_ps) +
                          rng.normal(sample_sigma);
        const double x2 = tuned.offset_at(t_ps + gate_ps) -
                          reference.offset_at(t_ps + gate_ps) +
                          rng.normal(sample_sigma);
        const double measured_y = (x2 - x1) / gate_ps;
        const double correction =
            -std::round(measured_y / tuning_resolution) * tuning_resolution;
        tuned.frac_freq_offset += correction;

        result.steps.push_back({gate_time_s, measured_y, correction});
        result.final_residual_y = measured_y;
        t_ps += gate_ps;
        if (std::abs(measured_y) < tuning_resolution) {
            result.converged = true;
            break;
        }
    }
    return {tuned, result};
}

PhaseSeries sample_phase_series(const ClockModel& free_clock,
                                const ClockModel& reference,
                                double tau0_s,
                                std::size_t n,
                                std::uint64_t seed) {
    if (!(tau0_s > 0.0))
        throw std::invalid_argument("sample_phase_series: tau0 must be > 0");
    if (n < 3)
        throw std::invalid_argument("sample_phase_series: need at least 3 samples");

    Rng rng(seed);
    const double sample_sigma = std::hypot(free_clock.white_jitter_ps,
                                           reference.white_jitter_ps);
    PhaseSeries p;
    p.tau0_s = tau0_s;
    p.x_s.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t_ps = tau0_s * static_cast<double>(i) * kPsPerSec;
        const double x_ps = free_clock.offset_at(t_ps) - reference.offset_at(t_ps) +
                            rng.normal(sample_sigma);
        p.x_s[i] = x_ps / kPsPerSec;
    }
    return p;
}

}  // namespace tagcorr
