#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tagcorr/clockstats.hpp"
#include "tagcorr/config.hpp"
#include "tagcorr/correlation.hpp"
#include "tagcorr/simulator.hpp"
#include "tagcorr/stream_io.hpp"
#include "tagcorr/timebase.hpp"

namespace py = pybind11;
using namespace tagcorr;

PYBIND11_MODULE(_tagcorr, m) {
    m.doc() = "timestamp-stream correlation and clock-stability toolkit";
    m.attr("__version__") = TAGCORR_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<FormatError>(m, "FormatError");
    py::register_exception<IoError>(m, "IoError");
    py::register_exception<NoSignificantOffset>(m, "NoSignificantOffset");
    py::register_exception<NoPeak>(m, "NoPeak");

    // timebase
    py::class_<TimestampStream>(m, "TimestampStream")
        .def(py::init<>())
        .def_readwrite("channel_id", &TimestampStream::channel_id)
        .def_readwrite("resolution_ps", &TimestampStream::resolution_ps)
        .def_readwrite("duration_ps", &TimestampStream::duration_ps)
        .def_readwrite("events", &TimestampStream::events)
        .def("effective_duration_ps", &TimestampStream::effective_duration_ps)
        .def("validate", &TimestampStream::validate)
        .def("__len__", [](const TimestampStream& s) { return s.events.size(); });

    py::class_<ClockModel>(m, "ClockModel")
        .def(py::init<>())
        .def_readwrite("phase_offset_ps", &ClockModel::phase_offset_ps)
        .def_readwrite("frac_freq_offset", &ClockModel::frac_freq_offset)
        .def_readwrite("freq_drift_per_s", &ClockModel::freq_drift_per_s)
        .def_readwrite("white_jitter_ps", &ClockModel::white_jitter_ps)
        .def_readwrite("quantization_ps", &ClockModel::quantization_ps)
        .def("offset_at", &ClockModel::offset_at, py::arg("t_ps"))
        .def("warp", &ClockModel::warp, py::arg("t_ps"))
        .def("rate_at", &ClockModel::rate_at, py::arg("t_ps"));

    py::class_<PhaseSeries>(m, "PhaseSeries")
        .def(py::init<>())
        .def_readwrite("tau0_s", &PhaseSeries::tau0_s)
        .def_readwrite("x_s", &PhaseSeries::x_s);

    m.def("relative_delay_ps", &relative_delay_ps, py::arg("a"), py::arg("b"),
          py::arg("t_ps"));
    m.def(
        "apply_clock",
        [](const std::vector<std::uint64_t>& true_times, const ClockModel& clock,
           std::uint64_t seed, std::uint8_t channel_id, std::uint64_t duration_ps) {
            return apply_clock(true_times, clock, seed, channel_id, duration_ps);
        },
        py::arg("true_times_ps"), py::arg("clock"), py::arg("seed"),
        py::arg("channel_id") = 0, py::arg("duration_ps") = 0);
    m.def("invert_clock", &invert_clock, py::arg("stream"), py::arg("clock"));

    // simulator
    py::class_<SourceConfig>(m, "SourceConfig")
        .def(py::init<>())
        .def_readwrite("pair_rate_hz", &SourceConfig::pair_rate_hz)
        .def_readwrite("duration_s", &SourceConfig::duration_s)
        .def_readwrite("correlation_jitter_ps", &SourceConfig::correlation_jitter_ps)
        .def_readwrite("start_time_s", &SourceConfig::start_time_s);

    py::class_<ChannelConfig>(m, "ChannelConfig")
        .def(py::init<>())
        .def_readwrite("delay_ps", &ChannelConfig::delay_ps)
        .def_readwrite("transmission", &ChannelConfig::transmission);

    py::class_<DetectorConfig>(m, "DetectorConfig")
        .def(py::init<>())
        .def_readwrite("efficiency", &DetectorConfig::efficiency)
        .def_readwrite("jitter_ps", &DetectorConfig::jitter_ps)
        .def_readwrite("dead_time_ps", &DetectorConfig::dead_time_ps)
        .def_readwrite("dark_rate_hz", &DetectorConfig::dark_rate_hz);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("source", &ExperimentConfig::source)
        .def_readwrite("herald_channel", &ExperimentConfig::herald_channel)
        .def_readwrite("signal_channel", &ExperimentConfig::signal_channel)
        .def_readwrite("herald_detector", &ExperimentConfig::herald_detector)
        .def_readwrite("signal_detector", &ExperimentConfig::signal_detector)
        .def_readwrite("clock_a", &ExperimentConfig::clock_a)
        .def_readwrite("clock_b", &ExperimentConfig::clock_b)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("label", &ExperimentConfig::label)
        .def("validate", &ExperimentConfig::validate);

    m.def("preset_a", &preset_a);
    m.def("preset_b", &preset_b);
    m.def("preset_c", &preset_c);
    m.def("run_experiment", &run_experiment, py::arg("config"));

    // config + stream files
    m.def("parse_config_json", &parse_config_json, py::arg("text"));
    m.def("load_config", &load_config, py::arg("path"));
    m.def("config_to_json", &config_to_json, py::arg("config"));
    m.def("read_stream", &read_stream, py::arg("path"));
    m.def("write_stream", &write_stream, py::arg("path"), py::arg("stream"));
    m.def("sha256_file_hex", &sha256_file_hex, py::arg("path"));

    // correlation
    py::class_<CorrelationHistogram>(m, "CorrelationHistogram")
        .def(py::init<>())
        .def_readwrite("center_offset_ps", &CorrelationHistogram::center_offset_ps)
        .def_readwrite("bin_width_ps", &CorrelationHistogram::bin_width_ps)
        .def_readwrite("span_ps", &CorrelationHistogram::span_ps)
        .def_readwrite("acq_duration_ps", &CorrelationHistogram::acq_duration_ps)
        .def_readwrite("n_a", &CorrelationHistogram::n_a)
        .def_readwrite("n_b", &CorrelationHistogram::n_b)
        .def_readwrite("counts", &CorrelationHistogram::counts)
        .def("window_lo_ps", &CorrelationHistogram::window_lo_ps)
        .def("bin_center_ps", &CorrelationHistogram::bin_center_ps, py::arg("k"));

    py::class_<G2Point>(m, "G2Point")
        .def_readwrite("tau_ps", &G2Point::tau_ps)
        .def_readwrite("g2", &G2Point::g2);

    py::class_<PeakFit>(m, "PeakFit")
        .def_readwrite("center_ps", &PeakFit::center_ps)
        .def_readwrite("fwhm_ps", &PeakFit::fwhm_ps)
        .def_readwrite("amplitude", &PeakFit::amplitude)
        .def_readwrite("background", &PeakFit::background)
        .def_readwrite("residual_rms", &PeakFit::residual_rms)
        .def_readwrite("converged", &PeakFit::converged);

    py::class_<CoarseSearchParams>(m, "CoarseSearchParams")
        .def(py::init<>())
        .def_readwrite("coarse_bin_ps", &CoarseSearchParams::coarse_bin_ps)
        .def_readwrite("search_range_ps", &CoarseSearchParams::search_range_ps)
        .def_readwrite("max_window_bins", &CoarseSearchParams::max_window_bins)
        .def_readwrite("significance_threshold",
                       &CoarseSearchParams::significance_threshold);

    py::class_<CoarseOffset>(m, "CoarseOffset")
        .def_readwrite("offset_ps", &CoarseOffset::offset_ps)
        .def_readwrite("significance", &CoarseOffset::significance);

    m.def("coarse_offset_search", &coarse_offset_search, py::arg("a"), py::arg("b"),
          py::arg("params") = CoarseSearchParams{});
    m.def("coincidence_histogram", &coincidence_histogram, py::arg("a"), py::arg("b"),
          py::arg("center_offset_ps"), py::arg("span_ps"), py::arg("bin_width_ps"),
          py::arg("threads") = 1);
    m.def("brute_force_histogram", &brute_force_histogram, py::arg("a"), py::arg("b"),
          py::arg("center_offset_ps"), py::arg("span_ps"), py::arg("bin_width_ps"));
    m.def("normalize_g2", &normalize_g2, py::arg("histogram"));
    m.def("fit_peak", &fit_peak, py::arg("histogram"));

    py::class_<DriftSlice>(m, "DriftSlice")
        .def_readwrite("wall_time_s", &DriftSlice::wall_time_s)
        .def_readwrite("center_ps", &DriftSlice::center_ps)
        .def_readwrite("fwhm_ps", &DriftSlice::fwhm_ps);

    py::class_<DriftTrack>(m, "DriftTrack")
        .def_readwrite("slice_duration_s", &DriftTrack::slice_duration_s)
        .def_readwrite("slices", &DriftTrack::slices)
        .def_readwrite("failed_slices", &DriftTrack::failed_slices)
        .def_readwrite("fitted_y", &DriftTrack::fitted_y)
        .def_readwrite("fitted_intercept_ps", &DriftTrack::fitted_intercept_ps)
        .def_readwrite("fit_residual_rms_ps", &DriftTrack::fit_residual_rms_ps)
        .def("slope_ps_per_s", &DriftTrack::slope_ps_per_s);

    py::class_<TrackParams>(m, "TrackParams")
        .def(py::init<>())
        .def_readwrite("slice_duration_s", &TrackParams::slice_duration_s)
        .def_readwrite("bin_width_ps", &TrackParams::bin_width_ps)
        .def_readwrite("span_ps", &TrackParams::span_ps)
        .def_readwrite("coarse", &TrackParams::coarse)
        .def_readwrite("threads", &TrackParams::threads);

    m.def("track_drift", &track_drift, py::arg("a"), py::arg("b"),
          py::arg("params") = TrackParams{});
    m.def("compensate", &compensate, py::arg("b"), py::arg("track"));
    m.def("predict_broadened_fwhm", &predict_broadened_fwhm, py::arg("fwhm0_ps"),
          py::arg("rel_freq_offset"), py::arg("acq_duration_s"));

    // clock statistics
    py::class_<AdevPoint>(m, "AdevPoint")
        .def_readwrite("tau_s", &AdevPoint::tau_s)
        .def_readwrite("adev", &AdevPoint::adev)
        .def_readwrite("n_samples", &AdevPoint::n_samples);

    py::class_<AdevCurve>(m, "AdevCurve")
        .def_readwrite("points", &AdevCurve::points)
        .def_readwrite("omitted_m", &AdevCurve::omitted_m);

    m.def("overlapping_adev", &overlapping_adev, py::arg("phase"),
          py::arg("m_values") = std::vector<std::uint64_t>{});

    py::class_<FreqDriftFit>(m, "FreqDriftFit")
        .def_readwrite("c0_s", &FreqDriftFit::c0_s)
        .def_readwrite("y0", &FreqDriftFit::y0)
        .def_readwrite("drift_per_s", &FreqDriftFit::drift_per_s)
        .def_readwrite("y0_stderr", &FreqDriftFit::y0_stderr)
        .def_readwrite("drift_stderr", &FreqDriftFit::drift_stderr)
        .def_readwrite("residual_rms_s", &FreqDriftFit::residual_rms_s);

    m.def("fit_frequency_drift", &fit_frequency_drift, py::arg("phase"));

    py::class_<TuningStep>(m, "TuningStep")
        .def_readwrite("gate_time_s", &TuningStep::gate_time_s)
        .def_readwrite("measured_y", &TuningStep::measured_y)
        .def_readwrite("applied_correction", &TuningStep::applied_correction);

    py::class_<TuningResult>(m, "TuningResult")
        .def_readwrite("steps", &TuningResult::steps)
        .def_readwrite("final_residual_y", &TuningResult::final_residual_y)
        .def_readwrite("converged", &TuningResult::converged);

    m.def("discipline", &discipline, py::arg("free_clock"), py::arg("reference"),
          py::arg("gate_time_s"), py::arg("tuning_resolution"), py::arg("max_steps"),
          py::arg("seed"));
    m.def("sample_phase_series", &sample_phase_series, py::arg("free_clock"),
          py::arg("reference"), py::arg("tau0_s"), py::arg("n"), py::arg("seed"));
}
