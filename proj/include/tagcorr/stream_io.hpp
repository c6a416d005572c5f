#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "tagcorr/clockstats.hpp"
#include "tagcorr/correlation.hpp"
#include "tagcorr/timebase.hpp"

namespace tagcorr {

// Operating-system level failure (open, write, rename).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Structurally invalid input file (bad magic, truncation, malformed CSV).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary stream file, little-endian:
//   magic "TTG1", version u16 = 1, channel_id u8, reserved u8,
//   resolution_ps u32, event_count u64, event_count x u64 ascending
//   timestamps in picoseconds.
inline constexpr std::uint16_t kStreamFormatVersion = 1;

void write_stream(const std::filesystem::path& path, const TimestampStream& s);
TimestampStream read_stream(const std::filesystem::path& path);

// CSV, LF line endings, full-precision decimals.
// Histogram: header tau_ps,counts,g2.
void write_histogram_csv(const std::filesystem::path& path,
                         const CorrelationHistogram& h);

// Phase series: header t_s,x_s; read requires a uniform time grid.
void write_phase_csv(const std::filesystem::path& path, const PhaseSeries& p);
PhaseSeries read_phase_csv(const std::filesystem::path& path);

// Allan curve: header tau_s,adev,n.
void write_adev_csv(const std::filesystem::path& path, const AdevCurve& c);

// Drift slices: header wall_time_s,center_ps,fwhm_ps.
void write_slices_csv(const std::filesystem::path& path, const DriftTrack& t);

// Whole-file atomic text write (temp file in the target directory + rename).
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace tagcorr
