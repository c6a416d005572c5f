#include "tagcorr/stream_io.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <system_error>
#include <vector>

#include "tagcorr/sha256.hpp"

namespace tagcorr {

namespace {

constexpr char kMagic[4] = {'T', 'T', 'G', '1'};
constexpr std::size_t kHeaderSize = 20;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void append_number(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void append_number(std::string& out, std::uint64_t v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
    return path.parent_path() /
           (path.filename().string() + ".tmp" + std::to_string(::getpid()));
}

void atomic_write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = temp_sibling(path);
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw IoError("cannot open for writing: " + tmp.string());
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.flush();
        if (!f) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("rename failed for: " + path.string());
    }
}

}  // namespace

void write_stream(const std::filesystem::path& path, const TimestampStream& s) {
    s.validate();
    std::string bytes;
    bytes.reserve(kHeaderSize + 8 * s.events.size());
    bytes.append(kMagic, 4);
    put_u16(bytes, kStreamFormatVersion);
    bytes.push_back(static_cast<char>(s.channel_id));
    bytes.push_back(0);  // reserved
    put_u32(bytes, s.resolution_ps);
    put_u64(bytes, s.events.size());
    for (std::uint64_t t : s.events) put_u64(bytes, t);
    atomic_write_bytes(path, bytes);
}

TimestampStream read_stream(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open stream file: " + path.string());
    std::uint8_t header[kHeaderSize];
    f.read(reinterpret_cast<char*>(header), kHeaderSize);
    if (f.gcount() != static_cast<std::streamsize>(kHeaderSize))
        throw FormatError("stream file truncated (header): " + path.string());
    if (std::memcmp(header, kMagic, 4) != 0)
        throw FormatError("not a TTG1 stream file: " + path.string());
    const std::uint16_t version =
        static_cast<std::uint16_t>(header[4]) | (static_cast<std::uint16_t>(header[5]) << 8);
    if (version != kStreamFormatVersion)
        throw FormatError("unsupported stream format version " + std::to_string(version) +
                          ": " + path.string());

    TimestampStream s;
    s.channel_id = header[6];
    s.resolution_ps = static_cast<std::uint32_t>(header[8]) |
                      (static_cast<std::uint32_t>(header[9]) << 8) |
                      (static_cast<std::uint32_t>(header[10]) << 16) |
                      (static_cast<std::uint32_t>(header[11]) << 24);
    const std::uint64_t count = get_u64(header + 12);
    if (s.resolution_ps == 0)
        throw FormatError("stream resolution must be >= 1 ps: " + path.string());

    s.events.resize(count);
    std::vector<std::uint8_t> raw(8 * 8192);
    std::size_t done = 0;
    while (done < count) {
        const std::size_t want = std::min<std::size_t>(8192, count - done);
        f.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(8 * want));
        if (f.gcount() != static_cast<std::streamsize>(8 * want))
            throw FormatError("stream file truncated (events): " + path.string());
        for (std::size_t i = 0; i < want; ++i)
            s.events[done + i] = get_u64(raw.data() + 8 * i);
        done += want;
    }
    if (f.peek() != std::char_traits<char>::eof())
        throw FormatError("trailing bytes after event data: " + path.string());
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string(e.what()) + ": " + path.string());
    }
    return s;
}

void write_histogram_csv(const std::filesystem::path& path,
                         const CorrelationHistogram& h) {
    const std::vector<G2Point> g2 = normalize_g2(h);
    std::string out = "tau_ps,counts,g2\n";
    out.reserve(out.size() + 32 * h.counts.size());
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
        append_number(out, g2[k].tau_ps);
        out.push_back(',');
        append_number(out, h.counts[k]);
        out.push_back(',');
        append_number(out, g2[k].g2);
        out.push_back('\n');
    }
    atomic_write_text(path, out);
}

void write_phase_csv(const std::filesystem::path& path, const PhaseSeries& p) {
    std::string out = "t_s,x_s\n";
    out.reserve(out.size() + 24 * p.x_s.size());
    for (std::size_t i = 0; i < p.x_s.size(); ++i) {
        append_number(out, p.tau0_s * static_cast<double>(i));
        out.push_back(',');
        append_number(out, p.x_s[i]);
        out.push_back('\n');
    }
    atomic_write_text(path, out);
}

PhaseSeries read_phase_csv(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    std::size_t pos = 0;
    auto next_line = [&](std::string& line) {
        if (pos >= text.size()) return false;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        line.assign(text, pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = nl + 1;
        return true;
    };

    std::string line;
    if (!next_line(line) || line != "t_s,x_s")
        throw FormatError("phase CSV must start with header t_s,x_s: " + path.string());

    std::vector<double> t, x;
    std::size_t row = 1;
    while (next_line(line)) {
        ++row;
        if (line.empty()) continue;
        const char* b = line.data();
        const char* e = b + line.size();
        double tv = 0.0, xv = 0.0;
        auto r1 = std::from_chars(b, e, tv);
        if (r1.ec != std::errc{} || r1.ptr == e || *r1.ptr != ',')
            throw FormatError("phase CSV row " + std::to_string(row) +
                              " is malformed: " + path.string());
        auto r2 = std::from_chars(r1.ptr + 1, e, xv);
        if (r2.ec != std::errc{} || r2.ptr != e)
            throw FormatError("phase CSV row " + std::to_string(row) +
                              " is malformed: " + path.string());
        t.push_back(tv);
        x.push_back(xv);
    }
    if (t.size() < 3)
        throw FormatError("phase CSV needs at least 3 rows: " + path.string());

    const double tau0 = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(tau0 > 0.0))
        throw FormatError("phase CSV time column must increase: " + path.string());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double expected = t.front() + tau0 * static_cast<double>(i);
        if (std::abs(t[i] - expected) > 1e-6 * tau0)
            throw FormatError("phase CSV time grid is not uniform (row " +
                              std::to_string(i + 2) + "): " + path.string());
    }
    PhaseSeries p;
    p.tau0_s = tau0;
    p.x_s = std::move(x);
    return p;
}

void write_adev_csv(const std::filesystem::path& path, const AdevCurve& c) {
    std::string out = "tau_s,adev,n\n";
    for (const AdevPoint& pt : c.points) {
        append_number(out, pt.tau_s);
        out.push_back(',');
        append_number(out, pt.adev);
        out.push_back(',');
        append_number(out, pt.n_samples);
        out.push_back('\n');
    }
    atomic_write_text(path, out);
}

void write_slices_csv(const std::filesystem::path& path, const DriftTrack& t) {
    std::string out = "wall_time_s,center_ps,fwhm_ps\n";
    for (const DriftSlice& s : t.slices) {
        append_number(out, s.wall_time_s);
        out.push_back(',');
        append_number(out, s.center_ps);
        out.push_back(',');
        append_number(out, s.fwhm_ps);
        out.push_back('\n');
    }
    atomic_write_text(path, out);
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
    atomic_write_bytes(path, text);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    if (f.bad())
        throw IoError("read failed: " + path.string());
    return text;
}

std::string sha256_file_hex(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open file: " + path.string());
    Sha256 h;
    std::vector<char> buf(1 << 16);
    while (f) {
        f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const std::streamsize got = f.gcount();
        if (got > 0) h.update(buf.data(), static_cast<std::size_t>(got));
    }
    if (f.bad())
        throw IoError("read failed: " + path.string());
    return to_hex(h.finish());
}

}  // namespace tagcorr
