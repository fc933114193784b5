#pragma once

// File formats.
//
// Signal CSV:       "# sample_rate_hz=<fs>" comment, header "time_s,value", one row per sample.
// Signal binary:    "BICOHSIG" magic, uint64 sample count, float64 sample rate, float64 samples;
//                   all little-endian. Round-trips bit-exactly.
// Bicoherence CSV:  f1_Hz,f2_Hz,b2,abs_B,defined over the principal region (b2 = nan if undefined).
// Spectrogram CSV:  header "frequency_Hz,<t_0>,<t_1>,..."; one row per bin with |X|^2 per segment.
// Mask CSV:         comment lines with key=value metadata, then f1_Hz,f2_Hz,b,b_critical,significant.
// Histogram CSV:    bin_left,bin_right,count.

#include "bispectrum.hpp"
#include "error.hpp"
#include "signal.hpp"
#include "spectral.hpp"
#include "surrogate.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace bicoh {

static_assert(std::endian::native == std::endian::little, "binary sidecar assumes a little-endian host");

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw IoError("malformed number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, mode | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    return f;
}

inline void close_checked(std::ofstream& f, const std::filesystem::path& path)
{
    f.close();
    if (!f) throw IoError("write to '" + path.string() + "' failed");
}

inline std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in)
{
    std::ifstream f(path, mode);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return f;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Signals

inline void write_signal_csv(const std::filesystem::path& path, const SignalRecord& s)
{
    auto f = detail::open_out(path);
    f << "# sample_rate_hz=" << format_double(s.sample_rate) << '\n';
    if (!s.label.empty()) f << "# label=" << s.label << '\n';
    f << "time_s,value\n";
    for (std::size_t j = 0; j < s.size(); ++j) f << format_double(s.time_at(j)) << ',' << format_double(s.samples[j]) << '\n';
    detail::close_checked(f, path);
}

inline SignalRecord read_signal_csv(const std::filesystem::path& path)
{
    auto f = detail::open_in(path);
    SignalRecord s;
    std::vector<double> times;
    std::string line;
    bool header = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            const std::string_view body = std::string_view(line).substr(1);
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) continue;
            auto key = body.substr(0, eq);
            while (!key.empty() && key.front() == ' ') key.remove_prefix(1);
            if (key == "sample_rate_hz") s.sample_rate = parse_double(body.substr(eq + 1));
            if (key == "label") s.label = std::string(body.substr(eq + 1));
            continue;
        }
        if (!header) {
            if (line.rfind("time_s", 0) != 0) throw IoError("'" + path.string() + "': missing time_s,value header");
            header = true;
            continue;
        }
        const auto cols = split(line, ',');
        if (cols.size() != 2) throw IoError("'" + path.string() + "': expected 2 columns in '" + line + "'");
        times.push_back(parse_double(cols[0]));
        s.samples.push_back(parse_double(cols[1]));
    }
    if (!header || s.samples.size() < 2) throw IoError("'" + path.string() + "': no signal data");
    if (s.sample_rate <= 0.0) {
        const double span = times.back() - times.front();
        if (!(span > 0.0)) throw IoError("'" + path.string() + "': cannot infer sample rate");
        s.sample_rate = static_cast<double>(times.size() - 1) / span;
    }
    return s;
}

inline constexpr char signal_magic[8] = {'B', 'I', 'C', 'O', 'H', 'S', 'I', 'G'};

inline void write_signal_bin(const std::filesystem::path& path, const SignalRecord& s)
{
    auto f = detail::open_out(path, std::ios::out | std::ios::binary);
    const std::uint64_t count = s.size();
    f.write(signal_magic, sizeof(signal_magic));
    f.write(reinterpret_cast<const char*>(&count), sizeof(count));
    f.write(reinterpret_cast<const char*>(&s.sample_rate), sizeof(double));
    f.write(reinterpret_cast<const char*>(s.samples.data()), static_cast<std::streamsize>(count * sizeof(double)));
    detail::close_checked(f, path);
}

inline SignalRecord read_signal_bin(const std::filesystem::path& path)
{
    auto f = detail::open_in(path, std::ios::in | std::ios::binary);
    char magic[8];
    std::uint64_t count = 0;
    SignalRecord s;
    f.read(magic, sizeof(magic));
    f.read(reinterpret_cast<char*>(&count), sizeof(count));
    f.read(reinterpret_cast<char*>(&s.sample_rate), sizeof(double));
    if (!f || std::memcmp(magic, signal_magic, sizeof(magic)) != 0)
        throw IoError("'" + path.string() + "': not a signal sidecar");
    const auto expected = std::filesystem::file_size(path);
    if (expected != 24 + count * sizeof(double)) throw IoError("'" + path.string() + "': truncated or oversized sidecar");
    s.samples.resize(count);
    f.read(reinterpret_cast<char*>(s.samples.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw IoError("'" + path.string() + "': truncated sidecar");
    return s;
}

/// Dispatches on extension: ".bin" reads the sidecar, anything else the CSV form.
inline SignalRecord read_signal(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw IoError("'" + path.string() + "' does not exist");
    auto s = path.extension() == ".bin" ? read_signal_bin(path) : read_signal_csv(path);
    try {
        validate(s);
    } catch (const ValidationError& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Analysis products

inline void write_bicoherence_csv(std::ostream& out, const BicoherenceResult& r)
{
    out << "f1_Hz,f2_Hz,b2,abs_B,defined\n";
    for (const auto& c : r.bicoherence_sq.index().cells()) {
        const bool def = r.is_defined(c.k, c.l);
        out << format_double(r.plan.frequency(c.k)) << ',' << format_double(r.plan.frequency(c.l)) << ','
            << (def ? format_double(r.bicoherence_sq(c.k, c.l)) : std::string("nan")) << ','
            << format_double(std::abs(r.bispectrum(c.k, c.l))) << ',' << (def ? 1 : 0) << '\n';
    }
}

inline void write_bicoherence_csv(const std::filesystem::path& path, const BicoherenceResult& r)
{
    auto f = detail::open_out(path);
    write_bicoherence_csv(f, r);
    detail::close_checked(f, path);
}

inline void write_spectrogram_csv(std::ostream& out, const Spectrogram& s)
{
    out << "frequency_Hz";
    for (double t : s.times) out << ',' << format_double(t);
    out << '\n';
    for (std::size_t r = 0; r < s.rows(); ++r) {
        out << format_double(s.frequencies[r]);
        for (std::size_t c = 0; c < s.cols(); ++c) out << ',' << format_double(s.at(r, c));
        out << '\n';
    }
}

inline void write_spectrogram_csv(const std::filesystem::path& path, const Spectrogram& s)
{
    auto f = detail::open_out(path);
    write_spectrogram_csv(f, s);
    detail::close_checked(f, path);
}

inline void write_mask_csv(std::ostream& out, const FilterMask& m, const SegmentationPlan& plan)
{
    out << "# delta_f_hz=" << format_double(plan.delta_f()) << '\n'
        << "# bins=" << m.significant.bins() << '\n'
        << "# alpha=" << format_double(m.alpha) << '\n'
        << "# realizations=" << m.realizations << '\n'
        << "# evaluated_cells=" << m.evaluated_count() << '\n'
        << "# expected_false_positives=" << format_double(m.expected_false_positives) << '\n';
    out << "f1_Hz,f2_Hz,b,b_critical,significant\n";
    for (const auto& c : m.significant.index().cells()) {
        out << format_double(plan.frequency(c.k)) << ',' << format_double(plan.frequency(c.l)) << ','
            << format_double(m.measured_b(c.k, c.l)) << ',' << format_double(m.critical(c.k, c.l)) << ','
            << static_cast<int>(m.significant(c.k, c.l)) << '\n';
    }
}

inline void write_mask_csv(const std::filesystem::path& path, const FilterMask& m, const SegmentationPlan& plan)
{
    auto f = detail::open_out(path);
    write_mask_csv(f, m, plan);
    detail::close_checked(f, path);
}

/// Mask reloaded from CSV together with the frequency grid it was written on.
struct LoadedMask {
    FilterMask mask;
    SegmentationPlan plan; // only delta_f-related fields are meaningful
};

inline LoadedMask read_mask_csv(const std::filesystem::path& path)
{
    auto f = detail::open_in(path);
    std::map<std::string, std::string, std::less<>> meta;
    std::string line;
    while (std::getline(f, line) && !line.empty() && line.front() == '#') {
        const auto eq = line.find('=');
        if (eq != std::string::npos) meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
    }
    if (line.rfind("f1_Hz", 0) != 0) throw IoError("'" + path.string() + "': missing mask header");
    for (const char* key : {"delta_f_hz", "bins", "alpha", "realizations", "expected_false_positives"})
        if (!meta.count(key)) throw IoError("'" + path.string() + "': missing metadata '" + key + "'");

    LoadedMask out;
    const double df = parse_double(meta["delta_f_hz"]);
    const auto n = static_cast<std::size_t>(parse_double(meta["bins"]));
    out.plan.segment_length = 2 * n;
    out.plan.sample_rate = df * static_cast<double>(2 * n);
    auto& m = out.mask;
    m.significant = PrincipalGrid<std::uint8_t>(n);
    m.evaluated = PrincipalGrid<std::uint8_t>(n);
    m.measured_b = PrincipalGrid<double>(n);
    m.critical = PrincipalGrid<double>(n, std::nan(""));
    m.alpha = parse_double(meta["alpha"]);
    m.realizations = static_cast<std::size_t>(parse_double(meta["realizations"]));
    m.expected_false_positives = parse_double(meta["expected_false_positives"]);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 5) throw IoError("'" + path.string() + "': expected 5 columns in '" + line + "'");
        const auto k = static_cast<std::size_t>(std::llround(parse_double(cols[0]) / df));
        const auto l = static_cast<std::size_t>(std::llround(parse_double(cols[1]) / df));
        if (!m.significant.contains(k, l)) throw IoError("'" + path.string() + "': cell outside principal region");
        m.measured_b(k, l) = parse_double(cols[2]);
        m.critical(k, l) = parse_double(cols[3]);
        m.evaluated(k, l) = std::isnan(m.critical(k, l)) ? 0 : 1;
        m.significant(k, l) = cols[4] == "1" ? 1 : 0;
    }
    return out;
}

inline void write_histogram_csv(const std::filesystem::path& path, const Histogram& h)
{
    auto f = detail::open_out(path);
    f << "bin_left,bin_right,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        f << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ',' << h.counts[i] << '\n';
    detail::close_checked(f, path);
}

} // namespace bicoh
