#pragma once

// Windowed, overlapping segmentation and the per-segment one-sided DFT ensemble.

#include "error.hpp"
#include "signal.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace bicoh {

using cdouble = std::complex<double>;

enum class Window { hann, boxcar };

inline std::string_view to_string(Window w) noexcept
{
    return w == Window::hann ? "hann" : "boxcar";
}

inline Window parse_window(std::string_view s)
{
    if (s == "hann") return Window::hann;
    if (s == "boxcar") return Window::boxcar;
    throw ValidationError("unknown window '" + std::string(s) + "' (expected hann or boxcar)");
}

struct SegmentationPlan {
    std::size_t segment_length = 512; // 2n samples
    double overlap_fraction = 0.5;
    Window window = Window::hann;
    double sample_rate = 1.0;

    /// n: number of positive-frequency bins kept.
    [[nodiscard]] std::size_t bins() const noexcept { return segment_length / 2; }
    [[nodiscard]] std::size_t hop() const noexcept
    {
        return static_cast<std::size_t>(
            std::llround(static_cast<double>(segment_length) * (1.0 - overlap_fraction)));
    }
    [[nodiscard]] double delta_f() const noexcept
    {
        return sample_rate / static_cast<double>(segment_length);
    }
    [[nodiscard]] double nyquist() const noexcept { return sample_rate / 2.0; }
    /// Frequency of bin k in Hz.
    [[nodiscard]] double frequency(std::size_t k) const noexcept
    {
        return static_cast<double>(k) * sample_rate / static_cast<double>(segment_length);
    }
    /// N = floor((M - L) / hop) + 1, or 0 when the record is shorter than one segment.
    [[nodiscard]] std::size_t segment_count(std::size_t record_length) const noexcept
    {
        if (record_length < segment_length) return 0;
        return (record_length - segment_length) / hop() + 1;
    }

    friend bool operator==(const SegmentationPlan&, const SegmentationPlan&) = default;
};

inline void validate(const SegmentationPlan& p)
{
    detail::require(p.segment_length >= 8 && p.segment_length % 2 == 0,
                    "plan: segment_length must be even and >= 8");
    detail::require(std::isfinite(p.overlap_fraction) && p.overlap_fraction >= 0.0 && p.overlap_fraction < 1.0,
                    "plan: overlap must lie in [0, 1)");
    detail::require(p.hop() >= 1, "plan: overlap leaves a hop of zero samples");
    detail::require(std::isfinite(p.sample_rate) && p.sample_rate > 0.0, "plan: sample_rate must be > 0");
}

/// w[j] = sin^2(pi j / length).
inline std::vector<double> hann_window(std::size_t length)
{
    detail::require(length >= 2, "hann_window: length must be >= 2");
    std::vector<double> w(length);
    for (std::size_t j = 0; j < length; ++j) {
        const double s = std::sin(std::numbers::pi * static_cast<double>(j) / static_cast<double>(length));
        w[j] = s * s;
    }
    return w;
}

inline std::vector<double> make_window(Window kind, std::size_t length)
{
    if (kind == Window::hann) return hann_window(length);
    return std::vector<double>(length, 1.0);
}

/// Row-major N x n block of one-sided spectra. Row i holds X^(i)_1 .. X^(i)_n (DC dropped).
struct SegmentSpectra {
    std::vector<cdouble> values;
    std::size_t segments = 0;
    std::size_t bins = 0;
    SegmentationPlan plan;

    /// Bin k is 1-based, matching frequency k * delta_f.
    [[nodiscard]] const cdouble& at(std::size_t segment, std::size_t k) const noexcept
    {
        return values[segment * bins + (k - 1)];
    }
    [[nodiscard]] cdouble& at(std::size_t segment, std::size_t k) noexcept
    {
        return values[segment * bins + (k - 1)];
    }
    [[nodiscard]] std::span<const cdouble> row(std::size_t segment) const noexcept
    {
        return {values.data() + segment * bins, bins};
    }

    /// Empty ensemble shaped for `segments` x `bins`; used to build synthetic inputs.
    static SegmentSpectra zeros(std::size_t segments, std::size_t bins, double sample_rate = 1.0)
    {
        SegmentSpectra s;
        s.segments = segments;
        s.bins = bins;
        s.values.assign(segments * bins, cdouble{});
        s.plan.segment_length = 2 * bins;
        s.plan.overlap_fraction = 0.0;
        s.plan.window = Window::boxcar;
        s.plan.sample_rate = sample_rate;
        return s;
    }
};

namespace detail {

// FFTW's planner is not reentrant; plan creation and destruction are serialized.
inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

/// Real-to-complex forward DFT of fixed length, unnormalized.
class RealDft {
public:
    explicit RealDft(std::size_t length)
        : length_(length),
          in_(static_cast<double*>(fftw_malloc(sizeof(double) * length))),
          out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (length / 2 + 1))))
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(length), in_.get(), out_.get(), FFTW_ESTIMATE);
    }
    ~RealDft()
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RealDft(const RealDft&) = delete;
    RealDft& operator=(const RealDft&) = delete;

    [[nodiscard]] std::span<double> input() noexcept { return {in_.get(), length_}; }

    /// Runs the transform; returns bins 0 .. length/2.
    std::span<const fftw_complex> execute() noexcept
    {
        fftw_execute(plan_);
        return {out_.get(), length_ / 2 + 1};
    }

private:
    std::size_t length_;
    std::unique_ptr<double, FftwFree> in_;
    std::unique_ptr<fftw_complex, FftwFree> out_;
    fftw_plan plan_ = nullptr;
};

/// Complex-to-complex forward DFT of fixed length, unnormalized.
class ComplexDft {
public:
    explicit ComplexDft(std::size_t length)
        : length_(length),
          in_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * length))),
          out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * length)))
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(length), in_.get(), out_.get(), FFTW_FORWARD, FFTW_ESTIMATE);
    }
    ~ComplexDft()
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }
    ComplexDft(const ComplexDft&) = delete;
    ComplexDft& operator=(const ComplexDft&) = delete;

    [[nodiscard]] std::span<fftw_complex> input() noexcept { return {in_.get(), length_}; }
    std::span<const fftw_complex> execute() noexcept
    {
        fftw_execute(plan_);
        return {out_.get(), length_};
    }

private:
    std::size_t length_;
    std::unique_ptr<fftw_complex, FftwFree> in_;
    std::unique_ptr<fftw_complex, FftwFree> out_;
    fftw_plan plan_ = nullptr;
};

inline void check_fits(const SignalRecord& signal, const SegmentationPlan& plan)
{
    validate(plan);
    validate(signal);
    detail::require(signal.sample_rate == plan.sample_rate, "plan sample_rate differs from the signal's");
    detail::require(signal.size() >= plan.segment_length,
                    "signal (" + std::to_string(signal.size()) + " samples) is shorter than one segment (" +
                        std::to_string(plan.segment_length) + ")");
}

} // namespace detail

/// Plan with the signal's sample rate filled in.
inline SegmentationPlan plan_for(const SignalRecord& signal, std::size_t segment_length = 512,
                                 double overlap = 0.5, Window window = Window::hann)
{
    return SegmentationPlan{segment_length, overlap, window, signal.sample_rate};
}

/// Segment i starts at i * hop; each block is windowed, transformed with a 1/(2n)
/// forward normalization, and bins 1..n are kept.
inline SegmentSpectra segment_spectra(const SignalRecord& signal, const SegmentationPlan& plan)
{
    detail::check_fits(signal, plan);
    const std::size_t len = plan.segment_length;
    const std::size_t n = plan.bins();
    const std::size_t count = plan.segment_count(signal.size());
    const auto window = make_window(plan.window, len);
    const double norm = 1.0 / static_cast<double>(len);

    SegmentSpectra out;
    out.segments = count;
    out.bins = n;
    out.plan = plan;
    out.values.resize(count * n);

    detail::RealDft dft(len);
    auto in = dft.input();
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = i * plan.hop();
        for (std::size_t j = 0; j < len; ++j) in[j] = signal.samples[start + j] * window[j];
        const auto spec = dft.execute();
        for (std::size_t k = 1; k <= n; ++k)
            out.at(i, k) = cdouble(spec[k][0], spec[k][1]) * norm;
    }
    return out;
}

/// Power |X^(i)_k|^2 laid out as rows = bins 1..n, columns = segments.
struct Spectrogram {
    std::vector<double> power; // row-major bins x segments
    std::vector<double> frequencies; // Hz per row
    std::vector<double> times;       // s, segment centres
    [[nodiscard]] std::size_t rows() const noexcept { return frequencies.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return times.size(); }
    [[nodiscard]] double at(std::size_t row, std::size_t col) const noexcept
    {
        return power[row * cols() + col];
    }
};

inline Spectrogram spectrogram(const SegmentSpectra& spectra)
{
    const auto& plan = spectra.plan;
    Spectrogram out;
    out.frequencies.resize(spectra.bins);
    out.times.resize(spectra.segments);
    for (std::size_t k = 1; k <= spectra.bins; ++k) out.frequencies[k - 1] = plan.frequency(k);
    for (std::size_t i = 0; i < spectra.segments; ++i)
        out.times[i] = (static_cast<double>(i * plan.hop()) + static_cast<double>(plan.segment_length) / 2.0) /
                       plan.sample_rate;
    out.power.resize(spectra.bins * spectra.segments);
    for (std::size_t k = 1; k <= spectra.bins; ++k)
        for (std::size_t i = 0; i < spectra.segments; ++i)
            out.power[(k - 1) * spectra.segments + i] = std::norm(spectra.at(i, k));
    return out;
}

inline Spectrogram spectrogram(const SignalRecord& signal, const SegmentationPlan& plan)
{
    return spectrogram(segment_spectra(signal, plan));
}

} // namespace bicoh
