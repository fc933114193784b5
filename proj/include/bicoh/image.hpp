#pragma once

// PNG heatmaps. Colormap: piecewise-linear through five viridis anchor colours,
// 0 -> dark purple, 1 -> yellow. Bifrequency maps put f1 on the horizontal axis
// and f2 on the vertical axis (increasing upward) and cover the plotted
// subregion f1 <= f_s / 8 of the principal region.

#include "bispectrum.hpp"
#include "error.hpp"
#include "spectral.hpp"
#include "surrogate.hpp"
#include "triangle.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <vector>

namespace bicoh {

using Rgb = std::array<std::uint8_t, 3>;

/// RGB raster, row 0 at the top.
struct Image {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels; // width * height * 3

    Image(std::size_t w, std::size_t h, Rgb fill = {255, 255, 255}) : width(w), height(h), pixels(w * h * 3)
    {
        for (std::size_t i = 0; i < w * h; ++i) std::copy(fill.begin(), fill.end(), pixels.begin() + 3 * i);
    }
    void set(std::size_t x, std::size_t y, Rgb c) noexcept
    {
        std::copy(c.begin(), c.end(), pixels.begin() + 3 * (y * width + x));
    }
    [[nodiscard]] Rgb get(std::size_t x, std::size_t y) const noexcept
    {
        const auto* p = pixels.data() + 3 * (y * width + x);
        return {p[0], p[1], p[2]};
    }
};

inline Rgb colormap(double v) noexcept
{
    static constexpr std::array<Rgb, 5> anchors{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    if (!std::isfinite(v)) v = 0.0;
    v = std::clamp(v, 0.0, 1.0) * static_cast<double>(anchors.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(v), anchors.size() - 2);
    const double t = v - static_cast<double>(i);
    Rgb out{};
    for (int c = 0; c < 3; ++c)
        out[c] = static_cast<std::uint8_t>(std::lround((1.0 - t) * anchors[i][c] + t * anchors[i + 1][c]));
    return out;
}

inline void write_png(const std::filesystem::path& path, const Image& img)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw IoError("cannot open '" + path.string() + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + 3 * y * img.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace detail {

inline std::size_t plotted_extent(std::size_t n) noexcept { return std::max<std::size_t>(1, n / 4); }

/// Paints every plotted principal-region cell with `paint(k, l)`, `scale` pixels per cell.
template <typename Paint>
Image paint_plotted_region(std::size_t n, std::size_t scale, Paint&& paint)
{
    const std::size_t extent = plotted_extent(n);
    Image img(extent * scale, extent * scale, {255, 255, 255});
    for (std::size_t l = 1; l <= extent; ++l) {
        for (std::size_t k = l; k <= extent && k + l <= n; ++k) {
            const Rgb c = paint(k, l);
            for (std::size_t dy = 0; dy < scale; ++dy)
                for (std::size_t dx = 0; dx < scale; ++dx)
                    img.set((k - 1) * scale + dx, (extent - l) * scale + dy, c);
        }
    }
    return img;
}

} // namespace detail

/// b^2 heatmap; undefined cells grey.
inline Image bicoherence_image(const BicoherenceResult& r, std::size_t scale = 4)
{
    return detail::paint_plotted_region(r.bins(), scale, [&](std::size_t k, std::size_t l) -> Rgb {
        if (!r.is_defined(k, l)) return {160, 160, 160};
        return colormap(r.bicoherence_sq(k, l));
    });
}

/// b^2 of surviving cells on the colormap; rejected cells dimmed grey, unevaluated light grey.
inline Image mask_image(const FilterMask& m, std::size_t scale = 4)
{
    return detail::paint_plotted_region(m.significant.bins(), scale, [&](std::size_t k, std::size_t l) -> Rgb {
        if (!m.evaluated(k, l)) return {220, 220, 220};
        const double b2 = m.measured_b(k, l) * m.measured_b(k, l);
        if (m.significant(k, l)) return colormap(b2);
        const auto g = static_cast<std::uint8_t>(std::lround(40.0 + 60.0 * std::clamp(b2, 0.0, 1.0)));
        return {g, g, g};
    });
}

/// log10 power over a 60 dB range; time horizontal, frequency upward.
inline Image spectrogram_image(const Spectrogram& s, std::size_t scale = 1)
{
    Image img(std::max<std::size_t>(1, s.cols() * scale), std::max<std::size_t>(1, s.rows() * scale));
    double peak = 0.0;
    for (double p : s.power) peak = std::max(peak, p);
    const double top = peak > 0.0 ? 10.0 * std::log10(peak) : 0.0;
    for (std::size_t r = 0; r < s.rows(); ++r) {
        for (std::size_t c = 0; c < s.cols(); ++c) {
            const double p = s.at(r, c);
            const double db = p > 0.0 ? 10.0 * std::log10(p) : -std::numeric_limits<double>::infinity();
            const Rgb col = peak > 0.0 ? colormap((db - (top - 60.0)) / 60.0) : colormap(0.0);
            for (std::size_t dy = 0; dy < scale; ++dy)
                for (std::size_t dx = 0; dx < scale; ++dx)
                    img.set(c * scale + dx, (s.rows() - 1 - r) * scale + dy, col);
        }
    }
    return img;
}

} // namespace bicoh
