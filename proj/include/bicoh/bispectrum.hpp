#pragma once

// Bispectrum and squared bicoherence over the principal region.
//
// The production path uses the matrix formulation: for every segment the
// cross-frequency matrix C_kl = X_k X_l and the shifted conjugate matrix
// S_kl = conj(X_{k+l}) (k <= l, k + l <= n, zero elsewhere) are formed and
//   B   = E(C o S)
//   b^2 = |B|^2 / (E(|C|^2) o E(|S|^2))
// is accumulated element-wise. bicoherence_naive() evaluates the same
// quantities with explicit (k, l, k + l) loops and serves as its oracle.

#include "error.hpp"
#include "spectral.hpp"
#include "triangle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <utility>
#include <vector>

namespace bicoh {

/// n x n, zero-based: entry (k-1, l-1) holds X_k X_l.
using CrossFrequencyMatrix = Eigen::MatrixXcd;
/// n x n, zero-based: entry (k-1, l-1) holds conj(X_{k+l}) on k <= l, k + l <= n.
using ShiftedConjugateMatrix = Eigen::MatrixXcd;

struct BicoherenceResult {
    PrincipalGrid<cdouble> bispectrum;
    PrincipalGrid<double> bicoherence_sq;
    PrincipalGrid<double> denom_cross; // E(|X_k X_l|^2)
    PrincipalGrid<double> denom_sum;   // E(|X_{k+l}|^2)
    PrincipalGrid<std::uint8_t> defined;
    SegmentationPlan plan;
    std::size_t segment_count = 0;

    [[nodiscard]] std::size_t bins() const noexcept { return bicoherence_sq.bins(); }
    [[nodiscard]] bool is_defined(std::size_t k, std::size_t l) const noexcept { return defined(k, l) != 0; }
    /// Bicoherence on the b scale.
    [[nodiscard]] double b(std::size_t k, std::size_t l) const noexcept { return std::sqrt(bicoherence_sq(k, l)); }
    [[nodiscard]] std::size_t defined_count() const noexcept
    {
        return static_cast<std::size_t>(std::count(defined.begin(), defined.end(), std::uint8_t{1}));
    }
};

namespace detail {

inline Eigen::VectorXcd row_vector(const SegmentSpectra& spectra, std::size_t segment)
{
    Eigen::VectorXcd x(static_cast<Eigen::Index>(spectra.bins));
    for (std::size_t k = 1; k <= spectra.bins; ++k) x(static_cast<Eigen::Index>(k - 1)) = spectra.at(segment, k);
    return x;
}

inline BicoherenceResult empty_result(const SegmentSpectra& spectra)
{
    const std::size_t n = spectra.bins;
    BicoherenceResult r;
    r.bispectrum = PrincipalGrid<cdouble>(n);
    r.bicoherence_sq = PrincipalGrid<double>(n);
    r.denom_cross = PrincipalGrid<double>(n);
    r.denom_sum = PrincipalGrid<double>(n);
    r.defined = PrincipalGrid<std::uint8_t>(n);
    r.plan = spectra.plan;
    r.segment_count = spectra.segments;
    return r;
}

/// Fills b^2 and the defined mask from B and the denominators.
inline void normalize(BicoherenceResult& r)
{
    for (std::size_t i = 0; i < r.bispectrum.size(); ++i) {
        const double den = r.denom_cross[i] * r.denom_sum[i];
        if (r.denom_cross[i] > 0.0 && r.denom_sum[i] > 0.0 && den > 0.0) {
            r.defined[i] = 1;
            r.bicoherence_sq[i] = std::min(1.0, std::norm(r.bispectrum[i]) / den);
        } else {
            r.defined[i] = 0;
            r.bicoherence_sq[i] = 0.0;
        }
    }
}

inline void check_ensemble(const SegmentSpectra& spectra)
{
    detail::require(spectra.bins >= 2, "bicoherence: at least 2 frequency bins required");
    detail::require(spectra.segments >= 2, "bicoherence: at least 2 segments required for averaging");
    detail::require(spectra.values.size() == spectra.segments * spectra.bins, "bicoherence: malformed spectra");
}

} // namespace detail

/// C^(i) and S^(i) for one segment.
inline std::pair<CrossFrequencyMatrix, ShiftedConjugateMatrix> build_matrices(const SegmentSpectra& spectra,
                                                                              std::size_t segment)
{
    const auto n = static_cast<Eigen::Index>(spectra.bins);
    const Eigen::VectorXcd x = detail::row_vector(spectra, segment);
    CrossFrequencyMatrix c = x * x.transpose();

    // Row k of S is conj(X) shifted by -k and clipped to k <= l, k + l <= n.
    const Eigen::VectorXcd xc = x.conjugate();
    ShiftedConjugateMatrix s = ShiftedConjugateMatrix::Zero(n, n);
    for (Eigen::Index k = 1; 2 * k <= n; ++k) {
        const Eigen::Index len = n - 2 * k + 1; // l = k .. n - k
        s.row(k - 1).segment(k - 1, len) = xc.segment(2 * k - 1, len).transpose();
    }
    return {std::move(c), std::move(s)};
}

/// Streams (segment, C, S) to `fn` one segment at a time.
template <typename Fn>
void for_each_segment_matrices(const SegmentSpectra& spectra, Fn&& fn)
{
    for (std::size_t i = 0; i < spectra.segments; ++i) {
        const auto [c, s] = build_matrices(spectra, i);
        fn(i, c, s);
    }
}

/// Matrix-form estimate.
inline BicoherenceResult bicoherence(const SegmentSpectra& spectra)
{
    detail::check_ensemble(spectra);
    const auto n = static_cast<Eigen::Index>(spectra.bins);
    Eigen::MatrixXcd bsum = Eigen::MatrixXcd::Zero(n, n);
    Eigen::MatrixXd csum = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd ssum = Eigen::MatrixXd::Zero(n, n);

    for_each_segment_matrices(spectra, [&](std::size_t, const CrossFrequencyMatrix& c,
                                           const ShiftedConjugateMatrix& s) {
        bsum += c.cwiseProduct(s);
        csum += c.cwiseAbs2();
        ssum += s.cwiseAbs2();
    });

    const double inv_n = 1.0 / static_cast<double>(spectra.segments);
    auto r = detail::empty_result(spectra);
    // The matrices live on the upper triangle (row = f2 bin, col = f1 bin).
    for (const auto& cell : r.bispectrum.index().cells()) {
        const auto row = static_cast<Eigen::Index>(cell.l - 1);
        const auto col = static_cast<Eigen::Index>(cell.k - 1);
        r.bispectrum(cell.k, cell.l) = bsum(row, col) * inv_n;
        r.denom_cross(cell.k, cell.l) = csum(row, col) * inv_n;
        r.denom_sum(cell.k, cell.l) = ssum(row, col) * inv_n;
    }
    detail::normalize(r);
    return r;
}

/// Direct triple-indexed estimate; oracle for bicoherence().
inline BicoherenceResult bicoherence_naive(const SegmentSpectra& spectra)
{
    detail::check_ensemble(spectra);
    auto r = detail::empty_result(spectra);
    const double inv_n = 1.0 / static_cast<double>(spectra.segments);
    for (std::size_t l = 1; 2 * l <= spectra.bins; ++l) {
        for (std::size_t k = l; k + l <= spectra.bins; ++k) {
            cdouble b{};
            double dc = 0.0, ds = 0.0;
            for (std::size_t i = 0; i < spectra.segments; ++i) {
                const cdouble xk = spectra.at(i, k), xl = spectra.at(i, l), xkl = spectra.at(i, k + l);
                b += xk * xl * std::conj(xkl);
                dc += std::norm(xk * xl);
                ds += std::norm(xkl);
            }
            r.bispectrum(k, l) = b * inv_n;
            r.denom_cross(k, l) = dc * inv_n;
            r.denom_sum(k, l) = ds * inv_n;
        }
    }
    detail::normalize(r);
    return r;
}

// ---------------------------------------------------------------------------
// Full signed-frequency plane, for validating the symmetry relations.

/// Per-segment two-sided DFT (length 2n, same windowing and normalization as segment_spectra).
struct FullSpectra {
    std::vector<cdouble> values; // row-major segments x (2n)
    std::size_t segments = 0;
    std::size_t length = 0; // 2n

    /// X(f) for signed bin f, periodic in 2n.
    [[nodiscard]] cdouble at(std::size_t segment, long f) const noexcept
    {
        const long len = static_cast<long>(length);
        const long idx = ((f % len) + len) % len;
        return values[segment * length + static_cast<std::size_t>(idx)];
    }
};

inline FullSpectra full_segment_spectra(const SignalRecord& signal, const SegmentationPlan& plan)
{
    detail::check_fits(signal, plan);
    const std::size_t len = plan.segment_length;
    const auto window = make_window(plan.window, len);
    FullSpectra out;
    out.segments = plan.segment_count(signal.size());
    out.length = len;
    out.values.resize(out.segments * len);
    detail::ComplexDft dft(len);
    auto in = dft.input();
    const double norm = 1.0 / static_cast<double>(len);
    for (std::size_t i = 0; i < out.segments; ++i) {
        const std::size_t start = i * plan.hop();
        for (std::size_t j = 0; j < len; ++j) {
            in[j][0] = signal.samples[start + j] * window[j];
            in[j][1] = 0.0;
        }
        const auto spec = dft.execute();
        for (std::size_t j = 0; j < len; ++j) out.values[i * len + j] = cdouble(spec[j][0], spec[j][1]) * norm;
    }
    return out;
}

inline constexpr std::size_t full_plane_max_bins = 64;

/// B(f1, f2) for f1, f2 in [-n, n] inside the Nyquist hexagon |f1|, |f2|, |f1 + f2| <= n.
class FullPlaneBispectrum {
public:
    FullPlaneBispectrum() = default;
    explicit FullPlaneBispectrum(std::size_t n) : n_(static_cast<long>(n)), side_(2 * n + 1), values_(side_ * side_) {}

    [[nodiscard]] std::size_t bins() const noexcept { return static_cast<std::size_t>(n_); }
    [[nodiscard]] bool contains(long f1, long f2) const noexcept
    {
        return std::labs(f1) <= n_ && std::labs(f2) <= n_ && std::labs(f1 + f2) <= n_;
    }
    [[nodiscard]] cdouble& at(long f1, long f2) noexcept { return values_[slot(f1, f2)]; }
    [[nodiscard]] const cdouble& at(long f1, long f2) const noexcept { return values_[slot(f1, f2)]; }

private:
    [[nodiscard]] std::size_t slot(long f1, long f2) const noexcept
    {
        return static_cast<std::size_t>(f1 + n_) * side_ + static_cast<std::size_t>(f2 + n_);
    }
    long n_ = 0;
    std::size_t side_ = 0;
    std::vector<cdouble> values_;
};

inline FullPlaneBispectrum full_plane_bispectrum(const FullSpectra& spectra)
{
    detail::require(spectra.length % 2 == 0 && spectra.length >= 4, "full plane: malformed spectra");
    const std::size_t n = spectra.length / 2;
    detail::require(n <= full_plane_max_bins,
                    "full plane: n = " + std::to_string(n) + " exceeds the validation limit of " +
                        std::to_string(full_plane_max_bins));
    detail::require(spectra.segments >= 1, "full plane: no segments");

    FullPlaneBispectrum out(n);
    const long nn = static_cast<long>(n);
    const double inv_n = 1.0 / static_cast<double>(spectra.segments);
    for (long f1 = -nn; f1 <= nn; ++f1) {
        for (long f2 = -nn; f2 <= nn; ++f2) {
            if (!out.contains(f1, f2)) continue;
            cdouble acc{};
            for (std::size_t i = 0; i < spectra.segments; ++i)
                acc += spectra.at(i, f1) * spectra.at(i, f2) * std::conj(spectra.at(i, f1 + f2));
            out.at(f1, f2) = acc * inv_n;
        }
    }
    return out;
}

/// Where (f1, f2) lands in the principal region, and whether the value there is conjugated.
struct FoldedPoint {
    Cell cell;
    bool conjugate = false;
};

/// Maps a point of the Nyquist hexagon onto the principal region using
/// B(f1,f2) = B(f2,f1), B(f1,f2) = conj B(-f1,-f2), B(f1,f2) = B(-f1-f2,f2) and
/// B(f1,f2) = B(f1,-f1-f2). Points that fold onto the axis f2 = 0 have no
/// principal-region representative and yield nullopt.
inline std::optional<FoldedPoint> fold_index(long f1, long f2, std::size_t n) noexcept
{
    long t[3] = {f1, f2, -f1 - f2};
    for (long v : t)
        if (std::labs(v) > static_cast<long>(n)) return std::nullopt;
    bool conj = false;
    const auto nonneg = std::count_if(std::begin(t), std::end(t), [](long v) { return v >= 0; });
    if (nonneg < 2) {
        conj = true;
        for (auto& v : t) v = -v;
    }
    std::sort(std::begin(t), std::end(t), std::greater<>());
    const auto k = static_cast<std::size_t>(t[0]);
    const auto l = static_cast<std::size_t>(t[1]);
    if (l < 1 || k + l > n) return std::nullopt;
    return FoldedPoint{{k, l}, conj};
}

/// Principal-region representative of a full-plane bispectrum.
inline PrincipalGrid<cdouble> fold_to_principal(const FullPlaneBispectrum& full)
{
    PrincipalGrid<cdouble> out(full.bins());
    for (const auto& c : out.index().cells())
        out(c.k, c.l) = full.at(static_cast<long>(c.k), static_cast<long>(c.l));
    return out;
}

} // namespace bicoh
