#pragma once

// Significance filtering of a measured bicoherence against a phase-randomized null.
//
// For a cell (k, l) every realization keeps the measured per-segment magnitudes
// |X_k|, |X_l|, |X_{k+l}| and draws three independent uniform phases per segment.
// The resulting b^2 samples estimate the random-bicoherence density of that cell;
// its alpha-quantile is the critical value b^c and a cell survives when b >= b^c.
//
// Cell streams: Engine(cell_seed(master, cell)), so results do not depend on
// the order in which cells are processed or on the number of workers.

#include "bispectrum.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "triangle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <queue>
#include <span>
#include <thread>
#include <vector>

namespace bicoh {

inline constexpr std::size_t min_realizations = 100;
inline constexpr double default_alpha = 0.997;
inline constexpr std::size_t default_realizations = 2000;

inline std::uint64_t cell_seed(std::uint64_t master, Cell c) noexcept
{
    return derive_seed(derive_seed(master, Stream::surrogate), c.k, c.l);
}

struct SurrogateDistribution {
    Cell cell;
    std::size_t realizations = 0;
    std::vector<double> b_squared; // one value per realization, in [0, 1]
};

/// Magnitude data a cell's null depends on.
struct CellAmplitudes {
    std::vector<double> weights; // |X_k| |X_l| |X_{k+l}| per segment
    double denominator = 0.0;    // E(|X_k X_l|^2) * E(|X_{k+l}|^2)

    [[nodiscard]] bool defined() const noexcept { return denominator > 0.0; }
};

inline CellAmplitudes cell_amplitudes(const SegmentSpectra& spectra, Cell c)
{
    CellAmplitudes a;
    a.weights.resize(spectra.segments);
    double dc = 0.0, ds = 0.0;
    for (std::size_t i = 0; i < spectra.segments; ++i) {
        const double mk = std::abs(spectra.at(i, c.k));
        const double ml = std::abs(spectra.at(i, c.l));
        const double ms = std::abs(spectra.at(i, c.k + c.l));
        a.weights[i] = mk * ml * ms;
        dc += (mk * ml) * (mk * ml);
        ds += ms * ms;
    }
    const double inv = 1.0 / static_cast<double>(spectra.segments);
    a.denominator = (dc * inv) * (ds * inv);
    return a;
}

/// Uniformly distributed unit phasor: a point drawn uniformly in the unit disk, normalized.
inline cdouble random_phasor(Engine& eng) noexcept
{
    for (;;) {
        const double x = 2.0 * uniform01(eng) - 1.0;
        const double y = 2.0 * uniform01(eng) - 1.0;
        const double r2 = x * x + y * y;
        if (r2 <= 1.0 && r2 > 1e-300) {
            const double inv = 1.0 / std::sqrt(r2);
            return {x * inv, y * inv};
        }
    }
}

/// Draws `realizations` surrogate b^2 values for one cell and hands each to `sink`.
///
/// Each segment's term is w_i exp(j(phi1 + phi2 - phi3)) with three independent
/// uniform phases. That combined phase is itself uniform on [0, 2 pi), so a single
/// uniform phasor per segment is drawn for it.
template <typename Sink>
void draw_surrogates(const CellAmplitudes& amps, std::size_t realizations, std::uint64_t seed, Sink&& sink)
{
    Engine eng(seed);
    const double segments = static_cast<double>(amps.weights.size());
    const double scale = 1.0 / (segments * segments * amps.denominator);
    for (std::size_t r = 0; r < realizations; ++r) {
        double re = 0.0, im = 0.0;
        for (double w : amps.weights) {
            const cdouble z = random_phasor(eng);
            re += w * z.real();
            im += w * z.imag();
        }
        sink(std::min(1.0, (re * re + im * im) * scale));
    }
}

inline SurrogateDistribution surrogate_distribution(const SegmentSpectra& spectra, Cell cell,
                                                    std::size_t realizations, std::uint64_t seed)
{
    detail::require(spectra.segments >= 1, "surrogate: empty spectra");
    detail::require(PrincipalIndex(spectra.bins).contains(cell.k, cell.l),
                    "surrogate: cell (" + std::to_string(cell.k) + ", " + std::to_string(cell.l) +
                        ") is outside the principal region");
    detail::require(realizations >= min_realizations,
                    "surrogate: at least " + std::to_string(min_realizations) + " realizations required");
    const auto amps = cell_amplitudes(spectra, cell);
    detail::require(amps.defined(), "surrogate: cell has zero amplitude in every segment");

    SurrogateDistribution d;
    d.cell = cell;
    d.realizations = realizations;
    d.b_squared.reserve(realizations);
    draw_surrogates(amps, realizations, cell_seed(seed, cell), [&](double v) { d.b_squared.push_back(v); });
    return d;
}

/// 1-based rank of the alpha-quantile order statistic, ceil(alpha * R) clamped to [1, R].
inline std::size_t quantile_rank(double alpha, std::size_t count) noexcept
{
    // The relative guard keeps products like 0.9 * 10 from rounding up a whole rank.
    const double raw = alpha * static_cast<double>(count) * (1.0 - 1e-12);
    const auto r = static_cast<std::size_t>(std::ceil(raw));
    return std::clamp<std::size_t>(r, 1, count);
}

/// ceil(alpha R)-th smallest sample, on the samples' own scale.
inline double order_statistic(std::span<const double> samples, double alpha)
{
    detail::require(!samples.empty(), "order statistic of an empty sample");
    detail::require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    std::vector<double> v(samples.begin(), samples.end());
    const auto r = quantile_rank(alpha, v.size());
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(r - 1), v.end());
    return v[r - 1];
}

/// b^c(alpha) on the b scale (square root of the b^2 order statistic).
inline double critical_value(const SurrogateDistribution& dist, double alpha)
{
    return std::sqrt(order_statistic(dist.b_squared, alpha));
}

/// Retains only the largest R - r + 1 values; its minimum is the r-th order statistic.
class UpperTail {
public:
    UpperTail(double alpha, std::size_t realizations)
        : keep_(realizations - quantile_rank(alpha, realizations) + 1)
    {
    }
    void push(double v)
    {
        if (heap_.size() < keep_) {
            heap_.push(v);
        } else if (v > heap_.top()) {
            heap_.pop();
            heap_.push(v);
        }
    }
    [[nodiscard]] double order_statistic() const { return heap_.top(); }

private:
    std::size_t keep_;
    std::priority_queue<double, std::vector<double>, std::greater<>> heap_;
};

/// Counts of b over `bins` equal-width bins on [0, 1].
struct Histogram {
    std::vector<double> edges; // bins + 1
    std::vector<std::size_t> counts;
};

inline Histogram histogram_b(const SurrogateDistribution& dist, std::size_t bins = 100)
{
    detail::require(bins >= 1, "histogram: bins must be >= 1");
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double b2 : dist.b_squared) {
        const double b = std::sqrt(b2);
        auto idx = static_cast<std::size_t>(b * static_cast<double>(bins));
        h.counts[std::min(idx, bins - 1)]++;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Plane-wide filtering

enum class Region { full, plotted };

struct FilterOptions {
    double alpha = default_alpha;
    std::size_t realizations = default_realizations;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    Region region = Region::full;
};

struct FilterMask {
    PrincipalGrid<std::uint8_t> significant;
    PrincipalGrid<std::uint8_t> evaluated; // defined cells inside the requested region
    PrincipalGrid<double> measured_b;
    PrincipalGrid<double> critical; // b^c, NaN where not evaluated
    double alpha = 0.0;
    std::size_t realizations = 0;
    double expected_false_positives = 0.0;

    [[nodiscard]] std::size_t survivors() const noexcept
    {
        return static_cast<std::size_t>(std::count(significant.begin(), significant.end(), std::uint8_t{1}));
    }
    [[nodiscard]] std::size_t evaluated_count() const noexcept
    {
        return static_cast<std::size_t>(std::count(evaluated.begin(), evaluated.end(), std::uint8_t{1}));
    }
};

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Work items must write disjoint state.
template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn)
{
    jobs = std::max(1u, jobs);
    if (jobs == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

inline FilterMask filter_bicoherence(const BicoherenceResult& result, const SegmentSpectra& spectra,
                                     const FilterOptions& opt)
{
    detail::require(opt.alpha > 0.0 && opt.alpha < 1.0, "alpha must lie in (0, 1)");
    detail::require(opt.realizations >= min_realizations,
                    "at least " + std::to_string(min_realizations) + " realizations required");
    detail::require(result.plan == spectra.plan && result.segment_count == spectra.segments &&
                        result.bins() == spectra.bins,
                    "filter: bicoherence result and spectra come from different segmentations");

    const std::size_t n = result.bins();
    FilterMask m;
    m.significant = PrincipalGrid<std::uint8_t>(n);
    m.evaluated = PrincipalGrid<std::uint8_t>(n);
    m.measured_b = PrincipalGrid<double>(n);
    m.critical = PrincipalGrid<double>(n, std::numeric_limits<double>::quiet_NaN());
    m.alpha = opt.alpha;
    m.realizations = opt.realizations;

    std::vector<Cell> work;
    for (const auto& c : result.bicoherence_sq.index().cells()) {
        m.measured_b(c.k, c.l) = result.is_defined(c.k, c.l) ? result.b(c.k, c.l) : 0.0;
        if (!result.is_defined(c.k, c.l)) continue;
        if (opt.region == Region::plotted && !in_plotted_region(n, c.k, c.l)) continue;
        work.push_back(c);
        m.evaluated(c.k, c.l) = 1;
    }

    parallel_for(work.size(), opt.jobs, [&](std::size_t i) {
        const Cell c = work[i];
        const auto amps = cell_amplitudes(spectra, c);
        UpperTail tail(opt.alpha, opt.realizations);
        draw_surrogates(amps, opt.realizations, cell_seed(opt.seed, c), [&](double v) { tail.push(v); });
        const double bc = std::sqrt(tail.order_statistic());
        m.critical(c.k, c.l) = bc;
        m.significant(c.k, c.l) = m.measured_b(c.k, c.l) >= bc ? 1 : 0;
    });

    m.expected_false_positives = static_cast<double>(work.size()) * (1.0 - opt.alpha);
    return m;
}

// ---------------------------------------------------------------------------
// Survivor clusters

struct Cluster {
    std::vector<Cell> cells;
    double centroid_f1 = 0.0; // Hz
    double centroid_f2 = 0.0; // Hz

    [[nodiscard]] std::size_t size() const noexcept { return cells.size(); }
};

/// 8-connected components of the significant cells, largest first.
inline std::vector<Cluster> survivor_clusters(const FilterMask& mask, const SegmentationPlan& plan)
{
    const auto& idx = mask.significant.index();
    std::vector<std::uint8_t> seen(idx.size(), 0);
    std::vector<Cluster> out;
    for (std::size_t off = 0; off < idx.size(); ++off) {
        if (!mask.significant[off] || seen[off]) continue;
        Cluster cl;
        std::vector<std::size_t> stack{off};
        seen[off] = 1;
        while (!stack.empty()) {
            const Cell c = idx.cell(stack.back());
            stack.pop_back();
            cl.cells.push_back(c);
            for (int dk = -1; dk <= 1; ++dk) {
                for (int dl = -1; dl <= 1; ++dl) {
                    if (dk == 0 && dl == 0) continue;
                    const long k = static_cast<long>(c.k) + dk, l = static_cast<long>(c.l) + dl;
                    if (k < 1 || l < 1) continue;
                    const auto nb = idx.find(static_cast<std::size_t>(k), static_cast<std::size_t>(l));
                    if (nb && mask.significant[*nb] && !seen[*nb]) {
                        seen[*nb] = 1;
                        stack.push_back(*nb);
                    }
                }
            }
        }
        for (const auto& c : cl.cells) {
            cl.centroid_f1 += plan.frequency(c.k);
            cl.centroid_f2 += plan.frequency(c.l);
        }
        cl.centroid_f1 /= static_cast<double>(cl.size());
        cl.centroid_f2 /= static_cast<double>(cl.size());
        std::sort(cl.cells.begin(), cl.cells.end(),
                  [](const Cell& a, const Cell& b) { return a.l != b.l ? a.l < b.l : a.k < b.k; });
        out.push_back(std::move(cl));
    }
    std::stable_sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) { return a.size() > b.size(); });
    return out;
}

} // namespace bicoh
