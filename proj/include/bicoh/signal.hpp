#pragma once

// Time-series container and the test-signal generators: a two-mass
// oscillator with a quadratic spring term, white measurement noise and
// Gaussian-envelope broadband bursts.

#include "error.hpp"
#include "rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bicoh {

struct SignalRecord {
    std::vector<double> samples;
    double sample_rate = 0.0; // Hz
    std::string label;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] double duration() const noexcept
    {
        return static_cast<double>(samples.size()) / sample_rate;
    }
    [[nodiscard]] double time_at(std::size_t j) const noexcept
    {
        return static_cast<double>(j) / sample_rate;
    }
};

/// Throws ValidationError unless the record satisfies the container invariants.
inline void validate(const SignalRecord& s)
{
    detail::require(std::isfinite(s.sample_rate) && s.sample_rate > 0.0,
                    "signal: sample_rate must be > 0");
    detail::require(s.samples.size() >= 2, "signal: at least 2 samples required");
    detail::require(std::all_of(s.samples.begin(), s.samples.end(),
                                [](double v) { return std::isfinite(v); }),
                    "signal: samples must be finite");
}

inline double rms(std::span<const double> x) noexcept
{
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

// ---------------------------------------------------------------------------
// Oscillator

/// (x1, v1, x2, v2) in m and m/s.
using OscillatorState = std::array<double, 4>;

struct OscillatorParams {
    double mass = 1.0;          // kg, both bodies
    double eigen_f1 = 45.0;     // Hz
    double eigen_f2 = 150.0;    // Hz
    double nonlinearity = 0.0;  // E, N/m^2
    OscillatorState initial_state{1.0, 0.0, 0.0, 0.0};
    double duration = 15.0;     // s
    double sample_rate = 2000.0; // Hz
    /// RK4 steps per output sample.
    int substeps = 64;

    [[nodiscard]] double omega1() const noexcept { return 2.0 * std::numbers::pi * eigen_f1; }
    [[nodiscard]] double omega2() const noexcept { return 2.0 * std::numbers::pi * eigen_f2; }
    /// Outer spring constant, D1 = m w1^2.
    [[nodiscard]] double spring_outer() const noexcept { return mass * omega1() * omega1(); }
    /// Coupling spring constant, D2 = m (w2^2 - w1^2) / 2.
    [[nodiscard]] double spring_coupling() const noexcept
    {
        return mass * (omega2() * omega2() - omega1() * omega1()) / 2.0;
    }
    [[nodiscard]] std::size_t sample_count() const noexcept
    {
        return static_cast<std::size_t>(std::llround(duration * sample_rate));
    }
};

inline void validate(const OscillatorParams& p)
{
    detail::require(std::isfinite(p.mass) && p.mass > 0.0, "oscillator: mass must be > 0");
    detail::require(std::isfinite(p.eigen_f1) && p.eigen_f1 > 0.0, "oscillator: eigen_f1 must be > 0");
    detail::require(std::isfinite(p.eigen_f2) && p.eigen_f2 > p.eigen_f1,
                    "oscillator: eigen_f2 must exceed eigen_f1 (coupling spring D2 <= 0)");
    detail::require(p.spring_coupling() > 0.0, "oscillator: derived coupling spring D2 must be > 0");
    detail::require(std::isfinite(p.duration) && p.duration > 0.0, "oscillator: duration must be > 0");
    detail::require(std::isfinite(p.sample_rate) && p.sample_rate > 0.0,
                    "oscillator: sample_rate must be > 0");
    detail::require(std::isfinite(p.nonlinearity), "oscillator: nonlinearity must be finite");
    detail::require(p.substeps >= 1, "oscillator: substeps must be >= 1");
    detail::require(p.sample_count() >= 2, "oscillator: duration * sample_rate must give >= 2 samples");
    for (double v : p.initial_state)
        detail::require(std::isfinite(v), "oscillator: initial state must be finite");
}

/// Full state sampled at t_j = j / sample_rate.
struct OscillatorTrajectory {
    std::vector<OscillatorState> states;
    double sample_rate = 0.0;
};

namespace detail {

struct OscillatorRhs {
    double inv_mass, d1, d2, e;

    OscillatorState operator()(const OscillatorState& s) const noexcept
    {
        const double x1 = s[0], x2 = s[2];
        const double a1 = (-d1 * x1 + d2 * (x2 - x1) + e * x1 * x1) * inv_mass;
        const double a2 = (-d1 * x2 - d2 * (x2 - x1)) * inv_mass;
        return {s[1], a1, s[3], a2};
    }
};

inline OscillatorState axpy(const OscillatorState& y, double h, const OscillatorState& k) noexcept
{
    return {y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]};
}

} // namespace detail

/// Integrates the two-mass system with classical fixed-step RK4.
/// Throws DivergenceError once |x| exceeds 1e6 times the initial amplitude.
inline OscillatorTrajectory integrate_oscillator(const OscillatorParams& p)
{
    validate(p);
    const detail::OscillatorRhs rhs{1.0 / p.mass, p.spring_outer(), p.spring_coupling(), p.nonlinearity};
    const double h = 1.0 / (p.sample_rate * p.substeps);

    const auto& s0 = p.initial_state;
    const double amplitude0 = std::max({std::abs(s0[0]), std::abs(s0[2]),
                                        std::abs(s0[1]) / p.omega1(), std::abs(s0[3]) / p.omega1()});
    const double bound = 1e6 * amplitude0;

    OscillatorTrajectory out;
    out.sample_rate = p.sample_rate;
    const std::size_t count = p.sample_count();
    out.states.reserve(count);

    OscillatorState y = s0;
    out.states.push_back(y);
    for (std::size_t j = 1; j < count; ++j) {
        for (int s = 0; s < p.substeps; ++s) {
            const auto k1 = rhs(y);
            const auto k2 = rhs(detail::axpy(y, h / 2, k1));
            const auto k3 = rhs(detail::axpy(y, h / 2, k2));
            const auto k4 = rhs(detail::axpy(y, h, k3));
            for (int c = 0; c < 4; ++c)
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        const bool finite = std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
        if (!finite || std::abs(y[0]) > bound || std::abs(y[2]) > bound)
            throw DivergenceError("oscillator diverged at t = " + std::to_string(static_cast<double>(j) / p.sample_rate) +
                                  " s; nonlinearity too strong for the initial state");
        out.states.push_back(y);
    }
    return out;
}

/// Displacement x1(t) of the first body.
inline SignalRecord simulate_oscillator(const OscillatorParams& p)
{
    const auto traj = integrate_oscillator(p);
    SignalRecord out;
    out.sample_rate = p.sample_rate;
    out.label = "oscillator_x1";
    out.samples.reserve(traj.states.size());
    for (const auto& s : traj.states) out.samples.push_back(s[0]);
    return out;
}

/// Total mechanical energy of the linear (E = 0) system.
inline double linear_energy(const OscillatorParams& p, const OscillatorState& s) noexcept
{
    const double d1 = p.spring_outer(), d2 = p.spring_coupling();
    const double dx = s[2] - s[0];
    return 0.5 * p.mass * (s[1] * s[1] + s[3] * s[3]) + 0.5 * d1 * (s[0] * s[0] + s[2] * s[2]) +
           0.5 * d2 * dx * dx;
}

/// Nonlinearity giving |E x^2| / |D1 x| = fraction at the linear run's peak displacement of body 1.
inline double calibrate_force_deviation(OscillatorParams p, double fraction)
{
    detail::require(std::isfinite(fraction) && fraction >= 0.0, "force deviation must be >= 0");
    p.nonlinearity = 0.0;
    const auto lin = simulate_oscillator(p);
    double peak = 0.0;
    for (double v : lin.samples) peak = std::max(peak, std::abs(v));
    detail::require(peak > 0.0, "force deviation calibration needs a nonzero linear response");
    return fraction * p.spring_outer() / peak;
}

// ---------------------------------------------------------------------------
// Noise and bursts

struct NoiseSpec {
    double snr = 5.0; // RMS(signal) / RMS(noise)
};

struct BurstSpec {
    std::size_t count = 0;
    std::vector<double> centers; // s
    double width = 0.1;          // sigma, s
    double multiplier_snr = 0.5; // RMS(base) / RMS(noise carrier)
};

inline void validate(const NoiseSpec& n)
{
    detail::require(std::isfinite(n.snr) && n.snr > 0.0, "noise: snr must be > 0");
}

inline void validate(const BurstSpec& b, double duration)
{
    detail::require(b.centers.size() == b.count, "bursts: number of centers must equal burst count");
    detail::require(std::isfinite(b.width) && b.width > 0.0, "bursts: width must be > 0");
    detail::require(b.count == 0 || (std::isfinite(b.multiplier_snr) && b.multiplier_snr > 0.0),
                    "bursts: multiplier snr must be > 0");
    for (double c : b.centers)
        detail::require(c >= 0.0 && c <= duration, "bursts: centers must lie within [0, duration]");
}

/// K centers spread evenly over the record: duration * i / (K + 1).
inline std::vector<double> evenly_spaced_centers(std::size_t count, double duration)
{
    std::vector<double> c(count);
    for (std::size_t i = 0; i < count; ++i)
        c[i] = duration * static_cast<double>(i + 1) / static_cast<double>(count + 1);
    return c;
}

/// Zero-mean i.i.d. Gaussian samples with standard deviation `rms`.
inline SignalRecord white_noise(std::size_t length, double rms_amplitude, std::uint64_t seed,
                                double sample_rate = 1.0)
{
    detail::require(length >= 1, "white_noise: length must be >= 1");
    detail::require(std::isfinite(rms_amplitude) && rms_amplitude >= 0.0, "white_noise: rms must be >= 0");
    SignalRecord out;
    out.sample_rate = sample_rate;
    out.label = "white_noise";
    out.samples.resize(length, 0.0);
    if (rms_amplitude == 0.0) return out;
    Engine eng(seed);
    std::normal_distribution<double> dist(0.0, rms_amplitude);
    for (auto& v : out.samples) v = dist(eng);
    return out;
}

/// Sum of Gaussian envelopes exp(-(t - t_i)^2 / (2 sigma^2)).
inline double burst_envelope(const BurstSpec& spec, double t) noexcept
{
    double env = 0.0;
    const double inv = 1.0 / (2.0 * spec.width * spec.width);
    for (double c : spec.centers) env += std::exp(-(t - c) * (t - c) * inv);
    return env;
}

namespace detail {
inline void rescale_to_rms(std::vector<double>& x, double target)
{
    const double current = rms(x);
    if (current == 0.0) return;
    const double g = target / current;
    for (auto& v : x) v *= g;
}
} // namespace detail

/// Fresh white noise amplitude-modulated by the burst envelope. The noise carrier
/// is scaled so that RMS(base) / RMS(carrier) equals `multiplier_snr`.
inline SignalRecord burst_train(const BurstSpec& spec, const SignalRecord& base, std::uint64_t seed)
{
    validate(base);
    validate(spec, base.duration());
    SignalRecord out;
    out.sample_rate = base.sample_rate;
    out.label = "bursts";
    out.samples.assign(base.size(), 0.0);
    if (spec.count == 0) return out;

    auto carrier = white_noise(base.size(), 1.0, seed, base.sample_rate).samples;
    detail::rescale_to_rms(carrier, rms(base.samples) / spec.multiplier_snr);
    for (std::size_t j = 0; j < out.samples.size(); ++j)
        out.samples[j] = carrier[j] * burst_envelope(spec, base.time_at(j));
    return out;
}

/// Measurement noise scaled so that RMS(osc) / RMS(noise) equals `spec.snr`.
inline SignalRecord measurement_noise(const NoiseSpec& spec, const SignalRecord& osc, std::uint64_t seed)
{
    validate(spec);
    auto n = white_noise(osc.size(), 1.0, seed, osc.sample_rate);
    detail::rescale_to_rms(n.samples, rms(osc.samples) / spec.snr);
    n.label = "measurement_noise";
    return n;
}

/// x(t) = x1(t) + x_n(t) + x_p(t). Component streams are derived from `seed`
/// with derive_seed(seed, Stream::measurement_noise / Stream::burst_noise).
inline SignalRecord compose_test_signal(const SignalRecord& osc, const NoiseSpec& noise,
                                        const BurstSpec& bursts, std::uint64_t seed)
{
    validate(osc);
    const auto n = measurement_noise(noise, osc, derive_seed(seed, Stream::measurement_noise));
    const auto p = burst_train(bursts, osc, derive_seed(seed, Stream::burst_noise));
    if (n.size() != osc.size() || p.size() != osc.size() || n.sample_rate != osc.sample_rate ||
        p.sample_rate != osc.sample_rate)
        throw ValidationError("compose: component length or sample rate mismatch");

    SignalRecord out;
    out.sample_rate = osc.sample_rate;
    out.label = "composed";
    out.samples.resize(osc.size());
    for (std::size_t j = 0; j < osc.size(); ++j) out.samples[j] = osc.samples[j] + n.samples[j] + p.samples[j];
    return out;
}

/// Element-wise sum of records sharing length and rate.
inline SignalRecord add(const SignalRecord& a, const SignalRecord& b)
{
    if (a.size() != b.size() || a.sample_rate != b.sample_rate)
        throw ValidationError("add: length or sample rate mismatch");
    SignalRecord out = a;
    for (std::size_t j = 0; j < a.size(); ++j) out.samples[j] += b.samples[j];
    return out;
}

} // namespace bicoh
