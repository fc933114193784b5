#pragma once

#include <cstdint>
#include <numbers>
#include <random>

namespace bicoh {

/// SplitMix64 step: golden-ratio increment followed by the finalizer.
/// Used to derive independent stream seeds and as the surrogate engine.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// SplitMix64 generator (UniformRandomBitGenerator). An order of magnitude
/// cheaper than mt19937_64, which matters in the surrogate inner loop.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    constexpr explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    constexpr result_type operator()() noexcept
    {
        const auto out = mix64(state_);
        state_ += 0x9e3779b97f4a7c15ULL;
        return out;
    }

private:
    std::uint64_t state_;
};

using Engine = SplitMix64;

/// Seed-splitting rule: child = mix64(mix64(master ^ mix64(a)) ^ b).
/// Every (a, b) pair under one master seed gets its own stream.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept
{
    return mix64(mix64(master ^ mix64(a)) ^ b);
}

/// Named streams for the signal generators.
enum class Stream : std::uint64_t {
    measurement_noise = 1,
    burst_noise = 2,
    surrogate = 3,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream s) noexcept
{
    return derive_seed(master, static_cast<std::uint64_t>(s));
}

/// Uniform double in [0, 1) from the top 53 bits; identical across standard libraries.
inline double uniform01(Engine& eng) noexcept
{
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform_phase(Engine& eng) noexcept
{
    return 2.0 * std::numbers::pi * uniform01(eng);
}

} // namespace bicoh
