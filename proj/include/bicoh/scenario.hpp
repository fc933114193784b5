#pragma once

// Scenario configuration: plain-text "key = value" lines, '#' starts a comment.
//
//   mass              kg                         (default 1)
//   eigen_f1          Hz                         (default 45)
//   eigen_f2          Hz                         (default 150)
//   nonlinearity_mode off | force_deviation:<fraction> | explicit:<E>   (default off)
//   duration          s                          (default 15)
//   sample_rate       Hz                         (default 2000)
//   noise_snr         RMS(x1) / RMS(noise)       (default 5)
//   burst_count       K                          (default 4)
//   burst_sigma       s                          (default 0.1)
//   burst_centers     comma-separated s          (default: evenly spaced, duration * i / (K + 1))
//   burst_snr         RMS(x1) / RMS(burst noise) (default 0.5)
//   seed              unsigned 64-bit            (default 1)
//   initial_state     x1,v1,x2,v2                (default 1,0,0,0)
//   substeps          RK4 steps per sample       (default 64)

#include "error.hpp"
#include "rng.hpp"
#include "signal.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace bicoh {

enum class NonlinearityMode { off, force_deviation, explicit_value };

struct ScenarioConfig {
    OscillatorParams oscillator;
    NonlinearityMode nonlinearity_mode = NonlinearityMode::off;
    double nonlinearity_value = 0.0; // fraction or E depending on the mode
    NoiseSpec noise;
    std::size_t burst_count = 4;
    double burst_sigma = 0.1;
    std::optional<std::vector<double>> burst_centers;
    double burst_snr = 0.5;
    std::uint64_t seed = 1;

    /// Entries exactly as read, for the run manifest.
    std::map<std::string, std::string> raw;

    [[nodiscard]] BurstSpec bursts() const
    {
        BurstSpec b;
        b.count = burst_count;
        b.centers = burst_centers ? *burst_centers : evenly_spaced_centers(burst_count, oscillator.duration);
        b.width = burst_sigma;
        b.multiplier_snr = burst_snr;
        return b;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double config_number(std::string_view key, std::string_view text)
{
    text = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v))
        throw ValidationError("config key '" + std::string(key) + "': '" + std::string(text) + "' is not a number");
    return v;
}

inline std::vector<double> config_list(std::string_view key, std::string_view text)
{
    std::vector<double> out;
    text = trim(text);
    if (text.empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = text.find(',', start);
        out.push_back(config_number(key, text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::size_t config_count(std::string_view key, std::string_view text)
{
    const double v = config_number(key, text);
    if (v < 0.0 || v != std::floor(v))
        throw ValidationError("config key '" + std::string(key) + "': must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

} // namespace detail

inline std::uint64_t parse_seed(std::string_view key, std::string_view text)
{
    text = detail::trim(text);
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ValidationError("config key '" + std::string(key) + "': '" + std::string(text) +
                              "' is not an unsigned integer");
    return v;
}

/// Checks the cross-field invariants; names the offending key.
inline void validate(const ScenarioConfig& c)
{
    const auto& o = c.oscillator;
    auto req = [](bool ok, const char* key, const std::string& msg) {
        if (!ok) throw ValidationError("config key '" + std::string(key) + "': " + msg);
    };
    req(o.mass > 0.0, "mass", "must be > 0");
    req(o.eigen_f1 > 0.0, "eigen_f1", "must be > 0");
    req(o.eigen_f2 > o.eigen_f1, "eigen_f2", "must exceed eigen_f1");
    req(o.duration > 0.0, "duration", "must be > 0");
    req(o.sample_rate > 0.0, "sample_rate", "must be > 0");
    req(o.sample_count() >= 2, "duration", "duration * sample_rate must give at least 2 samples");
    req(o.substeps >= 1, "substeps", "must be >= 1");
    req(c.noise.snr > 0.0, "noise_snr", "must be > 0");
    req(c.burst_sigma > 0.0, "burst_sigma", "must be > 0");
    req(c.burst_count == 0 || c.burst_snr > 0.0, "burst_snr", "must be > 0");
    req(c.nonlinearity_mode != NonlinearityMode::force_deviation || c.nonlinearity_value >= 0.0,
        "nonlinearity_mode", "force deviation must be >= 0");
    if (c.burst_centers) {
        req(c.burst_centers->size() == c.burst_count, "burst_centers", "count differs from burst_count");
        for (double t : *c.burst_centers) req(t >= 0.0 && t <= o.duration, "burst_centers", "must lie within [0, duration]");
    }
}

inline ScenarioConfig parse_scenario(std::istream& in)
{
    ScenarioConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = detail::trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const auto key = std::string(detail::trim(view.substr(0, eq)));
        const auto value = detail::trim(view.substr(eq + 1));
        c.raw[key] = std::string(value);

        auto& o = c.oscillator;
        if (key == "mass") o.mass = detail::config_number(key, value);
        else if (key == "eigen_f1") o.eigen_f1 = detail::config_number(key, value);
        else if (key == "eigen_f2") o.eigen_f2 = detail::config_number(key, value);
        else if (key == "duration") o.duration = detail::config_number(key, value);
        else if (key == "sample_rate") o.sample_rate = detail::config_number(key, value);
        else if (key == "noise_snr") c.noise.snr = detail::config_number(key, value);
        else if (key == "burst_count") c.burst_count = detail::config_count(key, value);
        else if (key == "burst_sigma") c.burst_sigma = detail::config_number(key, value);
        else if (key == "burst_centers") c.burst_centers = detail::config_list(key, value);
        else if (key == "burst_snr") c.burst_snr = detail::config_number(key, value);
        else if (key == "seed") c.seed = parse_seed(key, value);
        else if (key == "substeps") {
            const auto s = detail::config_count(key, value);
            o.substeps = static_cast<int>(s);
        } else if (key == "initial_state") {
            const auto v = detail::config_list(key, value);
            if (v.size() != 4) throw ValidationError("config key 'initial_state': expected x1,v1,x2,v2");
            o.initial_state = {v[0], v[1], v[2], v[3]};
        } else if (key == "nonlinearity_mode") {
            if (value == "off") {
                c.nonlinearity_mode = NonlinearityMode::off;
            } else if (value.rfind("force_deviation:", 0) == 0) {
                c.nonlinearity_mode = NonlinearityMode::force_deviation;
                c.nonlinearity_value = detail::config_number(key, value.substr(16));
            } else if (value.rfind("explicit:", 0) == 0) {
                c.nonlinearity_mode = NonlinearityMode::explicit_value;
                c.nonlinearity_value = detail::config_number(key, value.substr(9));
            } else {
                throw ValidationError("config key 'nonlinearity_mode': expected off, force_deviation:<fraction> "
                                      "or explicit:<value>");
            }
        } else {
            throw ValidationError("config key '" + key + "': unknown key");
        }
    }
    validate(c);
    return c;
}

inline ScenarioConfig parse_scenario(const std::string& text)
{
    std::istringstream in(text);
    return parse_scenario(in);
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config '" + path.string() + "'");
    return parse_scenario(f);
}

/// Oscillator parameters with E resolved from the configured mode.
inline OscillatorParams resolved_oscillator(const ScenarioConfig& c)
{
    auto p = c.oscillator;
    switch (c.nonlinearity_mode) {
    case NonlinearityMode::off: p.nonlinearity = 0.0; break;
    case NonlinearityMode::explicit_value: p.nonlinearity = c.nonlinearity_value; break;
    case NonlinearityMode::force_deviation: p.nonlinearity = calibrate_force_deviation(p, c.nonlinearity_value); break;
    }
    return p;
}

/// x(t) = x1 + measurement noise + bursts for the configured scenario.
inline SignalRecord simulate_scenario(const ScenarioConfig& c)
{
    const auto params = resolved_oscillator(c);
    const auto osc = simulate_oscillator(params);
    auto x = compose_test_signal(osc, c.noise, c.bursts(), c.seed);
    x.label = "scenario";
    return x;
}

} // namespace bicoh
