// Signal model: oscillator integration, noise and burst generators, composition.

#include <bicoh/signal.hpp>
#include <bicoh/spectral.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace bicoh;
using Catch::Approx;

namespace {

// x1(t) of the linear system from diagonalizing the stiffness matrix, independent of RK4.
std::vector<double> normal_mode_x1(const OscillatorParams& p)
{
    const double d1 = p.spring_outer(), d2 = p.spring_coupling();
    Eigen::Matrix2d k;
    k << d1 + d2, -d2, -d2, d1 + d2;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(k / p.mass);
    const Eigen::Matrix2d modes = eig.eigenvectors();
    const Eigen::Vector2d omega = eig.eigenvalues().cwiseSqrt();
    const Eigen::Vector2d x0(p.initial_state[0], p.initial_state[2]);
    const Eigen::Vector2d v0(p.initial_state[1], p.initial_state[3]);
    const Eigen::Vector2d q0 = modes.transpose() * x0;
    const Eigen::Vector2d qd0 = modes.transpose() * v0;

    std::vector<double> out(p.sample_count());
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double t = static_cast<double>(j) / p.sample_rate;
        Eigen::Vector2d q;
        for (int m = 0; m < 2; ++m) q(m) = q0(m) * std::cos(omega(m) * t) + qd0(m) / omega(m) * std::sin(omega(m) * t);
        out[j] = (modes * q)(0);
    }
    return out;
}

double max_abs(const std::vector<double>& x)
{
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

} // namespace

TEST_CASE("derived spring constants reproduce the eigenfrequencies", "[signal][oscillator]")
{
    OscillatorParams p;
    const double d1 = p.spring_outer(), d2 = p.spring_coupling();
    CHECK(std::sqrt(d1 / p.mass) == Approx(p.omega1()).epsilon(1e-14));
    CHECK(std::sqrt((2 * d2 + d1) / p.mass) == Approx(p.omega2()).epsilon(1e-14));
}

TEST_CASE("linear oscillator matches the normal-mode solution", "[signal][oscillator]")
{
    OscillatorParams p; // 45 / 150 Hz, x1(0) = 1, 15 s at 2 kHz
    const auto sim = simulate_oscillator(p);
    const auto exact = normal_mode_x1(p);
    REQUIRE(sim.size() == 30000);
    double err = 0.0;
    for (std::size_t j = 0; j < exact.size(); ++j) err = std::max(err, std::abs(sim.samples[j] - exact[j]));
    CHECK(err / max_abs(exact) < 1e-6);

    SECTION("other initial states")
    {
        p.initial_state = {0.3, -20.0, -0.7, 55.0};
        p.duration = 5.0;
        const auto s2 = simulate_oscillator(p);
        const auto e2 = normal_mode_x1(p);
        double err2 = 0.0;
        for (std::size_t j = 0; j < e2.size(); ++j) err2 = std::max(err2, std::abs(s2.samples[j] - e2[j]));
        CHECK(err2 / max_abs(e2) < 1e-6);
    }
}

TEST_CASE("linear oscillator conserves energy", "[signal][oscillator]")
{
    OscillatorParams p;
    const auto traj = integrate_oscillator(p);
    const double e0 = linear_energy(p, traj.states.front());
    double drift = 0.0;
    for (const auto& s : traj.states) drift = std::max(drift, std::abs(linear_energy(p, s) - e0) / e0);
    CHECK(drift < 1e-4);
}

TEST_CASE("zero initial energy gives a zero signal", "[signal][oscillator]")
{
    OscillatorParams p;
    p.initial_state = {0, 0, 0, 0};
    p.nonlinearity = 1e4;
    const auto s = simulate_oscillator(p);
    CHECK(std::all_of(s.samples.begin(), s.samples.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("linear response scales with the initial state", "[signal][oscillator]")
{
    OscillatorParams p;
    p.duration = 3.0;
    const auto base = simulate_oscillator(p);
    for (double c : {1e-3, 2.5, 1e3}) {
        auto q = p;
        for (auto& v : q.initial_state) v *= c;
        const auto scaled = simulate_oscillator(q);
        double err = 0.0;
        for (std::size_t j = 0; j < base.size(); ++j) err = std::max(err, std::abs(scaled.samples[j] - c * base.samples[j]));
        CHECK(err / (std::abs(c) * max_abs(base.samples)) < 1e-10);
    }
}

TEST_CASE("linear spectrum has peaks only at the eigenfrequencies", "[signal][oscillator]")
{
    OscillatorParams p;
    const auto s = simulate_oscillator(p);
    // One boxcar segment over the whole record: 1/15 Hz resolution, 45 and 150 Hz on-grid.
    const auto spectra = segment_spectra(s, SegmentationPlan{30000, 0.0, Window::boxcar, p.sample_rate});
    std::vector<std::pair<double, std::size_t>> mags;
    for (std::size_t k = 1; k <= spectra.bins; ++k) mags.emplace_back(std::abs(spectra.at(0, k)), k);
    std::sort(mags.rbegin(), mags.rend());
    const double f_a = spectra.plan.frequency(mags[0].second), f_b = spectra.plan.frequency(mags[1].second);
    CHECK(std::min(f_a, f_b) == Approx(45.0));
    CHECK(std::max(f_a, f_b) == Approx(150.0));
    CHECK(mags[2].first < 0.05 * mags[1].first);
}

TEST_CASE("oscillator parameter validation", "[signal][oscillator]")
{
    OscillatorParams p;
    SECTION("eigenfrequency ordering") { p.eigen_f2 = 40.0; }
    SECTION("equal eigenfrequencies") { p.eigen_f2 = p.eigen_f1; }
    SECTION("mass") { p.mass = 0.0; }
    SECTION("duration") { p.duration = 0.0; }
    CHECK_THROWS_AS(simulate_oscillator(p), ValidationError);
}

TEST_CASE("strong nonlinearity is reported as divergence", "[signal][oscillator]")
{
    OscillatorParams p;
    p.nonlinearity = 50.0 * p.spring_outer();
    CHECK_THROWS_AS(simulate_oscillator(p), DivergenceError);
}

TEST_CASE("force-deviation calibration", "[signal][oscillator]")
{
    OscillatorParams p;
    const double e = calibrate_force_deviation(p, 0.6);
    const auto lin = simulate_oscillator(p);
    const double peak = max_abs(lin.samples);
    CHECK(e * peak * peak / (p.spring_outer() * peak) == Approx(0.6).epsilon(1e-12));
    CHECK(peak == Approx(1.0).margin(1e-9)); // x1(0) = 1 is the peak
}

TEST_CASE("white noise", "[signal][noise]")
{
    SECTION("standard deviation")
    {
        const auto n = white_noise(1'000'000, 1.0, 7);
        const double mean = std::accumulate(n.samples.begin(), n.samples.end(), 0.0) / 1e6;
        double var = 0.0;
        for (double v : n.samples) var += (v - mean) * (v - mean);
        CHECK(std::sqrt(var / (1e6 - 1)) == Approx(1.0).epsilon(0.01));
        CHECK(std::abs(mean) < 0.01);
    }
    SECTION("zero rms")
    {
        const auto n = white_noise(100, 0.0, 7);
        CHECK(std::all_of(n.samples.begin(), n.samples.end(), [](double v) { return v == 0.0; }));
    }
    SECTION("deterministic per seed")
    {
        CHECK(white_noise(1000, 0.3, 11).samples == white_noise(1000, 0.3, 11).samples);
        CHECK(white_noise(1000, 0.3, 11).samples != white_noise(1000, 0.3, 12).samples);
    }
    SECTION("preconditions") { CHECK_THROWS_AS(white_noise(0, 1.0, 1), ValidationError); }
}

namespace {

SignalRecord reference_oscillator()
{
    return simulate_oscillator(OscillatorParams{});
}

BurstSpec reference_bursts()
{
    BurstSpec b;
    b.count = 4;
    b.centers = {3.0, 6.0, 9.0, 12.0};
    b.width = 0.1;
    b.multiplier_snr = 0.5;
    return b;
}

} // namespace

TEST_CASE("burst train", "[signal][bursts]")
{
    const auto osc = reference_oscillator();
    const auto spec = reference_bursts();

    SECTION("no bursts gives zeros")
    {
        BurstSpec none;
        const auto x = burst_train(none, osc, 3);
        CHECK(std::all_of(x.samples.begin(), x.samples.end(), [](double v) { return v == 0.0; }));
    }
    SECTION("envelope peaks at an isolated centre")
    {
        BurstSpec one;
        one.count = 1;
        one.centers = {7.5};
        CHECK(burst_envelope(one, 7.5) == 1.0);
        CHECK(burst_envelope(one, 7.5) > burst_envelope(one, 7.49));
        CHECK(burst_envelope(one, 7.5) > burst_envelope(one, 7.51));
        CHECK(burst_envelope(one, 7.6) == Approx(std::exp(-0.5)));
    }
    SECTION("negligible outside the burst span")
    {
        const auto x = burst_train(spec, osc, 3);
        const double carrier_rms = rms(osc.samples) / spec.multiplier_snr;
        const double lo = 3.0 - 6 * spec.width, hi = 12.0 + 6 * spec.width;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double t = x.time_at(j);
            if (t < lo || t > hi) REQUIRE(std::abs(x.samples[j]) <= std::exp(-18.0) * 6.0 * carrier_rms);
        }
    }
    SECTION("four broadband stripes near the centres")
    {
        const auto x = burst_train(spec, osc, 3);
        const auto sg = spectrogram(x, plan_for(x));
        std::vector<std::pair<double, double>> power_at; // (broadband power, time)
        for (std::size_t c = 0; c < sg.cols(); ++c) {
            double p = 0.0;
            for (std::size_t r = 0; r < sg.rows(); ++r) p += sg.at(r, c);
            power_at.emplace_back(p, sg.times[c]);
        }
        // Local maxima above 10% of the strongest column.
        double top = 0.0;
        for (auto& [p, t] : power_at) top = std::max(top, p);
        std::vector<double> peaks;
        for (std::size_t c = 1; c + 1 < power_at.size(); ++c)
            if (power_at[c].first > 0.1 * top && power_at[c].first >= power_at[c - 1].first &&
                power_at[c].first >= power_at[c + 1].first)
                peaks.push_back(power_at[c].second);
        REQUIRE(peaks.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(peaks[i] - spec.centers[i]) < 0.2);
    }
    SECTION("deterministic") { CHECK(burst_train(spec, osc, 9).samples == burst_train(spec, osc, 9).samples); }
    SECTION("invalid spec")
    {
        auto bad = spec;
        bad.width = 0.0;
        CHECK_THROWS_AS(burst_train(bad, osc, 1), ValidationError);
        bad = spec;
        bad.centers.back() = 20.0;
        CHECK_THROWS_AS(burst_train(bad, osc, 1), ValidationError);
    }
}

TEST_CASE("composed test signal", "[signal][compose]")
{
    const auto osc = reference_oscillator();
    const std::uint64_t seed = 42;

    SECTION("degenerate composition is the oscillator")
    {
        const auto x = compose_test_signal(osc, NoiseSpec{1e9}, BurstSpec{}, seed);
        std::vector<double> diff(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) diff[j] = x.samples[j] - osc.samples[j];
        CHECK(rms(diff) / rms(osc.samples) < 1e-6);
    }
    SECTION("measurement noise at snr 5")
    {
        const auto bursts = reference_bursts();
        const auto x = compose_test_signal(osc, NoiseSpec{5.0}, bursts, seed);
        const auto p = burst_train(bursts, osc, derive_seed(seed, Stream::burst_noise));
        std::vector<double> resid(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) resid[j] = x.samples[j] - osc.samples[j] - p.samples[j];
        CHECK(rms(resid) / rms(osc.samples) == Approx(0.2).epsilon(0.02));
    }
    SECTION("deterministic")
    {
        CHECK(compose_test_signal(osc, NoiseSpec{5.0}, reference_bursts(), seed).samples ==
              compose_test_signal(osc, NoiseSpec{5.0}, reference_bursts(), seed).samples);
    }
    SECTION("mismatched components")
    {
        auto shorter = osc;
        shorter.samples.pop_back();
        CHECK_THROWS_AS(add(osc, shorter), ValidationError);
        auto other_rate = osc;
        other_rate.sample_rate = 1000.0;
        CHECK_THROWS_AS(add(osc, other_rate), ValidationError);
    }
    SECTION("invalid snr") { CHECK_THROWS_AS(compose_test_signal(osc, NoiseSpec{0.0}, BurstSpec{}, seed), ValidationError); }
}

TEST_CASE("signal record invariants", "[signal]")
{
    SignalRecord s{{1.0, NAN}, 10.0, "x"};
    CHECK_THROWS_AS(validate(s), ValidationError);
    s.samples = {1.0};
    CHECK_THROWS_AS(validate(s), ValidationError);
    s.samples = {1.0, 2.0};
    s.sample_rate = 0.0;
    CHECK_THROWS_AS(validate(s), ValidationError);
}
