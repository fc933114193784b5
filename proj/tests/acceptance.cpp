// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <bicoh/bispectrum.hpp>
#include <bicoh/io.hpp>
#include <bicoh/manifest.hpp>
#include <bicoh/scenario.hpp>
#include <bicoh/signal.hpp>
#include <bicoh/spectral.hpp>
#include <bicoh/surrogate.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

using namespace bicoh;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 3)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// --------------------------------------------------------------------------- 1

Outcome oracle_equivalence()
{
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> bins(2, 32), segs(2, 16);
    std::normal_distribution<double> g;
    std::bernoulli_distribution zero(0.1);
    double worst = 0.0;
    std::size_t mask_mismatch = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        auto s = SegmentSpectra::zeros(segs(rng), bins(rng));
        for (std::size_t k = 1; k <= s.bins; ++k) {
            const bool dead = t % 4 == 0 && zero(rng);
            for (std::size_t i = 0; i < s.segments; ++i) s.at(i, k) = dead ? cdouble{} : cdouble(g(rng), g(rng));
        }
        const auto a = bicoherence(s);
        const auto b = bicoherence_naive(s);
        for (std::size_t off = 0; off < a.bicoherence_sq.size(); ++off) {
            worst = std::max(worst, std::abs(a.bicoherence_sq[off] - b.bicoherence_sq[off]));
            if (a.defined[off] != b.defined[off]) ++mask_mismatch;
        }
    }
    return {worst <= 1e-12 && mask_mismatch == 0,
            std::to_string(trials) + " inputs, max |diff| " + fmt(worst) + ", mask mismatches " +
                std::to_string(mask_mismatch)};
}

// --------------------------------------------------------------------------- 2

Outcome symmetry_suite()
{
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t n : {8u, 17u, 32u, 64u}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto x = white_noise(2 * n * 8, 1.0, 1000 * n + seed, 1.0);
            const auto full = full_plane_bispectrum(full_segment_spectra(x, SegmentationPlan{2 * n, 0.5, Window::hann, 1.0}));
            const long nn = static_cast<long>(n);
            double scale = 0.0;
            for (long a = -nn; a <= nn; ++a)
                for (long b = -nn; b <= nn; ++b)
                    if (full.contains(a, b)) scale = std::max(scale, std::abs(full.at(a, b)));
            for (long a = -nn; a <= nn; ++a) {
                for (long b = -nn; b <= nn; ++b) {
                    if (!full.contains(a, b)) continue;
                    const cdouble v = full.at(a, b);
                    for (cdouble w : {full.at(b, a), std::conj(full.at(-a, -b)), full.at(-a - b, b), full.at(a, -a - b)})
                        worst = std::max(worst, std::abs(v - w) / scale);
                    ++checked;
                }
            }
        }
    }
    return {worst <= 1e-12, std::to_string(checked) + " points, max relative deviation " + fmt(worst)};
}

// --------------------------------------------------------------------------- 3

double triad_b2(bool coupled, std::uint64_t seed)
{
    const std::size_t len = 256, segments = 64, k1 = 19, k2 = 44;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ph(0.0, 2 * std::numbers::pi);
    SignalRecord s;
    s.sample_rate = 1000.0;
    for (std::size_t i = 0; i < segments; ++i) {
        const double p1 = ph(rng), p2 = ph(rng), p3 = ph(rng);
        const double p_sum = coupled ? p1 + p2 : p3;
        for (std::size_t j = 0; j < len; ++j) {
            const double w = 2 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len);
            s.samples.push_back(std::cos(w * k1 + p1) + 0.8 * std::cos(w * k2 + p2) + 0.5 * std::cos(w * (k1 + k2) + p_sum));
        }
    }
    const auto r = bicoherence(segment_spectra(s, SegmentationPlan{len, 0.0, Window::boxcar, 1000.0}));
    return r.bicoherence_sq(k2, k1);
}

Outcome coupled_triad()
{
    const double coupled = triad_b2(true, 3), free = triad_b2(false, 3);
    return {coupled >= 0.99 && free < 0.2, "N=64: coupled b^2 " + fmt(coupled, 6) + ", independent b^2 " + fmt(free)};
}

// --------------------------------------------------------------------------- 4

Outcome random_bicoherence_density()
{
    const std::size_t segments = 10, realizations = 20000;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0), ph(0.0, 2 * std::numbers::pi);
    auto spectra = [&](bool uniform) {
        auto s = SegmentSpectra::zeros(segments, 4);
        for (std::size_t i = 0; i < segments; ++i) {
            const double a = uniform ? u(rng) : 1.0;
            for (std::size_t k = 1; k <= 4; ++k) s.at(i, k) = std::polar(a, ph(rng));
        }
        return s;
    };
    auto stats = [&](const SegmentSpectra& s) {
        const auto d = surrogate_distribution(s, {2, 1}, realizations, 4);
        double m = 0.0, q = 0.0;
        for (double b2 : d.b_squared) m += std::sqrt(b2);
        m /= static_cast<double>(realizations);
        for (double b2 : d.b_squared) q += (std::sqrt(b2) - m) * (std::sqrt(b2) - m);
        return std::pair{m, q / static_cast<double>(realizations - 1)};
    };
    const auto [mu, vu] = stats(spectra(true));
    const auto [mc, vc] = stats(spectra(false));
    const double z = (mu - mc) / std::sqrt((vu + vc) / static_cast<double>(realizations));
    const double p = 0.5 * std::erfc(z / std::numbers::sqrt2);
    return {mu > mc && p < 1e-6, "R=" + std::to_string(realizations) + ", N=10: mean b uniform " + fmt(mu, 4) +
                                     " vs constant " + fmt(mc, 4) + ", z " + fmt(z) + ", p " + fmt(p)};
}

// --------------------------------------------------------------------------- 5, 6

struct ScenarioRun {
    SegmentationPlan plan;
    std::size_t high_cells = 0; // b^2 > 0.3 in the plotted subregion
    FilterMask mask;
    std::vector<Cluster> clusters;
};

ScenarioRun run_scenario(const fs::path& config)
{
    const auto cfg = load_scenario(config);
    const auto x = simulate_scenario(cfg);
    ScenarioRun out;
    out.plan = plan_for(x, 512, 0.5, Window::hann);
    const auto spectra = segment_spectra(x, out.plan);
    const auto result = bicoherence(spectra);
    const std::size_t n = result.bins();
    for (const auto& c : result.bicoherence_sq.index().cells())
        if (in_plotted_region(n, c.k, c.l) && result.is_defined(c.k, c.l) && result.bicoherence_sq(c.k, c.l) > 0.3)
            ++out.high_cells;
    out.mask = filter_bicoherence(result, spectra, FilterOptions{0.997, 2000, cfg.seed, worker_count(), Region::plotted});
    out.clusters = survivor_clusters(out.mask, out.plan);
    return out;
}

/// Smallest k with P(X <= k) >= p for X ~ Poisson(lambda).
std::size_t poisson_quantile(double lambda, double p)
{
    double term = std::exp(-lambda), cdf = term;
    std::size_t k = 0;
    while (cdf < p) {
        ++k;
        term *= lambda / static_cast<double>(k);
        cdf += term;
    }
    return k;
}

Outcome linear_cleanup(const ScenarioRun& r)
{
    const double expected = r.mask.expected_false_positives;
    const std::size_t lo = poisson_quantile(expected, 0.005), hi = poisson_quantile(expected, 0.995);
    const std::size_t survivors = r.mask.survivors();
    const std::size_t largest = r.clusters.empty() ? 0 : r.clusters.front().size();
    const bool ok = r.high_cells >= 50 && survivors >= lo && survivors <= hi && largest < 9;
    return {ok, "pre-filter cells b^2>0.3: " + std::to_string(r.high_cells) + "; survivors " + std::to_string(survivors) +
                    " (expected " + fmt(expected) + ", 99% band " + std::to_string(lo) + "-" + std::to_string(hi) +
                    "); largest cluster " + std::to_string(largest)};
}

Outcome nonlinear_retention(const ScenarioRun& r)
{
    const double tol = 2.0 * r.plan.delta_f();
    std::string found;
    auto near = [&](double f1, double f2) {
        for (const auto& cl : r.clusters) {
            if (cl.size() < 2) continue;
            if (std::abs(cl.centroid_f1 - f1) <= tol && std::abs(cl.centroid_f2 - f2) <= tol) {
                found += " (" + fmt(cl.centroid_f1, 4) + ", " + fmt(cl.centroid_f2, 4) + ") size " +
                         std::to_string(cl.size()) + ";";
                return true;
            }
        }
        found += " none near (" + fmt(f1) + ", " + fmt(f2) + ");";
        return false;
    };
    const bool a = near(45.0, 45.0);
    const bool b = near(150.0, 45.0);
    return {a && b, "survivors " + std::to_string(r.mask.survivors()) + ", clusters:" + found};
}

// --------------------------------------------------------------------------- 7

Outcome null_calibration()
{
    const auto x = white_noise(30000, 1.0, 7, 2000.0);
    const SegmentationPlan plan{128, 0.5, Window::hann, 2000.0};
    const auto spectra = segment_spectra(x, plan);
    const auto result = bicoherence(spectra);
    bool ok = true;
    std::string detail;
    for (double alpha : {0.9, 0.99}) {
        const auto m = filter_bicoherence(result, spectra, FilterOptions{alpha, 2000, 70, worker_count(), Region::full});
        const double cells = static_cast<double>(m.evaluated_count());
        const double p = 1.0 - alpha;
        const double sigma = std::sqrt(cells * p * alpha);
        const double dev = (static_cast<double>(m.survivors()) - cells * p) / sigma;
        ok = ok && std::abs(dev) <= 3.0;
        detail += "alpha " + fmt(alpha) + ": " + std::to_string(m.survivors()) + "/" + std::to_string(m.evaluated_count()) +
                  " (expected " + fmt(cells * p) + ", " + fmt(dev, 2) + " sigma); ";
    }
    return {ok, detail};
}

// --------------------------------------------------------------------------- 8

Outcome physics_oracle()
{
    OscillatorParams p;
    const auto traj = integrate_oscillator(p);

    const double d1 = p.spring_outer(), d2 = p.spring_coupling();
    Eigen::Matrix2d k;
    k << d1 + d2, -d2, -d2, d1 + d2;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(k / p.mass);
    const Eigen::Matrix2d modes = eig.eigenvectors();
    const Eigen::Vector2d omega = eig.eigenvalues().cwiseSqrt();
    const Eigen::Vector2d q0 = modes.transpose() * Eigen::Vector2d(p.initial_state[0], p.initial_state[2]);
    const Eigen::Vector2d qd0 = modes.transpose() * Eigen::Vector2d(p.initial_state[1], p.initial_state[3]);

    double err = 0.0, peak = 0.0, drift = 0.0;
    const double e0 = linear_energy(p, traj.states.front());
    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        const double t = static_cast<double>(j) / p.sample_rate;
        Eigen::Vector2d q;
        for (int m = 0; m < 2; ++m) q(m) = q0(m) * std::cos(omega(m) * t) + qd0(m) / omega(m) * std::sin(omega(m) * t);
        const double exact = (modes * q)(0);
        err = std::max(err, std::abs(traj.states[j][0] - exact));
        peak = std::max(peak, std::abs(exact));
        drift = std::max(drift, std::abs(linear_energy(p, traj.states[j]) - e0) / e0);
    }
    const double rel = err / peak;
    return {rel < 1e-6 && drift < 1e-4, "max relative error " + fmt(rel) + ", energy drift " + fmt(drift) + " (" +
                                            std::to_string(p.substeps) + " RK4 substeps per sample)"};
}

// --------------------------------------------------------------------------- 9

int cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(BICOH_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const fs::path& config)
{
    const auto root = fs::temp_directory_path() / ("bicoh_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    struct Variant {
        std::string name;
        unsigned jobs;
    };
    const std::vector<Variant> variants{{"run1_jobs1", 1}, {"run2_jobs1", 1}, {"run3_jobs2", 2}, {"run4_jobs4", 4}};
    const std::vector<std::string> files{"signal.csv", "bicoherence.csv", "spectrogram.csv", "mask.csv"};
    std::vector<std::vector<std::string>> hashes;
    for (const auto& v : variants) {
        const auto dir = root / v.name;
        const auto log = root / (v.name + ".log");
        const std::string out = " --out-dir " + dir.string();
        if (cli("simulate --config " + config.string() + out, log) != 0 ||
            cli("analyze " + (dir / "signal.csv").string() + out, log) != 0 ||
            cli("filter " + (dir / "signal.csv").string() + " --region plotted --jobs " + std::to_string(v.jobs) + out, log) !=
                0) {
            fs::remove_all(root);
            return {false, "pipeline failed for " + v.name};
        }
        std::vector<std::string> h;
        for (const auto& f : files) h.push_back(sha256_file(dir / f));
        hashes.push_back(std::move(h));
    }
    fs::remove_all(root);
    std::size_t mismatches = 0;
    for (std::size_t i = 1; i < hashes.size(); ++i)
        for (std::size_t f = 0; f < files.size(); ++f) mismatches += hashes[i][f] != hashes[0][f];
    return {mismatches == 0, std::to_string(variants.size()) + " runs (jobs 1,1,2,4) x " + std::to_string(files.size()) +
                                 " CSV files, " + std::to_string(mismatches) + " hash mismatches"};
}

} // namespace

int main()
{
    const fs::path configs = BICOH_CONFIG_DIR;
    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failures;
        std::printf("%s criterion %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
        std::fflush(stdout);
    };

    report(1, "oracle equivalence", oracle_equivalence);
    report(2, "symmetry suite", symmetry_suite);
    report(3, "coupled triad", coupled_triad);
    report(4, "random bicoherence density", random_bicoherence_density);

    ScenarioRun linear, nonlinear;
    report(5, "linear burst cleanup", [&] {
        linear = run_scenario(configs / "linear.cfg");
        return linear_cleanup(linear);
    });
    report(6, "nonlinear detection retention", [&] {
        nonlinear = run_scenario(configs / "nonlinear.cfg");
        return nonlinear_retention(nonlinear);
    });
    report(7, "null calibration", null_calibration);
    report(8, "physics oracle", physics_oracle);
    report(9, "determinism", [&] { return determinism(configs / "nonlinear.cfg"); });

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
