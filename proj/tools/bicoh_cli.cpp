// bicoh: simulate test signals, estimate bicoherence, and filter it against a
// phase-randomized null.
//
// Exit codes: 0 success, 1 I/O error, 2 validation error.

#include <bicoh/bispectrum.hpp>
#include <bicoh/image.hpp>
#include <bicoh/io.hpp>
#include <bicoh/manifest.hpp>
#include <bicoh/scenario.hpp>
#include <bicoh/spectral.hpp>
#include <bicoh/surrogate.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace bicoh;

namespace {

constexpr int exit_io = 1;
constexpr int exit_validation = 2;

struct Common {
    std::string out_dir;
    std::string formats = "csv,bin,png";
    std::optional<std::uint64_t> seed;
};

std::set<std::string> parse_formats(const std::string& spec)
{
    std::set<std::string> out;
    for (auto part : split(spec, ',')) {
        const std::string f(part);
        if (f != "csv" && f != "bin" && f != "png") throw ValidationError("--format: unknown format '" + f + "'");
        out.insert(f);
    }
    return out;
}

fs::path output_dir(const Common& c)
{
    if (!c.out_dir.empty()) return c.out_dir;
    if (const char* env = std::getenv("BICOH_OUT_DIR"); env && *env) return env;
    return "bicoh_out";
}

fs::path prepare_dir(const Common& c)
{
    const auto dir = output_dir(c);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

nlohmann::ordered_json plan_json(const SegmentationPlan& plan, std::size_t segments)
{
    return {{"segment_length", plan.segment_length},
            {"overlap", plan.overlap_fraction},
            {"window", std::string(to_string(plan.window))},
            {"hop", plan.hop()},
            {"sample_rate_hz", plan.sample_rate},
            {"segments_N", segments},
            {"bins_n", plan.bins()},
            {"delta_f_hz", plan.delta_f()},
            {"nyquist_hz", plan.nyquist()}};
}

// --------------------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config;
};

int run_simulate(const SimulateArgs& a, const Common& c)
{
    RunManifest m;
    m.command = "simulate";
    m.started_utc = utc_now();
    auto cfg = load_scenario(a.config);
    if (c.seed) cfg.seed = *c.seed;
    const auto formats = parse_formats(c.formats);
    const auto params = resolved_oscillator(cfg);
    const auto signal = simulate_scenario(cfg);
    const auto dir = prepare_dir(c);

    for (const auto& [k, v] : cfg.raw) m.config[k] = v;
    m.master_seed = cfg.seed;
    m.derived = {{"samples", signal.size()},
                 {"sample_rate_hz", signal.sample_rate},
                 {"nonlinearity_E", params.nonlinearity},
                 {"spring_D1", params.spring_outer()},
                 {"spring_D2", params.spring_coupling()},
                 {"rk4_substeps", params.substeps}};
    if (formats.count("csv")) {
        write_signal_csv(dir / "signal.csv", signal);
        m.add_output(dir, "signal.csv");
    }
    if (formats.count("bin")) {
        write_signal_bin(dir / "signal.bin", signal);
        m.add_output(dir, "signal.bin");
    }
    m.finished_utc = utc_now();
    write_manifest(dir / "simulate.manifest.json", m);
    std::cout << "samples " << signal.size() << "\nsample_rate_hz " << format_double(signal.sample_rate)
              << "\nnonlinearity_E " << format_double(params.nonlinearity) << "\nout_dir " << dir.string() << '\n';
    return 0;
}

// --------------------------------------------------------------------------- analyze

struct PlanArgs {
    std::string signal;
    std::size_t segment_length = 512;
    double overlap = 0.5;
    std::string window = "hann";
};

SegmentationPlan make_plan(const PlanArgs& a, const SignalRecord& s)
{
    auto plan = plan_for(s, a.segment_length, a.overlap, parse_window(a.window));
    validate(plan);
    if (s.size() < plan.segment_length)
        throw ValidationError("segment length " + std::to_string(plan.segment_length) + " exceeds the signal length " +
                              std::to_string(s.size()));
    return plan;
}

void print_plan(const SegmentationPlan& plan, std::size_t segments)
{
    std::cout << "segments_N " << segments << "\ndelta_f_hz " << format_double(plan.delta_f()) << "\nnyquist_hz "
              << format_double(plan.nyquist()) << "\nbins_n " << plan.bins() << '\n';
}

int run_analyze(const PlanArgs& a, const Common& c)
{
    RunManifest m;
    m.command = "analyze";
    m.started_utc = utc_now();
    const auto formats = parse_formats(c.formats);
    const auto signal = read_signal(a.signal);
    const auto plan = make_plan(a, signal);
    const auto spectra = segment_spectra(signal, plan);
    const auto result = bicoherence(spectra);
    const auto spec = spectrogram(spectra);
    const auto dir = prepare_dir(c);

    m.config = {{"signal", a.signal}};
    m.derived = plan_json(plan, spectra.segments);
    m.derived["defined_cells"] = result.defined_count();
    if (formats.count("csv")) {
        write_bicoherence_csv(dir / "bicoherence.csv", result);
        write_spectrogram_csv(dir / "spectrogram.csv", spec);
        m.add_output(dir, "bicoherence.csv");
        m.add_output(dir, "spectrogram.csv");
    }
    if (formats.count("png")) {
        write_png(dir / "bicoherence.png", bicoherence_image(result));
        write_png(dir / "spectrogram.png", spectrogram_image(spec, 2));
        m.add_output(dir, "bicoherence.png");
        m.add_output(dir, "spectrogram.png");
    }
    m.finished_utc = utc_now();
    write_manifest(dir / "analyze.manifest.json", m);
    print_plan(plan, spectra.segments);
    return 0;
}

// --------------------------------------------------------------------------- filter / report

struct FilterArgs {
    PlanArgs plan;
    double alpha = default_alpha;
    std::size_t realizations = default_realizations;
    unsigned jobs = 0;
    std::string region = "full";
    std::vector<std::string> histograms;
};

std::string survivor_report(const FilterMask& mask, const SegmentationPlan& plan)
{
    const auto clusters = survivor_clusters(mask, plan);
    std::ostringstream r;
    r << "alpha " << format_double(mask.alpha) << '\n'
      << "realizations " << mask.realizations << '\n'
      << "evaluated_cells " << mask.evaluated_count() << '\n'
      << "survivors " << mask.survivors() << '\n'
      << "expected_false_positives " << std::fixed << std::setprecision(2) << mask.expected_false_positives << '\n'
      << "clusters " << clusters.size() << '\n';
    if (clusters.empty()) {
        r << "largest_cluster none\n";
    } else {
        r << "largest_cluster size " << clusters.front().size() << " centroid_hz " << std::setprecision(2)
          << clusters.front().centroid_f1 << ' ' << clusters.front().centroid_f2 << '\n';
    }
    for (const auto& cl : clusters) {
        if (cl.size() < 2) continue;
        r << "cluster size " << cl.size() << " centroid_hz " << std::setprecision(2) << cl.centroid_f1 << ' '
          << cl.centroid_f2 << '\n';
    }
    return r.str();
}

Cell parse_cell(const std::string& text)
{
    const auto parts = split(text, ',');
    if (parts.size() != 2) throw ValidationError("--histogram expects k,l bin indices, got '" + text + "'");
    const double k = parse_double(parts[0]), l = parse_double(parts[1]);
    if (k < 1 || l < 1) throw ValidationError("--histogram: bins must be >= 1");
    return {static_cast<std::size_t>(k), static_cast<std::size_t>(l)};
}

int run_filter(const FilterArgs& a, const Common& c)
{
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw ValidationError("--alpha must lie in (0, 1)");
    if (a.realizations < min_realizations)
        throw ValidationError("--realizations must be >= " + std::to_string(min_realizations));
    if (a.region != "full" && a.region != "plotted") throw ValidationError("--region must be full or plotted");

    RunManifest m;
    m.command = "filter";
    m.started_utc = utc_now();
    const auto formats = parse_formats(c.formats);
    const auto signal = read_signal(a.plan.signal);
    const auto plan = make_plan(a.plan, signal);
    const auto spectra = segment_spectra(signal, plan);
    const auto result = bicoherence(spectra);

    FilterOptions opt;
    opt.alpha = a.alpha;
    opt.realizations = a.realizations;
    opt.seed = c.seed.value_or(1);
    opt.jobs = a.jobs ? a.jobs : std::max(1u, std::thread::hardware_concurrency());
    opt.region = a.region == "plotted" ? Region::plotted : Region::full;
    const auto mask = filter_bicoherence(result, spectra, opt);
    const auto dir = prepare_dir(c);

    m.config = {{"signal", a.plan.signal}, {"alpha", a.alpha}, {"realizations", a.realizations}, {"region", a.region}};
    m.master_seed = opt.seed;
    m.derived = plan_json(plan, spectra.segments);
    m.derived["jobs"] = opt.jobs;
    m.derived["evaluated_cells"] = mask.evaluated_count();
    m.derived["survivors"] = mask.survivors();
    m.derived["expected_false_positives"] = mask.expected_false_positives;

    const auto report = survivor_report(mask, plan);
    {
        std::ofstream f(dir / "report.txt", std::ios::trunc);
        if (!f) throw IoError("cannot write report.txt");
        f << report;
    }
    m.add_output(dir, "report.txt");
    if (formats.count("csv")) {
        write_mask_csv(dir / "mask.csv", mask, plan);
        m.add_output(dir, "mask.csv");
    }
    if (formats.count("png")) {
        write_png(dir / "mask.png", mask_image(mask));
        m.add_output(dir, "mask.png");
    }
    for (const auto& h : a.histograms) {
        const Cell cell = parse_cell(h);
        const auto dist = surrogate_distribution(spectra, cell, a.realizations, opt.seed);
        const auto name = "histogram_" + std::to_string(cell.k) + "_" + std::to_string(cell.l) + ".csv";
        write_histogram_csv(dir / name, histogram_b(dist));
        m.add_output(dir, name);
    }
    m.finished_utc = utc_now();
    write_manifest(dir / "filter.manifest.json", m);
    print_plan(plan, spectra.segments);
    std::cout << report;
    return 0;
}

int run_report(const std::string& mask_path)
{
    const auto loaded = read_mask_csv(mask_path);
    std::cout << survivor_report(loaded.mask, loaded.plan);
    return 0;
}

int run_verify(const std::string& manifest_path)
{
    const auto bad = verify_manifest(manifest_path);
    if (bad.empty()) {
        std::cout << "ok\n";
        return 0;
    }
    for (const auto& p : bad) std::cerr << "hash mismatch: " << p << '\n';
    return exit_validation;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Bicoherence analysis with surrogate-based significance filtering"};
    app.require_subcommand(1);
    Common common;
    std::uint64_t seed_value = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out-dir", common.out_dir, "Output directory (default $BICOH_OUT_DIR or ./bicoh_out)");
        sub->add_option("--format", common.formats, "Comma-separated output formats: csv,bin,png");
        sub->add_option("--seed", seed_value, "Master seed");
    };
    auto add_plan = [&](CLI::App* sub, PlanArgs& p) {
        sub->add_option("signal", p.signal, "Signal file (.csv or .bin)")->required();
        sub->add_option("--segment-length", p.segment_length, "Samples per segment (even, >= 8)");
        sub->add_option("--overlap", p.overlap, "Overlap fraction in [0, 1)");
        sub->add_option("--window", p.window, "hann or boxcar");
    };

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate the oscillator test signal from a config file");
    simulate->add_option("--config", sim.config, "Scenario configuration file")->required();
    add_common(simulate);

    PlanArgs analyze_args;
    auto* analyze = app.add_subcommand("analyze", "Bicoherence, spectrogram and heatmaps of a signal");
    add_plan(analyze, analyze_args);
    add_common(analyze);

    FilterArgs filter_args;
    auto* filter = app.add_subcommand("filter", "Filter bicoherence against phase-randomized surrogates");
    add_plan(filter, filter_args.plan);
    add_common(filter);
    filter->add_option("--alpha", filter_args.alpha, "Confidence level in (0, 1)");
    filter->add_option("--realizations", filter_args.realizations, "Surrogate realizations per cell (>= 100)");
    filter->add_option("--jobs", filter_args.jobs, "Worker threads (0 = all cores)");
    filter->add_option("--region", filter_args.region, "full principal region or the plotted subregion");
    filter->add_option("--histogram", filter_args.histograms, "Dump the surrogate histogram of cell k,l");

    std::string mask_path;
    auto* report = app.add_subcommand("report", "Survivor report from a mask CSV");
    report->add_option("mask", mask_path, "mask.csv written by filter")->required();

    std::string manifest_path;
    auto* verify = app.add_subcommand("verify", "Re-hash the outputs listed in a manifest");
    verify->add_option("manifest", manifest_path, "Manifest JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_validation;
    }

    for (auto* sub : {simulate, analyze, filter})
        if (sub->parsed() && sub->count("--seed")) common.seed = seed_value;

    try {
        if (simulate->parsed()) return run_simulate(sim, common);
        if (analyze->parsed()) return run_analyze(analyze_args, common);
        if (filter->parsed()) return run_filter(filter_args, common);
        if (report->parsed()) return run_report(mask_path);
        if (verify->parsed()) return run_verify(manifest_path);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    }
    return 0;
}
