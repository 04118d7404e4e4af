// SPDX-License-Identifier: Apache-2.0
//
// chemu - emulator for non-stationary MIMO wireless channels
// Copyright (C) 2026 The chemu authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// chemu command line: generate, project, reconstruct, emulate, metrics, pipeline.
// Exit codes: 0 ok, 1 usage, 2 data or format error, 3 numeric failure.
// Every subcommand computes all of its outputs in memory before writing any file.

#include "chemu/engine.hpp"
#include "chemu/iofmt.hpp"
#include "chemu/metrics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace chemu;

namespace
{
enum ExitCode
{
    exit_ok = 0,
    exit_usage = 1,
    exit_data = 2,
    exit_numeric = 3
};

// Files staged for writing once the whole command has succeeded
class Outputs
{
public:
    void add(fs::path path, Bytes bytes) { files_.emplace_back(std::move(path), std::move(bytes)); }
    void add(fs::path path, const std::string &text) { add(std::move(path), Bytes(text.begin(), text.end())); }
    void commit() const
    {
        for (const auto &[path, bytes] : files_)
        {
            if (path.has_parent_path())
                fs::create_directories(path.parent_path());
            write_file(path, bytes);
        }
    }

private:
    std::vector<std::pair<fs::path, Bytes>> files_;
};

std::uint64_t fnv1a(const Bytes &bytes)
{
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint8_t b : bytes)
    {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

int next_power_of_two(int n)
{
    int p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

ScenarioConfig load_scenario(const std::string &path, std::optional<std::uint64_t> seed)
{
    ScenarioConfig config = read_scenario(path);
    if (seed)
        config.rng_seed = *seed;
    return config;
}

// ---- stage helpers shared by the single-stage commands and the pipeline --------------

struct ProjectParams
{
    int k = 30;
    double tw = 0.1;
    int passes = 2;
};

std::vector<ProjectionPackage> run_projection(const CtfGrid &ctf, const RangeProvider &ranges,
                                              const ProjectParams &params)
{
    if (ctf.n_time() < 2)
        throw std::invalid_argument("project: CTF needs at least two time samples");
    const double t_step = ctf.t_axis[1] - ctf.t_axis[0];
    const int per_window = static_cast<int>(std::lround(params.tw / t_step));
    if (per_window < 1)
        throw std::invalid_argument("project: window shorter than one time sample");
    const auto windows = make_windows(ctf.n_time(), per_window, params.k);
    try
    {
        return project_grid(ctf, windows, ranges, {params.k, params.passes});
    }
    catch (const NearDependentBasis &e)
    {
        throw NearDependentBasis("project (K = " + std::to_string(params.k) + ", T_w = " + std::to_string(params.tw) +
                                     " s): " + e.what(),
                                 e.column(), e.pivot_ratio());
    }
}

struct EmulateParams
{
    int nfft = 0;         // 0: derived
    double tau_max = 0.0; // s
    bool single_precision = false;
    bool zero_outside_band = false;
    std::optional<double> t0;
};

struct EmulateResult
{
    SignalData output;
    std::vector<BlockStats> stats;
    EngineConfig engine;
};

EmulateResult run_emulation(const ChannelSource &source, const SignalData &input, const EmulateParams &params)
{
    if (!(input.sample_rate > 0.0))
        throw std::invalid_argument("emulate: input signal has no positive sample rate");
    EngineConfig cfg;
    cfg.sample_period = 1.0 / input.sample_rate;
    cfg.tau_max = params.tau_max;
    cfg.n_tx = source.n_tx();
    cfg.n_rx = source.n_rx();
    cfg.single_precision = params.single_precision;
    cfg.zero_outside_band = params.zero_outside_band;
    cfg.n_fft = params.nfft > 0 ? params.nfft : std::max(next_power_of_two(2 * (cfg.n_overlap() + 1)), 64);
    if (static_cast<int>(input.channels.size()) != cfg.n_tx)
        throw std::invalid_argument("emulate: signal has " + std::to_string(input.channels.size()) +
                                    " channels, the channel has " + std::to_string(cfg.n_tx) + " Tx antennas");
    const Engine engine(cfg);
    StreamResult r = engine.run_stream(source, input.channels, params.t0.value_or(source.t_begin()));
    EmulateResult out;
    out.output.sample_rate = input.sample_rate;
    out.output.single_precision = input.single_precision;
    out.output.channels = std::move(r.outputs);
    out.stats = std::move(r.stats);
    out.engine = cfg;
    return out;
}

std::string stats_csv(const std::vector<BlockStats> &stats)
{
    std::ostringstream s;
    write_stats_csv(s, stats);
    return s.str();
}

std::string error_csv(const CtfGrid &a, const CtfGrid &b, int q, int p)
{
    std::ostringstream s;
    write_error_csv(s, ctf_error(a, b, q, p));
    return s.str();
}

// Writes CSV to a file when a path is given, else to stdout
void emit_csv(Outputs &outputs, const std::string &path, const std::string &csv)
{
    if (path.empty() || path == "-")
        std::cout << csv;
    else
        outputs.add(path, csv);
}

// ---- pipeline -------------------------------------------------------------------------

struct PipelineParams
{
    std::string scenario_text;
    std::string input;
    ProjectParams project;
    EmulateParams emulate;
    bool tau_max_given = false;
};

nlohmann::ordered_json run_pipeline(const PipelineParams &params, const fs::path &out_dir, Outputs &outputs)
{
    const ScenarioConfig config = parse_scenario(params.scenario_text);
    const Bytes input_bytes = read_file(params.input);
    const SignalData input = decode_signal(input_bytes);

    const ClusterTimeline timeline = simulate_cluster_timeline(config);
    const CtfGrid ctf = ctf_grid_from_clusters(config, timeline.clusters);
    const auto packages = run_projection(ctf, ranges_from_clusters(config, timeline.clusters), params.project);
    const CtfGrid rebuilt = reconstruct_grid(packages);

    EmulateParams em = params.emulate;
    if (!params.tau_max_given)
        em.tau_max = estimate_tau_max(config, timeline.clusters);
    const PackageSource source(packages);
    const EmulateResult emulated = run_emulation(source, input, em);

    outputs.add(out_dir / "channel.ctf", encode_ctf(ctf));
    outputs.add(out_dir / "channel.pkg", encode_packages(packages));
    outputs.add(out_dir / "output.sig", encode_signal(emulated.output));
    outputs.add(out_dir / "error.csv", error_csv(ctf, rebuilt, 0, 0));
    outputs.add(out_dir / "stats.csv", stats_csv(emulated.stats));

    nlohmann::ordered_json m;
    m["tool"] = "chemu";
    m["command"] = "pipeline";
    m["manifest_version"] = 1;
    m["format_version"] = format_version;
    m["scenario"] = params.scenario_text;
    m["input"] = params.input;
    m["input_fnv1a64"] = hex(fnv1a(input_bytes));
    m["k"] = params.project.k;
    m["tw"] = params.project.tw;
    m["passes"] = params.project.passes;
    m["nfft"] = emulated.engine.n_fft;
    m["tau_max"] = em.tau_max;
    m["n_overlap"] = emulated.engine.n_overlap();
    m["sample_period"] = emulated.engine.sample_period;
    m["single_precision"] = em.single_precision;
    m["zero_outside_band"] = em.zero_outside_band;
    m["t0"] = em.t0.value_or(source.t_begin());
    m["n_windows"] = packages.size();
    m["worst_error_db"] = worst_error_db(ctf, rebuilt);
    m["outputs"] = {"channel.ctf", "channel.pkg", "output.sig", "error.csv", "stats.csv", "manifest.json"};
    outputs.add(out_dir / "manifest.json", m.dump(2) + "\n");
    return m;
}

PipelineParams params_from_manifest(const fs::path &path)
{
    const Bytes bytes = read_file(path);
    nlohmann::json m;
    try
    {
        m = nlohmann::json::parse(bytes.begin(), bytes.end());
    }
    catch (const nlohmann::json::exception &e)
    {
        throw FormatError("manifest " + path.string() + ": " + e.what());
    }
    try
    {
        if (m.at("manifest_version").get<int>() != 1 || m.at("format_version").get<int>() != format_version)
            throw FormatError("manifest " + path.string() + ": unsupported version");
        PipelineParams p;
        p.scenario_text = m.at("scenario").get<std::string>();
        p.input = m.at("input").get<std::string>();
        p.project.k = m.at("k").get<int>();
        p.project.tw = m.at("tw").get<double>();
        p.project.passes = m.at("passes").get<int>();
        p.emulate.nfft = m.at("nfft").get<int>();
        p.emulate.tau_max = m.at("tau_max").get<double>();
        p.emulate.single_precision = m.at("single_precision").get<bool>();
        p.emulate.zero_outside_band = m.at("zero_outside_band").get<bool>();
        p.emulate.t0 = m.at("t0").get<double>();
        p.tau_max_given = true;
        if (hex(fnv1a(read_file(p.input))) != m.at("input_fnv1a64").get<std::string>())
            throw FormatError("manifest input " + p.input + " changed since the manifest was written");
        return p;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw FormatError("manifest " + path.string() + ": " + e.what());
    }
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"chemu: non-stationary MIMO channel emulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "chemu 1.0");

    std::optional<std::uint64_t> seed;
    std::string scenario_path, ctf_path, compare_path, package_path, in_path, out_path, stats_path, out_dir,
        manifest_path;
    ProjectParams project;
    EmulateParams emulate;
    std::vector<double> alpha_range, beta_range;
    double t0 = 0.0;

    // generate
    auto *gen = app.add_subcommand("generate", "Simulate the scenario's CTF grid");
    gen->add_option("--scenario", scenario_path, "Scenario file (key = value)")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", out_path, "Output CTF file")->required();
    gen->add_option("--seed", seed, "Override the scenario's seed");

    // project
    auto *proj = app.add_subcommand("project", "Project a CTF grid onto per-window chirp bases");
    proj->add_option("--ctf", ctf_path, "Input CTF file")->required()->check(CLI::ExistingFile);
    proj->add_option("--out", out_path, "Output package file")->required();
    proj->add_option("--k", project.k, "Chirps per window")->capture_default_str()->check(CLI::PositiveNumber);
    proj->add_option("--tw", project.tw, "Window length, s")->capture_default_str()->check(CLI::PositiveNumber);
    proj->add_option("--passes", project.passes, "Gram-Schmidt sweeps (1 or 2)")
        ->capture_default_str()
        ->check(CLI::Range(1, 2));
    auto *proj_scen = proj->add_option("--scenario", scenario_path, "Scenario that produced the CTF; chirp ranges "
                                                                    "follow its cluster geometry")
                          ->check(CLI::ExistingFile);
    proj->add_option("--seed", seed, "Override the scenario's seed");
    auto *proj_alpha = proj->add_option("--alpha-range", alpha_range, "Fixed alpha range lo hi, Hz")->expected(2);
    auto *proj_beta = proj->add_option("--beta-range", beta_range, "Fixed beta range lo hi, Hz/s")->expected(2);
    proj_alpha->needs(proj_beta);
    proj_beta->needs(proj_alpha);
    proj_scen->excludes(proj_alpha);

    // reconstruct
    auto *rec = app.add_subcommand("reconstruct", "Rebuild the CTF grid from a package file");
    rec->add_option("--package", package_path, "Input package file")->required()->check(CLI::ExistingFile);
    rec->add_option("--out", out_path, "Output CTF file")->required();

    // emulate
    auto *emu = app.add_subcommand("emulate", "Stream a signal through the channel");
    auto *emu_pkg = emu->add_option("--package", package_path, "Channel as a package file")->check(CLI::ExistingFile);
    auto *emu_ctf = emu->add_option("--ctf", ctf_path, "Channel as a CTF file")->check(CLI::ExistingFile);
    emu_pkg->excludes(emu_ctf);
    emu->add_option("--in", in_path, "Input signal file (one channel per Tx antenna)")
        ->required()
        ->check(CLI::ExistingFile);
    emu->add_option("--out", out_path, "Output signal file")->required();
    emu->add_option("--nfft", emulate.nfft, "Transform size N_H (power of two; 0 = smallest >= 2 (N_a + 1))")
        ->capture_default_str();
    emu->add_option("--tau-max", emulate.tau_max, "Longest emulated delay, s")
        ->required()
        ->check(CLI::PositiveNumber);
    auto *emu_t0 = emu->add_option("--t0", t0, "Channel time of the first sample, s (default: channel start)");
    emu->add_flag("--single-precision", emulate.single_precision, "Round every stage to float32");
    emu->add_flag("--zero-outside-band", emulate.zero_outside_band,
                  "Oversampled signal: bins outside the channel band get zero gain");
    emu->add_option("--stats", stats_path, "Per-block operation counts (CSV)");

    // metrics
    std::string metric = "error";
    int q = 0, p = 0, n_avg = 16, stride = 1;
    SpectrumWindow window;
    std::string window_shape = "gaussian";
    auto *met = app.add_subcommand("metrics", "Reconstruction error, Doppler PSD or delay PSD as CSV");
    met->add_option("--metric", metric, "error, doppler or delay")
        ->capture_default_str()
        ->check(CLI::IsMember({"error", "doppler", "delay"}));
    met->add_option("--ctf", ctf_path, "CTF file")->required()->check(CLI::ExistingFile);
    auto *met_cmp = met->add_option("--compare", compare_path, "Second CTF file (error metric)")
                        ->check(CLI::ExistingFile);
    auto *met_pkg = met->add_option("--package", package_path, "Package to reconstruct and compare (error metric)")
                        ->check(CLI::ExistingFile);
    met_cmp->excludes(met_pkg);
    met->add_option("--q", q, "Rx antenna")->capture_default_str()->check(CLI::NonNegativeNumber);
    met->add_option("--p", p, "Tx antenna")->capture_default_str()->check(CLI::NonNegativeNumber);
    met->add_option("--window", window.length, "Doppler STFT window length, lags (even)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    met->add_option("--window-shape", window_shape, "gaussian, hann or rectangular")
        ->capture_default_str()
        ->check(CLI::IsMember({"gaussian", "hann", "rectangular"}));
    met->add_option("--navg", n_avg, "ACF averaging half-width, samples")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    met->add_option("--stride", stride, "Doppler PSD time stride, samples")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    met->add_option("--out", out_path, "CSV file (default: stdout)");

    // pipeline
    auto *pipe = app.add_subcommand("pipeline", "generate, project, emulate and measure in one run");
    auto *pipe_scen = pipe->add_option("--scenario", scenario_path, "Scenario file")->check(CLI::ExistingFile);
    auto *pipe_in = pipe->add_option("--in", in_path, "Input signal file")->check(CLI::ExistingFile);
    auto *pipe_manifest =
        pipe->add_option("--manifest", manifest_path, "Replay a previous run's manifest")->check(CLI::ExistingFile);
    pipe->add_option("--out-dir", out_dir, "Directory for all outputs and the manifest")->required();
    pipe->add_option("--seed", seed, "Override the scenario's seed");
    pipe->add_option("--k", project.k, "Chirps per window")->capture_default_str()->check(CLI::PositiveNumber);
    pipe->add_option("--tw", project.tw, "Window length, s")->capture_default_str()->check(CLI::PositiveNumber);
    pipe->add_option("--passes", project.passes, "Gram-Schmidt sweeps (1 or 2)")
        ->capture_default_str()
        ->check(CLI::Range(1, 2));
    pipe->add_option("--nfft", emulate.nfft, "Transform size (0 = derived)")->capture_default_str();
    auto *pipe_tau = pipe->add_option("--tau-max", emulate.tau_max,
                                      "Longest emulated delay, s (default: 99.9th percentile ray delay)")
                         ->check(CLI::PositiveNumber);
    pipe->add_flag("--single-precision", emulate.single_precision, "Round every stage to float32");
    pipe->add_flag("--zero-outside-band", emulate.zero_outside_band,
                   "Oversampled signal: bins outside the channel band get zero gain");
    pipe_scen->needs(pipe_in);
    pipe_in->needs(pipe_scen);
    pipe_manifest->excludes(pipe_scen)->excludes(pipe_in)->excludes(pipe_tau);

    try
    {
        app.parse(argc, argv);
        if (proj->parsed() && scenario_path.empty() && alpha_range.empty())
            throw CLI::RequiredError("project needs --scenario or --alpha-range/--beta-range");
        if (emu->parsed() && package_path.empty() && ctf_path.empty())
            throw CLI::RequiredError("emulate needs --package or --ctf");
        if (met->parsed() && metric == "error" && compare_path.empty() && package_path.empty())
            throw CLI::RequiredError("the error metric needs --compare or --package");
        if (pipe->parsed() && manifest_path.empty() && scenario_path.empty())
            throw CLI::RequiredError("pipeline needs --scenario and --in, or --manifest");
        if (emulate.nfft < 0)
            throw CLI::ValidationError("--nfft", "must be >= 0");
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    Outputs outputs;
    try
    {
        if (gen->parsed())
        {
            const ScenarioConfig config = load_scenario(scenario_path, seed);
            outputs.add(out_path, encode_ctf(generate_ctf_grid(config)));
        }
        else if (proj->parsed())
        {
            const CtfGrid ctf = read_ctf(ctf_path);
            RangeProvider ranges;
            if (!scenario_path.empty())
            {
                const ScenarioConfig config = load_scenario(scenario_path, seed);
                ranges = ranges_from_clusters(config, simulate_cluster_timeline(config).clusters);
            }
            else
                ranges = fixed_ranges({alpha_range[0], alpha_range[1], beta_range[0], beta_range[1]});
            outputs.add(out_path, encode_packages(run_projection(ctf, ranges, project)));
        }
        else if (rec->parsed())
        {
            outputs.add(out_path, encode_ctf(reconstruct_grid(read_packages(package_path))));
        }
        else if (emu->parsed())
        {
            if (emu_t0->count() > 0)
                emulate.t0 = t0;
            const SignalData input = read_signal(in_path);
            EmulateResult r;
            if (!package_path.empty())
            {
                const auto packages = read_packages(package_path);
                r = run_emulation(PackageSource(packages), input, emulate);
            }
            else
            {
                const CtfGrid grid = read_ctf(ctf_path);
                r = run_emulation(GridSource(grid), input, emulate);
            }
            outputs.add(out_path, encode_signal(r.output));
            if (!stats_path.empty())
                outputs.add(stats_path, stats_csv(r.stats));
        }
        else if (met->parsed())
        {
            const CtfGrid ctf = read_ctf(ctf_path);
            if (q >= ctf.n_rx || p >= ctf.n_tx)
                throw std::out_of_range("metrics: antenna pair (" + std::to_string(q) + ", " + std::to_string(p) +
                                        ") outside the " + std::to_string(ctf.n_rx) + "x" +
                                        std::to_string(ctf.n_tx) + " grid");
            std::ostringstream csv;
            if (metric == "error")
            {
                const CtfGrid other =
                    compare_path.empty() ? reconstruct_grid(read_packages(package_path)) : read_ctf(compare_path);
                write_error_csv(csv, ctf_error(ctf, other, q, p));
                std::cerr << "worst e_power_db over all subchannels: " << worst_error_db(ctf, other) << " dB\n";
            }
            else if (metric == "doppler")
            {
                window.shape = parse_window_shape(window_shape);
                const auto series = zero_frequency_series(ctf, q, p);
                std::vector<int> times;
                for (int t = 0; t + window.length / 2 < static_cast<int>(series.size()); t += stride)
                    times.push_back(t);
                write_spectrum_csv(csv, doppler_psd(series, ctf.t_axis.at(1) - ctf.t_axis.at(0), times, window, n_avg));
            }
            else
                write_spectrum_csv(csv, delay_psd(ctf, q, p));
            emit_csv(outputs, out_path, csv.str());
        }
        else if (pipe->parsed())
        {
            PipelineParams params;
            if (!manifest_path.empty())
                params = params_from_manifest(manifest_path);
            else
            {
                params.scenario_text = format_scenario(load_scenario(scenario_path, seed));
                params.input = in_path;
                params.project = project;
                params.emulate = emulate;
                params.tau_max_given = pipe_tau->count() > 0;
            }
            const auto manifest = run_pipeline(params, out_dir, outputs);
            std::cerr << "worst e_power_db: " << manifest["worst_error_db"].get<double>() << " dB\n";
        }
        outputs.commit();
    }
    catch (const NumericError &e)
    {
        std::cerr << "chemu: numeric failure: " << e.what() << '\n';
        return exit_numeric;
    }
    catch (const std::exception &e)
    {
        std::cerr << "chemu: " << e.what() << '\n';
        return exit_data;
    }
    return exit_ok;
}
