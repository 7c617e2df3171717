// eqstream: event-camera simulation and event-stream quality scoring.
//
// Subcommands: simulate, eqs, perturb, sweep, weights (init/inspect).
// Machine-readable output goes to stdout or --out; diagnostics to stderr.
// Exit codes: 0 success, 2 parse/IO, 3 configuration, 4 file format.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eqstream/eqstream.hpp"

namespace {

using namespace eqstream;

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitConfig = 3;
constexpr int kExitFormat = 4;

void emit(const std::string& payload, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw ParseError("cannot open for writing: " + out_path);
    os << payload;
    if (!os) throw ParseError("write failed: " + out_path);
}

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string format = "binary";
};

EventFormat resolve_format(const std::string& name) { return parse_event_format(name); }

void apply_thread_cap(unsigned requested) {
    const unsigned hw = std::thread::hardware_concurrency();
    const unsigned n = requested > 0 ? requested : (hw > 0 ? hw : 1);
    parallel::set_max_threads(static_cast<int>(n));
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    CommonOptions common;
    std::string frames_dir;
};

int cmd_simulate(const SimulateOptions& opt) {
    SimulatorRun run;
    if (!opt.common.config_path.empty()) run = load_simulator_config(opt.common.config_path);
    if (opt.common.seed.has_value()) {
        run.v2e.seed = *opt.common.seed;
        run.esim.seed = *opt.common.seed;
        run.noise.seed = *opt.common.seed;
    }

    const FrameSequence frames = read_frame_manifest(opt.frames_dir);
    const EventStream stream = run_simulator(frames, run);
    write_events(stream, opt.common.out_path, resolve_format(opt.common.format));

    const std::uint64_t span_us = frames.frames.back().t - frames.frames.front().t;
    std::size_t on = 0;
    for (const Event& e : stream.events) on += e.p > 0 ? 1 : 0;
    nlohmann::ordered_json summary;
    summary["method"] = sim_method_name(run.method);
    summary["events"] = stream.events.size();
    summary["on_events"] = on;
    summary["off_events"] = stream.events.size() - on;
    summary["duration_us"] = span_us;
    summary["rate_hz"] =
        span_us > 0 ? static_cast<double>(stream.events.size()) / (1e-6 * span_us) : 0.0;
    summary["width"] = stream.geometry.width;
    summary["height"] = stream.geometry.height;
    summary["out"] = opt.common.out_path;
    std::cout << summary.dump(2) << "\n";
    std::cerr << "simulate: wrote " << stream.events.size() << " events to "
              << opt.common.out_path << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------- eqs

struct WeightSource {
    std::string weights_path;
    std::optional<std::uint64_t> weight_seed;
};

net::WeightStore resolve_weights(const WeightSource& src, const net::NetworkConfig& cfg) {
    if (!src.weights_path.empty()) return net::load_weights(src.weights_path, cfg);
    return net::init_weights(cfg, src.weight_seed.value_or(0));
}

struct EqsOptions {
    CommonOptions common;
    std::string path_a;
    std::string path_b;
    WeightSource weights;
};

EqsConfig load_metric_config(const CommonOptions& common) {
    EqsConfig cfg;
    if (!common.config_path.empty()) cfg = load_eqs_config(common.config_path);
    return cfg;
}

int cmd_eqs(const EqsOptions& opt) {
    const EqsConfig cfg = load_metric_config(opt.common);
    const net::WeightStore weights = resolve_weights(opt.weights, cfg.network);

    const EventStream a = read_events_auto(opt.path_a);
    const EventStream b = read_events_auto(opt.path_b);
    const EqsReport report = eqs(a, b, weights, cfg);

    const std::string payload = report_to_string(report);
    emit(payload, opt.common.out_path);
    if (!opt.common.out_path.empty()) {
        // Report went to a file; the score itself still lands on stdout.
        nlohmann::ordered_json line;
        line["eqs"] = report.eqs;
        std::cout << line.dump() << "\n";
    }
    std::cerr << "eqs: " << report.eqs << " (distance " << report.distance << ")\n";
    return kExitOk;
}

// ----------------------------------------------------------------- perturb

struct PerturbLevels {
    double background_rate = 5.0;  // level-1 rate, events/s/pixel
    double growth = 2.0;           // rate multiplier per level
    double rate_jitter = 0.1;
    std::size_t hot_count = 2;
    double hot_rate = 50.0;
};

/// Level 0 is the untouched base stream; level k >= 1 adds background and
/// hot-pixel noise with rates scaled by growth^(k-1), seeded per level.
EventStream perturb_level(const EventStream& base, const PerturbLevels& levels, std::size_t level,
                          std::uint64_t seed) {
    if (level == 0) return base;
    const double factor = std::pow(levels.growth, static_cast<double>(level - 1));
    NoiseConfig noise;
    noise.background_rate = levels.background_rate * factor;
    noise.rate_jitter = levels.rate_jitter;
    noise.seed = rng::keyed_bits(seed, rng::stream_id("perturb.level", level), 0);
    const std::uint64_t duration =
        base.events.empty() ? 0 : base.events.back().t - base.events.front().t;
    const std::uint64_t start = base.events.empty() ? 0 : base.events.front().t;
    EventStream out = inject_gaussian_background(base, noise, duration, start);
    if (levels.hot_count > 0 && levels.hot_rate > 0.0) {
        out = inject_hot_pixels_by_count(out, levels.hot_count, levels.hot_rate * factor,
                                         noise.seed, duration, start);
    }
    return out;
}

struct PerturbOptions {
    CommonOptions common;
    std::string in_path;
    std::string out_prefix;
    std::size_t num_levels = 5;
    PerturbLevels levels;
};

int cmd_perturb(const PerturbOptions& opt) {
    const EventStream base = read_events_auto(opt.in_path);
    const EventFormat format = resolve_format(opt.common.format);
    const char* ext = format == EventFormat::binary ? ".evs" : ".txt";
    const std::uint64_t seed = opt.common.seed.value_or(0);

    nlohmann::ordered_json index = nlohmann::ordered_json::array();
    for (std::size_t level = 0; level < opt.num_levels; ++level) {
        const EventStream out = perturb_level(base, opt.levels, level, seed);
        const std::string path = opt.out_prefix + "_level" + std::to_string(level) + ext;
        write_events(out, path, format);
        index.push_back({{"level", level}, {"path", path}, {"events", out.events.size()}});
        std::cerr << "perturb: level " << level << " -> " << out.events.size() << " events\n";
    }
    std::cout << index.dump(2) << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepOptions {
    CommonOptions common;
    std::string in_path;
    WeightSource weights;
    std::size_t num_levels = 5;
    PerturbLevels levels;
};

int cmd_sweep(const SweepOptions& opt) {
    const EqsConfig cfg = load_metric_config(opt.common);
    const net::WeightStore weights = resolve_weights(opt.weights, cfg.network);
    const EventStream base = read_events_auto(opt.in_path);
    const std::uint64_t seed = opt.common.seed.value_or(0);

    std::vector<double> level_axis, scores;
    std::string csv = "level,eqs\n";
    for (std::size_t level = 0; level < opt.num_levels; ++level) {
        const EventStream perturbed = perturb_level(base, opt.levels, level, seed);
        const EqsReport report = eqs(base, perturbed, weights, cfg);
        level_axis.push_back(static_cast<double>(level));
        scores.push_back(report.eqs);
        char row[64];
        std::snprintf(row, sizeof(row), "%zu,%.17g\n", level, report.eqs);
        csv += row;
        std::cerr << "sweep: level " << level << " eqs " << report.eqs << "\n";
    }
    if (opt.num_levels >= 2) {
        char tail[64];
        std::snprintf(tail, sizeof(tail), "# spearman=%.17g\n",
                      spearman_rank_correlation(level_axis, scores));
        csv += tail;
    }
    emit(csv, opt.common.out_path);
    return kExitOk;
}

// ----------------------------------------------------------------- weights

struct WeightsInitOptions {
    CommonOptions common;
};

int cmd_weights_init(const WeightsInitOptions& opt) {
    const EqsConfig cfg = load_metric_config(opt.common);
    const net::WeightStore store = net::init_weights(cfg.network, opt.common.seed.value_or(0));
    net::save_weights(store, opt.common.out_path);
    std::cerr << "weights: wrote " << store.tensors.size() << " tensors to "
              << opt.common.out_path << "\n";
    return kExitOk;
}

struct WeightsInspectOptions {
    std::string in_path;
    std::string out_path;
};

int cmd_weights_inspect(const WeightsInspectOptions& opt) {
    const net::WeightStore store = net::load_weights(opt.in_path);
    nlohmann::ordered_json j;
    j["config_hash"] = hex_digest(store.config_hash);
    j["tensor_count"] = store.tensors.size();
    j["tensors"] = nlohmann::ordered_json::array();
    std::size_t total = 0;
    for (const auto& [name, tensor] : store.tensors) {
        j["tensors"].push_back({{"name", name}, {"dims", tensor.dims()}});
        total += tensor.size();
    }
    j["total_parameters"] = total;
    emit(j.dump(2) + "\n", opt.out_path);
    return kExitOk;
}

void add_weight_source(CLI::App* cmd, WeightSource& src) {
    auto* file = cmd->add_option("--weights", src.weights_path, "weight file (EQW1)");
    auto* seeded = cmd->add_option("--weight-seed", src.weight_seed,
                                   "derive weights deterministically from this seed");
    file->excludes(seeded);
    seeded->excludes(file);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-camera simulation and event-stream quality scoring"};
    app.require_subcommand(1);

    SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "render an event stream from a frame manifest");
    c_sim->add_option("--frames", sim.frames_dir, "directory containing frames.txt")->required();
    c_sim->add_option("--config", sim.common.config_path, "simulator config JSON");
    c_sim->add_option("--out", sim.common.out_path, "output event file")->required();
    c_sim->add_option("--format", sim.common.format, "text|binary")
        ->check(CLI::IsMember({"text", "binary"}));
    c_sim->add_option("--seed", sim.common.seed, "override config seeds");
    c_sim->add_option("--threads", sim.common.threads, "max worker threads (0 = all cores)");

    EqsOptions eqs_opt;
    auto* c_eqs = app.add_subcommand("eqs", "score two event streams against each other");
    c_eqs->add_option("--a", eqs_opt.path_a, "first event file")->required();
    c_eqs->add_option("--b", eqs_opt.path_b, "second event file")->required();
    c_eqs->add_option("--config", eqs_opt.common.config_path, "metric config JSON");
    c_eqs->add_option("--out", eqs_opt.common.out_path, "report path (default stdout)");
    c_eqs->add_option("--threads", eqs_opt.common.threads, "max worker threads (0 = all cores)");
    add_weight_source(c_eqs, eqs_opt.weights);

    PerturbOptions pert;
    auto* c_pert = app.add_subcommand("perturb", "emit noise-injected copies of a stream");
    c_pert->add_option("--in", pert.in_path, "base event file")->required();
    c_pert->add_option("--out-prefix", pert.out_prefix, "output path prefix")->required();
    c_pert->add_option("--levels", pert.num_levels, "number of levels including the clean base")
        ->check(CLI::PositiveNumber);
    c_pert->add_option("--rate", pert.levels.background_rate, "level-1 background rate (ev/s/px)");
    c_pert->add_option("--growth", pert.levels.growth, "rate multiplier per level");
    c_pert->add_option("--jitter", pert.levels.rate_jitter, "per-pixel rate jitter sigma");
    c_pert->add_option("--hot-count", pert.levels.hot_count, "hot pixels per level");
    c_pert->add_option("--hot-rate", pert.levels.hot_rate, "level-1 hot pixel rate (ev/s)");
    c_pert->add_option("--seed", pert.common.seed, "perturbation seed");
    c_pert->add_option("--format", pert.common.format, "text|binary")
        ->check(CLI::IsMember({"text", "binary"}));
    c_pert->add_option("--threads", pert.common.threads, "max worker threads (0 = all cores)");

    SweepOptions sweep;
    auto* c_sweep = app.add_subcommand("sweep", "score a stream against noisier copies (CSV)");
    c_sweep->add_option("--in", sweep.in_path, "base event file")->required();
    c_sweep->add_option("--config", sweep.common.config_path, "metric config JSON");
    c_sweep->add_option("--out", sweep.common.out_path, "CSV path (default stdout)");
    c_sweep->add_option("--levels", sweep.num_levels, "number of levels including the clean base")
        ->check(CLI::PositiveNumber);
    c_sweep->add_option("--rate", sweep.levels.background_rate,
                        "level-1 background rate (ev/s/px)");
    c_sweep->add_option("--growth", sweep.levels.growth, "rate multiplier per level");
    c_sweep->add_option("--jitter", sweep.levels.rate_jitter, "per-pixel rate jitter sigma");
    c_sweep->add_option("--hot-count", sweep.levels.hot_count, "hot pixels per level");
    c_sweep->add_option("--hot-rate", sweep.levels.hot_rate, "level-1 hot pixel rate (ev/s)");
    c_sweep->add_option("--seed", sweep.common.seed, "perturbation seed");
    c_sweep->add_option("--threads", sweep.common.threads, "max worker threads (0 = all cores)");
    add_weight_source(c_sweep, sweep.weights);

    auto* c_weights = app.add_subcommand("weights", "create or inspect weight files");
    c_weights->require_subcommand(1);
    WeightsInitOptions winit;
    auto* c_winit = c_weights->add_subcommand("init", "write a seeded weight file");
    c_winit->add_option("--out", winit.common.out_path, "output weight file")->required();
    c_winit->add_option("--seed", winit.common.seed, "initialization seed (default 0)");
    c_winit->add_option("--config", winit.common.config_path,
                        "metric config JSON (network shape)");
    WeightsInspectOptions winspect;
    auto* c_winspect = c_weights->add_subcommand("inspect", "list tensors in a weight file");
    c_winspect->add_option("--in", winspect.in_path, "weight file")->required();
    c_winspect->add_option("--out", winspect.out_path, "listing path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (c_sim->parsed()) {
            apply_thread_cap(sim.common.threads);
            return cmd_simulate(sim);
        }
        if (c_eqs->parsed()) {
            apply_thread_cap(eqs_opt.common.threads);
            return cmd_eqs(eqs_opt);
        }
        if (c_pert->parsed()) {
            apply_thread_cap(pert.common.threads);
            return cmd_perturb(pert);
        }
        if (c_sweep->parsed()) {
            apply_thread_cap(sweep.common.threads);
            return cmd_sweep(sweep);
        }
        if (c_winit->parsed()) return cmd_weights_init(winit);
        if (c_winspect->parsed()) return cmd_weights_inspect(winspect);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    }
    return kExitConfig;  // no subcommand matched; require_subcommand should prevent this
}
