#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eqstream/errors.hpp"
#include "eqstream/noise.hpp"
#include "eqstream/sim_esim.hpp"
#include "eqstream/sim_pix2nvs.hpp"
#include "eqstream/sim_v2e.hpp"

namespace eqstream {

enum class SimMethod { pix2nvs, v2e, esim };

inline const char* sim_method_name(SimMethod m) {
    switch (m) {
        case SimMethod::pix2nvs: return "pix2nvs";
        case SimMethod::v2e: return "v2e";
        case SimMethod::esim: return "esim";
    }
    return "?";
}

/// One simulator invocation: the chosen method plus per-method parameters
/// (unused sections keep their defaults) and optional noise injection.
struct SimulatorRun {
    SimMethod method = SimMethod::v2e;
    Pix2NvsConfig pix2nvs;
    V2eConfig v2e;
    EsimConfig esim;
    NoiseConfig noise;
    bool has_noise = false;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
void take(const nlohmann::json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

inline void parse_pix2nvs(const nlohmann::json& obj, Pix2NvsConfig& cfg) {
    reject_unknown_keys(obj, {"threshold", "tlog_mode", "tlog_fraction", "tlog_absolute"},
                        "pix2nvs");
    take(obj, "threshold", cfg.threshold);
    if (obj.contains("tlog_mode")) {
        const std::string mode = obj.at("tlog_mode").get<std::string>();
        if (mode == "fraction_of_max") {
            cfg.tlog_mode = TlogMode::fraction_of_max;
        } else if (mode == "absolute") {
            cfg.tlog_mode = TlogMode::absolute;
        } else {
            throw ConfigError("config: tlog_mode must be 'fraction_of_max' or 'absolute'");
        }
    }
    take(obj, "tlog_fraction", cfg.tlog_fraction);
    take(obj, "tlog_absolute", cfg.tlog_absolute);
}

inline void parse_v2e(const nlohmann::json& obj, V2eConfig& cfg) {
    reject_unknown_keys(obj,
                        {"theta0", "sigma_theta", "knee", "leak_rate", "hot_pixel_fraction",
                         "hot_pixel_rate", "seed"},
                        "v2e");
    take(obj, "theta0", cfg.theta0);
    take(obj, "sigma_theta", cfg.sigma_theta);
    take(obj, "knee", cfg.knee);
    take(obj, "leak_rate", cfg.leak_rate);
    take(obj, "hot_pixel_fraction", cfg.hot_pixel_fraction);
    take(obj, "hot_pixel_rate", cfg.hot_pixel_rate);
    take(obj, "seed", cfg.seed);
}

inline void parse_esim(const nlohmann::json& obj, EsimConfig& cfg) {
    reject_unknown_keys(
        obj, {"contrast", "sigma_contrast", "lambda_v", "max_samples_per_interval", "knee", "seed"},
        "esim");
    take(obj, "contrast", cfg.contrast);
    take(obj, "sigma_contrast", cfg.sigma_contrast);
    take(obj, "lambda_v", cfg.lambda_v);
    take(obj, "max_samples_per_interval", cfg.max_samples_per_interval);
    take(obj, "knee", cfg.knee);
    take(obj, "seed", cfg.seed);
}

inline void parse_noise(const nlohmann::json& obj, NoiseConfig& cfg) {
    reject_unknown_keys(
        obj, {"background_rate", "rate_jitter", "hot_pixel_count", "hot_pixel_rate", "seed"},
        "noise");
    take(obj, "background_rate", cfg.background_rate);
    take(obj, "rate_jitter", cfg.rate_jitter);
    take(obj, "hot_pixel_count", cfg.hot_pixel_count);
    take(obj, "hot_pixel_rate", cfg.hot_pixel_rate);
    take(obj, "seed", cfg.seed);
}

}  // namespace detail

inline SimulatorRun parse_simulator_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config: invalid JSON: ") + e.what());
    }
    SimulatorRun run;
    try {
        if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
        detail::reject_unknown_keys(doc, {"method", "pix2nvs", "v2e", "esim", "noise"},
                                    "the top-level object");
        if (!doc.contains("method")) throw ConfigError("config: missing 'method'");
        const std::string method = doc.at("method").get<std::string>();
        if (method == "pix2nvs") {
            run.method = SimMethod::pix2nvs;
        } else if (method == "v2e") {
            run.method = SimMethod::v2e;
        } else if (method == "esim") {
            run.method = SimMethod::esim;
        } else {
            throw ConfigError("config: unknown method '" + method +
                              "' (valid: pix2nvs, v2e, esim)");
        }
        if (doc.contains("pix2nvs")) detail::parse_pix2nvs(doc.at("pix2nvs"), run.pix2nvs);
        if (doc.contains("v2e")) detail::parse_v2e(doc.at("v2e"), run.v2e);
        if (doc.contains("esim")) detail::parse_esim(doc.at("esim"), run.esim);
        if (doc.contains("noise")) {
            detail::parse_noise(doc.at("noise"), run.noise);
            run.has_noise = true;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return run;
}

inline SimulatorRun load_simulator_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_simulator_config(buf.str());
}

/// Runs the configured simulator, then any configured noise injection over
/// the frame span.
inline EventStream run_simulator(const FrameSequence& frames, const SimulatorRun& run) {
    EventStream out;
    switch (run.method) {
        case SimMethod::pix2nvs: out = pix2nvs_generate(frames, run.pix2nvs); break;
        case SimMethod::v2e: out = v2e_generate(frames, run.v2e); break;
        case SimMethod::esim: out = esim_generate(frames, run.esim); break;
    }
    if (run.has_noise) {
        const std::uint64_t start = frames.frames.front().t;
        const std::uint64_t span = frames.frames.back().t - start;
        out = inject_gaussian_background(out, run.noise, span, start);
        if (run.noise.hot_pixel_count > 0 && run.noise.hot_pixel_rate > 0) {
            out = inject_hot_pixels_by_count(out, run.noise.hot_pixel_count,
                                             run.noise.hot_pixel_rate, run.noise.seed, span, start);
        }
    }
    return out;
}

}  // namespace eqstream
