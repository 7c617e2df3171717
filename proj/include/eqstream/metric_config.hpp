#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "eqstream/errors.hpp"
#include "eqstream/lfs.hpp"
#include "eqstream/sim_config.hpp"

namespace eqstream {

/// Metric configuration JSON. Root keys: tensorize, num_steps, patch,
/// network; everything optional, unknown keys rejected.
inline EqsConfig parse_eqs_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("metric config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("metric config: top level must be an object");
    detail::reject_unknown_keys(doc, {"tensorize", "num_steps", "patch", "network"},
                                "metric config");
    EqsConfig cfg;
    try {
        if (doc.contains("tensorize")) {
            const auto& t = doc.at("tensorize");
            detail::reject_unknown_keys(t, {"num_bins", "window_us", "window_start_us"},
                                        "tensorize");
            detail::take(t, "num_bins", cfg.tensorize.num_bins);
            detail::take(t, "window_us", cfg.tensorize.window_us);
            detail::take(t, "window_start_us", cfg.tensorize.window_start_us);
            // The network's first convolution is sized from the bin count;
            // an explicit network.input_channels may still override below.
            cfg.network.input_channels = 2 * cfg.tensorize.num_bins;
        }
        detail::take(doc, "num_steps", cfg.num_steps);
        if (doc.contains("patch")) {
            const auto& p = doc.at("patch");
            detail::reject_unknown_keys(p, {"patch_size"}, "patch");
            std::uint32_t size = static_cast<std::uint32_t>(cfg.patch.patch_size);
            detail::take(p, "patch_size", size);
            cfg.patch.patch_size = size;
        }
        if (doc.contains("network")) {
            const auto& n = doc.at("network");
            detail::reject_unknown_keys(
                n, {"input_channels", "strides", "widths", "mixing_kernel"}, "network");
            detail::take(n, "input_channels", cfg.network.input_channels);
            detail::take(n, "strides", cfg.network.strides);
            detail::take(n, "widths", cfg.network.widths);
            detail::take(n, "mixing_kernel", cfg.network.mixing_kernel);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("metric config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline EqsConfig load_eqs_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open metric config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_eqs_config(text);
}

}  // namespace eqstream
