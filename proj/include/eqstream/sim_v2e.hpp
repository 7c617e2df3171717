#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/events.hpp"
#include "eqstream/frames.hpp"
#include "eqstream/noise.hpp"
#include "eqstream/rng.hpp"

namespace eqstream {

struct V2eConfig {
    double theta0 = 0.3;        // nominal contrast threshold, lin-log units
    double sigma_theta = 0.03;  // per-(pixel, frame) threshold jitter
    double knee = 20.0;         // lin-log switch point
    double leak_rate = 0.0;     // expected L_m decrement per second per pixel
    double hot_pixel_fraction = 0.0;
    double hot_pixel_rate = 0.0;  // events per second per hot pixel
    std::uint64_t seed = 0;

    void validate() const {
        if (!(theta0 > 0)) throw ConfigError("v2e: theta0 must be > 0");
        if (sigma_theta < 0) throw ConfigError("v2e: sigma_theta must be >= 0");
        if (!(knee > 0)) throw ConfigError("v2e: knee must be > 0");
        if (leak_rate < 0) throw ConfigError("v2e: leak_rate must be >= 0");
        if (hot_pixel_fraction < 0 || hot_pixel_fraction > 1) {
            throw ConfigError("v2e: hot_pixel_fraction must be in [0, 1]");
        }
        if (hot_pixel_rate < 0) throw ConfigError("v2e: hot_pixel_rate must be >= 0");
    }
};

namespace detail {

constexpr double kThresholdFloor = 0.01;
/// Nudges quotients that land within float drift of an integer crossing, so
/// an excursion of exactly k thresholds yields k events.
constexpr double kCrossingEps = 1e-9;

inline std::uint64_t interior_timestamp(std::uint64_t t_prev, std::uint64_t dt_us,
                                        std::uint64_t k, std::uint64_t n_events) {
    const unsigned __int128 num = static_cast<unsigned __int128>(dt_us) * k;
    return t_prev + static_cast<std::uint64_t>(num / (n_events + 1));
}

}  // namespace detail

/// Spontaneous ON events from the slow downward drift of the memorized
/// brightness: per pixel, threshold crossings arrive as a Poisson process
/// with expected rate leak_rate / theta0 per second.
inline EventStream inject_leak_events(const EventStream& stream, const V2eConfig& cfg,
                                      std::uint64_t duration_us, std::uint64_t start_us = 0) {
    cfg.validate();
    if (cfg.leak_rate <= 0.0 || duration_us == 0) return stream;
    const double crossings_per_s = cfg.leak_rate / cfg.theta0;
    const std::size_t pixels = stream.geometry.pixel_count();
    std::vector<Event> extra;
    for (std::size_t pixel = 0; pixel < pixels; ++pixel) {
        const std::uint16_t x = static_cast<std::uint16_t>(pixel % stream.geometry.width);
        const std::uint16_t y = static_cast<std::uint16_t>(pixel / stream.geometry.width);
        KeyedRng rng_pixel(cfg.seed, rng::stream_id("v2e.leak", pixel));
        detail::append_poisson_train(extra, rng_pixel, crossings_per_s, x, y, 1, duration_us,
                                     start_us);
    }
    return detail::merge_events(stream, std::move(extra));
}

/// floor(fraction * pixel count) hot pixels, each an ON Poisson source.
inline EventStream inject_hot_pixels(const EventStream& stream, const V2eConfig& cfg,
                                     std::uint64_t duration_us, std::uint64_t start_us = 0) {
    cfg.validate();
    const std::size_t count =
        static_cast<std::size_t>(cfg.hot_pixel_fraction *
                                 static_cast<double>(stream.geometry.pixel_count()));
    return inject_hot_pixels_by_count(stream, count, cfg.hot_pixel_rate, cfg.seed, duration_us,
                                      start_us);
}

/// Memorized-brightness simulator: per pixel and frame,
/// N_e = floor(|L_lp - L_m| / theta) events with polarity sgn(L_lp - L_m),
/// theta drawn per (pixel, frame) from theta0 + N(0, sigma_theta) clamped to
/// >= 0.01; L_m advances by exactly N_e * theta * polarity. Event timestamps
/// are spaced evenly inside the inter-frame interval. Leak and hot-pixel
/// events are injected afterwards and merge-sorted.
inline EventStream v2e_generate(const FrameSequence& frames, const V2eConfig& cfg) {
    cfg.validate();
    frames.validate();
    const SensorGeometry geo = frames.geometry;
    const std::size_t h = geo.height, w = geo.width;

    std::vector<LogFrame> logs;
    logs.reserve(frames.frames.size());
    for (const LumaFrame& frame : frames.frames) logs.push_back(v2e_linlog(frame, cfg.knee));

    ValueGrid memorized = logs[0].values;
    std::vector<Event> events;
    for (std::size_t k = 1; k < logs.size(); ++k) {
        const std::uint64_t t_prev = logs[k - 1].t;
        const std::uint64_t dt_us = logs[k].t - t_prev;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t pixel = y * w + x;
                double theta = cfg.theta0;
                if (cfg.sigma_theta > 0.0) {
                    KeyedRng rng_cell(cfg.seed, rng::stream_id("v2e.theta", pixel), 2 * k);
                    theta += cfg.sigma_theta * rng_cell.gaussian();
                }
                if (theta < detail::kThresholdFloor) theta = detail::kThresholdFloor;

                const double diff = logs[k].values.at(y, x) - memorized.at(y, x);
                const std::uint64_t n_events = static_cast<std::uint64_t>(
                    std::floor(std::abs(diff) / theta + detail::kCrossingEps));
                if (n_events == 0) continue;
                const std::int8_t polarity = diff > 0 ? 1 : -1;
                for (std::uint64_t j = 1; j <= n_events; ++j) {
                    events.push_back(Event{detail::interior_timestamp(t_prev, dt_us, j, n_events),
                                           static_cast<std::uint16_t>(x),
                                           static_cast<std::uint16_t>(y), polarity});
                }
                memorized.at(y, x) +=
                    static_cast<double>(n_events) * theta * static_cast<double>(polarity);
            }
        }
    }
    std::sort(events.begin(), events.end(), event_order);

    EventStream out{geo, std::move(events)};
    const std::uint64_t start = frames.frames.front().t;
    const std::uint64_t span = frames.frames.back().t - start;
    if (cfg.leak_rate > 0.0) out = inject_leak_events(out, cfg, span, start);
    if (cfg.hot_pixel_fraction > 0.0 && cfg.hot_pixel_rate > 0.0) {
        out = inject_hot_pixels(out, cfg, span, start);
    }
    return out;
}

}  // namespace eqstream
