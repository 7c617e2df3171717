#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/events.hpp"
#include "eqstream/rng.hpp"

namespace eqstream {

struct NoiseConfig {
    double background_rate = 0.0;  // events per second per pixel
    double rate_jitter = 0.0;      // std dev of the per-pixel rate weight
    std::size_t hot_pixel_count = 0;
    double hot_pixel_rate = 0.0;  // events per second per hot pixel
    std::uint64_t seed = 0;

    void validate() const {
        if (background_rate < 0) throw ConfigError("noise: background_rate must be >= 0");
        if (rate_jitter < 0) throw ConfigError("noise: rate_jitter must be >= 0");
        if (hot_pixel_rate < 0) throw ConfigError("noise: hot_pixel_rate must be >= 0");
    }
};

namespace detail {

/// Appends one pixel's Poisson arrivals over [start, start + duration) as
/// events of the given polarity. Consecutive exponential gaps accumulate in
/// seconds, so a longer duration extends the same arrival sequence.
inline void append_poisson_train(std::vector<Event>& out, KeyedRng& rng, double rate,
                                 std::uint16_t x, std::uint16_t y, std::int8_t polarity,
                                 std::uint64_t duration_us, std::uint64_t start_us) {
    if (rate <= 0.0 || duration_us == 0) return;
    const double duration_s = static_cast<double>(duration_us) * 1e-6;
    double t_s = 0.0;
    for (;;) {
        t_s += rng.exponential(rate);
        if (!(t_s < duration_s)) break;
        const std::uint64_t offset = static_cast<std::uint64_t>(t_s * 1e6);
        if (offset >= duration_us) break;
        out.push_back(Event{start_us + offset, x, y, polarity});
    }
}

inline EventStream merge_events(const EventStream& base, std::vector<Event>&& extra) {
    EventStream out = base;
    out.events.insert(out.events.end(), extra.begin(), extra.end());
    std::sort(out.events.begin(), out.events.end(), event_order);
    return out;
}

}  // namespace detail

/// Chooses `count` distinct pixels (seeded) and fires ON events from each as
/// an independent Poisson process at `rate` over [start, start + duration).
inline EventStream inject_hot_pixels_by_count(const EventStream& stream, std::size_t count,
                                              double rate, std::uint64_t seed,
                                              std::uint64_t duration_us,
                                              std::uint64_t start_us = 0) {
    const std::size_t pixels = stream.geometry.pixel_count();
    if (count == 0 || rate <= 0.0 || pixels == 0) return stream;
    if (count > pixels) count = pixels;

    KeyedRng chooser(seed, rng::stream_id("hot.select", 0));
    std::set<std::uint64_t> chosen;
    while (chosen.size() < count) {
        chosen.insert(chooser.next_u64() % pixels);
    }

    std::vector<Event> extra;
    for (const std::uint64_t pixel : chosen) {
        const std::uint16_t x = static_cast<std::uint16_t>(pixel % stream.geometry.width);
        const std::uint16_t y = static_cast<std::uint16_t>(pixel / stream.geometry.width);
        KeyedRng rng_pixel(seed, rng::stream_id("hot.train", pixel));
        detail::append_poisson_train(extra, rng_pixel, rate, x, y, 1, duration_us, start_us);
    }
    return detail::merge_events(stream, std::move(extra));
}

/// Background activity: each pixel fires a Poisson train at
/// rate * (1 + g), g ~ N(0, jitter) clamped to >= -1, polarity uniform.
inline EventStream inject_gaussian_background(const EventStream& stream, const NoiseConfig& cfg,
                                              std::uint64_t duration_us,
                                              std::uint64_t start_us = 0) {
    cfg.validate();
    if (cfg.background_rate <= 0.0 || duration_us == 0) return stream;

    const std::size_t pixels = stream.geometry.pixel_count();
    const double duration_s = static_cast<double>(duration_us) * 1e-6;
    std::vector<Event> extra;
    for (std::size_t pixel = 0; pixel < pixels; ++pixel) {
        KeyedRng rng_pixel(cfg.seed, rng::stream_id("noise.background", pixel));
        double g = 0.0;
        if (cfg.rate_jitter > 0.0) {
            g = rng_pixel.gaussian(0.0, cfg.rate_jitter);
            if (g < -1.0) g = -1.0;
        }
        const double local_rate = cfg.background_rate * (1.0 + g);
        if (local_rate <= 0.0) continue;
        const std::uint16_t x = static_cast<std::uint16_t>(pixel % stream.geometry.width);
        const std::uint16_t y = static_cast<std::uint16_t>(pixel / stream.geometry.width);
        double t_s = 0.0;
        for (;;) {
            t_s += rng_pixel.exponential(local_rate);
            if (!(t_s < duration_s)) break;
            const std::uint64_t offset = static_cast<std::uint64_t>(t_s * 1e6);
            if (offset >= duration_us) break;
            const std::int8_t polarity = rng_pixel.uniform01() < 0.5 ? -1 : 1;
            extra.push_back(Event{start_us + offset, x, y, polarity});
        }
    }
    return detail::merge_events(stream, std::move(extra));
}

}  // namespace eqstream
