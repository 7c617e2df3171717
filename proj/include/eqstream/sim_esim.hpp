#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/events.hpp"
#include "eqstream/frames.hpp"
#include "eqstream/grid.hpp"
#include "eqstream/rng.hpp"

namespace eqstream {

struct EsimConfig {
    double contrast = 0.2;           // C, lin-log units
    double sigma_contrast = 0.0042;  // per-pixel threshold noise (0.021 * C)
    double lambda_v = 0.5;           // sample-interval scale
    std::uint32_t max_samples_per_interval = 10'000;
    double knee = 20.0;  // lin-log switch point (shared convention)
    std::uint64_t seed = 0;

    void validate() const {
        if (!(contrast > 0)) throw ConfigError("esim: contrast must be > 0");
        if (sigma_contrast < 0) throw ConfigError("esim: sigma_contrast must be >= 0");
        if (!(contrast - 3.0 * sigma_contrast > 0)) {
            throw ConfigError("esim: need contrast - 3*sigma_contrast > 0");
        }
        if (!(lambda_v > 0)) throw ConfigError("esim: lambda_v must be > 0");
        if (max_samples_per_interval == 0) {
            throw ConfigError("esim: max_samples_per_interval must be >= 1");
        }
        if (!(knee > 0)) throw ConfigError("esim: knee must be > 0");
    }
};

/// Piecewise-linear per-pixel log-intensity signal reconstructed from a
/// frame sequence. Evaluation at a frame timestamp returns that frame's
/// value exactly; between frames, the linear interpolant.
class EsimReconstruction {
public:
    explicit EsimReconstruction(const FrameSequence& frames, double knee = 20.0) {
        frames.validate();
        geometry_ = frames.geometry;
        timestamps_.reserve(frames.frames.size());
        values_.reserve(frames.frames.size());
        for (const LumaFrame& frame : frames.frames) {
            timestamps_.push_back(frame.t);
            values_.push_back(v2e_linlog(frame, knee).values);
        }
    }

    SensorGeometry geometry() const { return geometry_; }
    std::size_t frame_count() const { return timestamps_.size(); }
    std::uint64_t t_first() const { return timestamps_.front(); }
    std::uint64_t t_last() const { return timestamps_.back(); }
    std::uint64_t frame_time(std::size_t k) const { return timestamps_[k]; }
    const ValueGrid& frame_values(std::size_t k) const { return values_[k]; }

    double value(std::size_t y, std::size_t x, std::uint64_t t) const {
        if (t < t_first() || t > t_last()) {
            throw ValidationError("reconstruction query outside the frame span");
        }
        const std::size_t segment = segment_for(t);
        return value_in_segment(segment, y, x, t);
    }

    /// Interpolated value within a known segment [t_k, t_{k+1}]; exact at
    /// both endpoints.
    double value_in_segment(std::size_t segment, std::size_t y, std::size_t x,
                            std::uint64_t t) const {
        const std::uint64_t t_a = timestamps_[segment];
        const std::uint64_t t_b = timestamps_[segment + 1];
        const double a = values_[segment].at(y, x);
        if (t == t_a) return a;
        const double b = values_[segment + 1].at(y, x);
        if (t == t_b) return b;
        const double alpha =
            static_cast<double>(t - t_a) / static_cast<double>(t_b - t_a);
        return a + alpha * (b - a);
    }

private:
    std::size_t segment_for(std::uint64_t t) const {
        if (t == t_last()) return timestamps_.size() - 2;
        const auto it = std::upper_bound(timestamps_.begin(), timestamps_.end(), t);
        return static_cast<std::size_t>(it - timestamps_.begin()) - 1;
    }

    SensorGeometry geometry_;
    std::vector<std::uint64_t> timestamps_;
    std::vector<ValueGrid> values_;
};

inline EsimReconstruction esim_reconstruct(const FrameSequence& frames, double knee = 20.0) {
    return EsimReconstruction(frames, knee);
}

namespace detail {

constexpr double kMotionEps = 1e-3;   // spatial-gradient regularizer
constexpr double kMotionMin = 1e-3;   // px/s clamp floor
constexpr double kMotionMax = 1e4;    // px/s clamp ceiling
constexpr double kContrastFloor = 0.01;

}  // namespace detail

/// Gradient-ratio motion proxy: per pixel
/// |V| = |temporal difference| / (spatial gradient magnitude + 1e-3) / dt,
/// clamped to [1e-3, 1e4] px/s; returns the maximum over pixels.
inline double estimate_motion_magnitude(const LogFrame& frame_a, const LogFrame& frame_b,
                                        double dt_s) {
    if (!(dt_s > 0)) throw ConfigError("motion estimate: dt must be > 0");
    frame_a.values.require_same_shape(frame_b.values, "estimate_motion_magnitude");
    const std::size_t h = frame_a.geometry.height, w = frame_a.geometry.width;
    double v_max = detail::kMotionMin;
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t y_up = y == 0 ? 0 : y - 1;
        const std::size_t y_dn = y + 1 >= h ? h - 1 : y + 1;
        // One-sided differences at the borders keep gradient magnitudes
        // consistent with the interior (span normalization below).
        const double span_y = static_cast<double>(y_dn - y_up);
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t x_lt = x == 0 ? 0 : x - 1;
            const std::size_t x_rt = x + 1 >= w ? w - 1 : x + 1;
            const double span_x = static_cast<double>(x_rt - x_lt);
            const double gx =
                span_x > 0
                    ? (frame_a.values.at(y, x_rt) - frame_a.values.at(y, x_lt)) / span_x
                    : 0.0;
            const double gy =
                span_y > 0
                    ? (frame_a.values.at(y_dn, x) - frame_a.values.at(y_up, x)) / span_y
                    : 0.0;
            const double gradient = std::sqrt(gx * gx + gy * gy);
            const double temporal = std::abs(frame_b.values.at(y, x) - frame_a.values.at(y, x));
            double v = temporal / (gradient + detail::kMotionEps) / dt_s;
            v = std::clamp(v, detail::kMotionMin, detail::kMotionMax);
            v_max = std::max(v_max, v);
        }
    }
    return v_max;
}

/// Adaptive sampling step: t_{k+1} = t_k + lambda_v / v_max, converted to
/// integer microseconds (ceiling, at least 1 µs).
inline std::uint64_t esim_next_sample_time(std::uint64_t t_k_us, double v_max, double lambda_v) {
    if (!(v_max > 0)) throw ConfigError("esim: motion magnitude must be > 0");
    if (!(lambda_v > 0)) throw ConfigError("esim: lambda_v must be > 0");
    const double step_us = std::ceil(lambda_v / v_max * 1e6);
    std::uint64_t step = 1;
    if (step_us >= 1.0) {
        step = step_us >= 9.0e18 ? static_cast<std::uint64_t>(9.0e18)
                                 : static_cast<std::uint64_t>(step_us);
    }
    return t_k_us + step;
}

/// Contrast-threshold simulator over the piecewise-linear reconstruction:
/// per-pixel thresholds C_p ~ C + N(0, sigma_C) drawn once; the signal is
/// sampled at motion-adaptive times (frame boundaries always sampled, at
/// most max_samples_per_interval interior samples); each sample emits
/// floor(|l - l_ref| / C_p) events per pixel and advances l_ref by the
/// emitted multiple.
inline EventStream esim_generate(const FrameSequence& frames, const EsimConfig& cfg) {
    cfg.validate();
    frames.validate();
    const EsimReconstruction recon(frames, cfg.knee);
    const SensorGeometry geo = frames.geometry;
    const std::size_t h = geo.height, w = geo.width;
    const std::size_t pixels = geo.pixel_count();

    std::vector<double> contrast(pixels, cfg.contrast);
    if (cfg.sigma_contrast > 0.0) {
        for (std::size_t pixel = 0; pixel < pixels; ++pixel) {
            KeyedRng rng_pixel(cfg.seed, rng::stream_id("esim.contrast", pixel));
            contrast[pixel] =
                std::max(detail::kContrastFloor,
                         cfg.contrast + cfg.sigma_contrast * rng_pixel.gaussian());
        }
    }

    ValueGrid reference = recon.frame_values(0);
    std::vector<Event> events;
    for (std::size_t segment = 0; segment + 1 < recon.frame_count(); ++segment) {
        const std::uint64_t t_a = recon.frame_time(segment);
        const std::uint64_t t_b = recon.frame_time(segment + 1);
        const double dt_s = static_cast<double>(t_b - t_a) * 1e-6;
        const double v_max = estimate_motion_magnitude(
            LogFrame{geo, t_a, recon.frame_values(segment)},
            LogFrame{geo, t_b, recon.frame_values(segment + 1)}, dt_s);

        std::uint64_t t = t_a;
        std::uint32_t interior_samples = 0;
        for (;;) {
            std::uint64_t t_next = esim_next_sample_time(t, v_max, cfg.lambda_v);
            bool boundary = false;
            if (t_next >= t_b || interior_samples >= cfg.max_samples_per_interval) {
                t_next = t_b;
                boundary = true;
            }
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const std::size_t pixel = y * w + x;
                    const double level = recon.value_in_segment(segment, y, x, t_next);
                    const double diff = level - reference.at(y, x);
                    const double c_p = contrast[pixel];
                    const std::uint64_t n_events = static_cast<std::uint64_t>(
                        std::floor(std::abs(diff) / c_p + 1e-9));
                    if (n_events == 0) continue;
                    const std::int8_t polarity = diff > 0 ? 1 : -1;
                    for (std::uint64_t j = 0; j < n_events; ++j) {
                        events.push_back(Event{t_next, static_cast<std::uint16_t>(x),
                                               static_cast<std::uint16_t>(y), polarity});
                    }
                    reference.at(y, x) +=
                        static_cast<double>(n_events) * c_p * static_cast<double>(polarity);
                }
            }
            if (boundary) break;
            ++interior_samples;
            t = t_next;
        }
    }
    std::sort(events.begin(), events.end(), event_order);
    return EventStream{geo, std::move(events)};
}

}  // namespace eqstream
