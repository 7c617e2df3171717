#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "eqstream/errors.hpp"
#include "eqstream/events.hpp"
#include "eqstream/frames.hpp"

namespace eqstream {

enum class TlogMode { fraction_of_max, absolute };

struct Pix2NvsConfig {
    double threshold = 0.1;  // on |d|, lin-log units
    TlogMode tlog_mode = TlogMode::fraction_of_max;
    double tlog_fraction = 0.10;  // of the sequence-wide luminance maximum
    double tlog_absolute = 25.5;  // used in absolute mode

    void validate() const {
        if (!(threshold > 0)) throw ConfigError("pix2nvs: threshold must be > 0");
        if (!(tlog_fraction > 0 && tlog_fraction < 1)) {
            throw ConfigError("pix2nvs: tlog_fraction must be in (0, 1)");
        }
        if (tlog_absolute < 0) throw ConfigError("pix2nvs: tlog_absolute must be >= 0");
    }
};

inline double pix2nvs_tlog(const FrameSequence& frames, const Pix2NvsConfig& cfg) {
    if (cfg.tlog_mode == TlogMode::absolute) return cfg.tlog_absolute;
    double max_luma = 0.0;
    for (const LumaFrame& frame : frames.frames) {
        for (std::size_t i = 0; i < frame.values.size(); ++i) {
            max_luma = std::max(max_luma, frame.values[i]);
        }
    }
    return cfg.tlog_fraction * max_luma;
}

/// Frame-difference detector: per consecutive frame pair and pixel,
/// d = l_cur - (sum of the previous frame's 4-neighborhood)/4 with border
/// replication; one event of polarity sgn(d) when |d| > threshold, stamped
/// at the current frame's timestamp.
inline EventStream pix2nvs_generate(const FrameSequence& frames, const Pix2NvsConfig& cfg) {
    cfg.validate();
    frames.validate();
    const double t_log = pix2nvs_tlog(frames, cfg);
    const SensorGeometry geo = frames.geometry;
    const std::size_t h = geo.height, w = geo.width;

    EventStream out{geo, {}};
    LogFrame prev = pix2nvs_linlog(frames.frames[0], t_log);
    for (std::size_t k = 1; k < frames.frames.size(); ++k) {
        const LogFrame cur = pix2nvs_linlog(frames.frames[k], t_log);
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t y_up = y == 0 ? 0 : y - 1;
            const std::size_t y_dn = y + 1 >= h ? h - 1 : y + 1;
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t x_lt = x == 0 ? 0 : x - 1;
                const std::size_t x_rt = x + 1 >= w ? w - 1 : x + 1;
                const double neighborhood = (prev.values.at(y, x_lt) + prev.values.at(y, x_rt) +
                                             prev.values.at(y_up, x) + prev.values.at(y_dn, x)) /
                                            4.0;
                const double d = cur.values.at(y, x) - neighborhood;
                if (std::abs(d) > cfg.threshold) {
                    out.events.push_back(Event{cur.t, static_cast<std::uint16_t>(x),
                                               static_cast<std::uint16_t>(y),
                                               d > 0 ? std::int8_t{1} : std::int8_t{-1}});
                }
            }
        }
        prev = cur;
    }
    // Row-major emission per frame already orders events by (t, y, x).
    return out;
}

}  // namespace eqstream
