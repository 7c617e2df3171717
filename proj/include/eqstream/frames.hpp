#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/events.hpp"
#include "eqstream/grid.hpp"

namespace eqstream {

/// Per-pixel luminance at one timestamp. Values are real and >= 0.
struct LumaFrame {
    SensorGeometry geometry;
    std::uint64_t t = 0;  // microseconds
    ValueGrid values;     // (H, W)

    double at(std::size_t y, std::size_t x) const { return values.at(y, x); }
    double& at(std::size_t y, std::size_t x) { return values.at(y, x); }
};

/// Same layout as LumaFrame but values are lin-log intensities.
struct LogFrame {
    SensorGeometry geometry;
    std::uint64_t t = 0;
    ValueGrid values;

    double at(std::size_t y, std::size_t x) const { return values.at(y, x); }
    double& at(std::size_t y, std::size_t x) { return values.at(y, x); }
};

inline LumaFrame make_luma_frame(SensorGeometry geo, std::uint64_t t, double fill = 0.0) {
    return LumaFrame{geo, t,
                     ValueGrid({static_cast<std::size_t>(geo.height),
                                static_cast<std::size_t>(geo.width)},
                               fill)};
}

struct FrameSequence {
    SensorGeometry geometry;
    std::vector<LumaFrame> frames;  // strictly increasing timestamps

    void validate() const {
        if (frames.size() < 2) {
            throw ValidationError("frame sequence needs at least 2 frames");
        }
        for (std::size_t i = 0; i < frames.size(); ++i) {
            if (!(frames[i].geometry == geometry)) {
                throw ValidationError("frame geometry mismatch at frame " + std::to_string(i));
            }
            if (i > 0 && frames[i].t <= frames[i - 1].t) {
                throw ValidationError("frame timestamps must strictly increase (frame " +
                                      std::to_string(i) + ")");
            }
        }
    }
};

struct RgbFrame {
    SensorGeometry geometry;
    std::uint64_t t = 0;
    ValueGrid values;  // (3, H, W), channels R, G, B in [0, 255]
};

/// ITU-R 601 luma: y = 0.299 R + 0.587 G + 0.114 B.
inline LumaFrame rgb_to_luma(const RgbFrame& rgb) {
    if (rgb.values.rank() != 3 || rgb.values.dim(0) != 3) {
        throw ValidationError("rgb_to_luma: expected 3 channels");
    }
    LumaFrame out = make_luma_frame(rgb.geometry, rgb.t);
    const std::size_t h = rgb.geometry.height, w = rgb.geometry.width;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            out.at(y, x) = 0.299 * rgb.values.at(0, y, x) + 0.587 * rgb.values.at(1, y, x) +
                           0.114 * rgb.values.at(2, y, x);
        }
    }
    return out;
}

/// Linear below the threshold, natural log above it:
/// l = y for y <= T_log, ln(y) otherwise.
inline double pix2nvs_linlog_value(double y, double t_log) {
    return y <= t_log ? y : std::log(y);
}

inline LogFrame pix2nvs_linlog(const LumaFrame& frame, double t_log) {
    LogFrame out{frame.geometry, frame.t, frame.values};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = pix2nvs_linlog_value(out.values[i], t_log);
    }
    return out;
}

/// Value-continuous lin-log: l = L * ln(knee)/knee for L < knee,
/// ln(L) for L >= knee. Both branches meet at ln(knee).
inline double v2e_linlog_value(double luma, double knee = 20.0) {
    if (luma < knee) return luma * std::log(knee) / knee;
    return std::log(luma);
}

inline LogFrame v2e_linlog(const LumaFrame& frame, double knee = 20.0) {
    LogFrame out{frame.geometry, frame.t, frame.values};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = v2e_linlog_value(out.values[i], knee);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Frame manifest: a directory with frames.txt listing
// `timestamp_us<TAB>filename`, frames stored as 8-bit P5 (gray) or P6
// (RGB, converted through rgb_to_luma).
// ---------------------------------------------------------------------------

namespace detail {

inline int pnm_next_token(const std::vector<std::uint8_t>& buf, std::size_t& pos,
                          const std::string& path) {
    // Skip whitespace and '#' comments.
    while (pos < buf.size()) {
        const char c = static_cast<char>(buf[pos]);
        if (c == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= buf.size()) throw ParseError(path + ": truncated PNM header");
    int value = 0;
    bool any = false;
    while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
        value = value * 10 + (buf[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any) throw ParseError(path + ": malformed PNM header token");
    return value;
}

}  // namespace detail

/// Reads an 8-bit binary PGM (P5) or PPM (P6); PPM pixels pass through
/// rgb_to_luma.
inline LumaFrame read_pnm_luma(const std::string& path, std::uint64_t t = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6')) {
        throw ParseError(path + ": not a binary PGM/PPM file");
    }
    const bool rgb = buf[1] == '6';
    std::size_t pos = 2;
    const int w = detail::pnm_next_token(buf, pos, path);
    const int h = detail::pnm_next_token(buf, pos, path);
    const int maxval = detail::pnm_next_token(buf, pos, path);
    if (w < 1 || h < 1 || w > 0xffff || h > 0xffff) {
        throw ParseError(path + ": unsupported dimensions");
    }
    if (maxval != 255) throw ParseError(path + ": only 8-bit maxval 255 supported");
    ++pos;  // single whitespace byte after maxval
    const std::size_t samples = static_cast<std::size_t>(w) * h * (rgb ? 3 : 1);
    if (buf.size() - pos < samples) throw ParseError(path + ": truncated pixel data");

    SensorGeometry geo{static_cast<std::uint16_t>(w), static_cast<std::uint16_t>(h)};
    if (!rgb) {
        LumaFrame frame = make_luma_frame(geo, t);
        for (std::size_t i = 0; i < samples; ++i) {
            frame.values[i] = static_cast<double>(buf[pos + i]);
        }
        return frame;
    }
    RgbFrame rgb_frame{geo, t,
                       ValueGrid({3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)})};
    for (std::size_t y = 0; y < static_cast<std::size_t>(h); ++y) {
        for (std::size_t x = 0; x < static_cast<std::size_t>(w); ++x) {
            const std::size_t base = pos + 3 * (y * w + x);
            rgb_frame.values.at(0, y, x) = buf[base];
            rgb_frame.values.at(1, y, x) = buf[base + 1];
            rgb_frame.values.at(2, y, x) = buf[base + 2];
        }
    }
    return rgb_to_luma(rgb_frame);
}

inline FrameSequence read_frame_manifest(const std::string& dir) {
    const std::string manifest = dir + "/frames.txt";
    std::ifstream in(manifest);
    if (!in) throw ParseError("cannot open manifest: " + manifest);
    FrameSequence seq;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(manifest + ": expected timestamp_us<TAB>filename at line " +
                             std::to_string(lineno));
        }
        std::uint64_t t = 0;
        try {
            t = std::stoull(line.substr(0, tab));
        } catch (const std::exception&) {
            throw ParseError(manifest + ": bad timestamp at line " + std::to_string(lineno));
        }
        LumaFrame frame = read_pnm_luma(dir + "/" + line.substr(tab + 1), t);
        if (seq.frames.empty()) {
            seq.geometry = frame.geometry;
        }
        seq.frames.push_back(std::move(frame));
    }
    if (seq.frames.size() < 2) {
        throw ParseError(manifest + ": manifest must list at least 2 frames");
    }
    seq.validate();
    return seq;
}

/// Writes an 8-bit binary PGM; values clamped to [0, 255] and rounded.
inline void write_pgm(const LumaFrame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << "P5\n" << frame.geometry.width << " " << frame.geometry.height << "\n255\n";
    for (std::size_t i = 0; i < frame.values.size(); ++i) {
        double v = std::nearbyint(frame.values[i]);
        if (v < 0) v = 0;
        if (v > 255) v = 255;
        out.put(static_cast<char>(static_cast<std::uint8_t>(v)));
    }
    if (!out) throw ParseError("write failed: " + path);
}

}  // namespace eqstream
