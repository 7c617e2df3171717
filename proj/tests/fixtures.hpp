#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "eqstream/events.hpp"
#include "eqstream/frames.hpp"

namespace fixtures {

using namespace eqstream;

/// Sorted random stream over [0, duration_us); uses std::mt19937_64 so the
/// fixture generator shares no code with the library RNG.
inline EventStream random_stream(std::uint64_t seed, SensorGeometry geo, std::size_t count,
                                 std::uint64_t duration_us) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::uint64_t> dist_t(0, duration_us - 1);
    std::uniform_int_distribution<int> dist_x(0, geo.width - 1);
    std::uniform_int_distribution<int> dist_y(0, geo.height - 1);
    std::uniform_int_distribution<int> dist_p(0, 1);
    EventStream stream{geo, {}};
    stream.events.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Event e;
        e.t = dist_t(gen);
        e.x = static_cast<std::uint16_t>(dist_x(gen));
        e.y = static_cast<std::uint16_t>(dist_y(gen));
        e.p = dist_p(gen) ? 1 : -1;
        stream.events.push_back(e);
    }
    std::sort(stream.events.begin(), stream.events.end(), event_order);
    return stream;
}

/// Bright vertical bar on a dark background, shifted right by step_px per
/// frame (wrapping), frame k stamped at k * dt_us.
inline FrameSequence moving_bar(SensorGeometry geo, std::size_t num_frames, std::uint64_t dt_us,
                                double bg = 10.0, double fg = 200.0, std::size_t bar_width = 2,
                                std::size_t step_px = 1) {
    FrameSequence seq;
    seq.geometry = geo;
    for (std::size_t k = 0; k < num_frames; ++k) {
        LumaFrame frame = make_luma_frame(geo, k * dt_us, bg);
        const std::size_t offset = (k * step_px) % geo.width;
        for (std::size_t y = 0; y < geo.height; ++y) {
            for (std::size_t b = 0; b < bar_width; ++b) {
                frame.at(y, (offset + b) % geo.width) = fg;
            }
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

/// Writes seq as PGM files plus frames.txt into dir (created if needed).
inline void write_manifest(const FrameSequence& seq, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir + "/frames.txt");
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        const std::string name = "frame_" + std::to_string(k) + ".pgm";
        write_pgm(seq.frames[k], dir + "/" + name);
        manifest << seq.frames[k].t << "\t" << name << "\n";
    }
}

/// Fresh scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& name) {
    const std::string dir =
        (std::filesystem::temp_directory_path() / ("eqstream_" + name)).string();
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures
