#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace eqstream {

struct SensorGeometry {
    std::uint16_t width = 0;
    std::uint16_t height = 0;

    bool operator==(const SensorGeometry&) const = default;
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }
};

/// One brightness-change event: timestamp in microseconds, 0-based pixel
/// coordinates, polarity +1 (ON) or -1 (OFF).
struct Event {
    std::uint64_t t = 0;
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t p = 1;

    bool operator==(const Event&) const = default;
};

/// Ordering used everywhere a stream is finalized: (t, y, x, p).
inline bool event_order(const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.p < b.p;
}

struct EventStream {
    SensorGeometry geometry;
    std::vector<Event> events;

    std::uint64_t duration_us() const {
        if (events.empty()) return 0;
        return events.back().t - events.front().t;
    }
};

struct ValidationReport {
    std::uint64_t out_of_bounds = 0;
    std::uint64_t non_monotone = 0;
    std::uint64_t invalid_polarity = 0;
    // First offending event index per violation class; npos when clean.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t first_out_of_bounds = npos;
    std::size_t first_non_monotone = npos;
    std::size_t first_invalid_polarity = npos;

    bool clean() const {
        return out_of_bounds == 0 && non_monotone == 0 && invalid_polarity == 0;
    }
};

/// Counts violations without aborting; a clean stream yields all zeros.
inline ValidationReport validate_stream(const EventStream& stream) {
    ValidationReport report;
    std::uint64_t prev_t = 0;
    bool have_prev = false;
    for (std::size_t i = 0; i < stream.events.size(); ++i) {
        const Event& e = stream.events[i];
        if (e.x >= stream.geometry.width || e.y >= stream.geometry.height) {
            if (report.out_of_bounds++ == 0) report.first_out_of_bounds = i;
        }
        if (e.p != 1 && e.p != -1) {
            if (report.invalid_polarity++ == 0) report.first_invalid_polarity = i;
        }
        if (have_prev && e.t < prev_t) {
            if (report.non_monotone++ == 0) report.first_non_monotone = i;
        }
        prev_t = e.t;
        have_prev = true;
    }
    return report;
}

}  // namespace eqstream
