#pragma once

#include <cstdint>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/events.hpp"
#include "eqstream/grid.hpp"
#include "eqstream/parallel.hpp"

namespace eqstream {

struct TensorizeConfig {
    std::uint32_t num_bins = 10;          // T
    std::uint64_t window_us = 50'000;     // dT
    std::uint64_t window_start_us = 0;    // t0

    void validate() const {
        if (num_bins == 0) throw ConfigError("tensorize: num_bins must be >= 1");
        if (window_us == 0) throw ConfigError("tensorize: window_us must be > 0");
    }
};

/// Stacked temporal-bin counts, shape (2T, H, W). Channel layout is
/// 2*bin + polarity_index with polarity_index 0 for OFF (-1) and 1 for
/// ON (+1); the feature network's first convolution depends on this.
struct EventTensor {
    SensorGeometry geometry;
    std::uint32_t num_bins = 0;
    ValueGrid values;           // (2T, H, W)
    std::uint64_t skipped = 0;  // out-of-window or out-of-bounds events

    std::size_t channels() const { return 2 * static_cast<std::size_t>(num_bins); }
};

inline std::size_t polarity_index(std::int8_t p) { return p > 0 ? 1 : 0; }

/// Bin membership over half-open [t0, t0+dT) in exact integer
/// microseconds: bin(t) = min(T-1, (t-t0)*T / dT).
inline std::uint32_t bin_for_offset(std::uint64_t offset_us, std::uint32_t num_bins,
                                    std::uint64_t window_us) {
    const unsigned __int128 scaled =
        static_cast<unsigned __int128>(offset_us) * num_bins;
    std::uint64_t bin = static_cast<std::uint64_t>(scaled / window_us);
    if (bin >= num_bins) bin = num_bins - 1;
    return static_cast<std::uint32_t>(bin);
}

inline void accumulate_range(const EventStream& stream, const TensorizeConfig& cfg,
                             std::size_t begin, std::size_t end, ValueGrid& values,
                             std::uint64_t& skipped) {
    const std::uint64_t t0 = cfg.window_start_us;
    const SensorGeometry geo = stream.geometry;
    for (std::size_t i = begin; i < end; ++i) {
        const Event& e = stream.events[i];
        if (e.t < t0 || e.t - t0 >= cfg.window_us || e.x >= geo.width || e.y >= geo.height) {
            ++skipped;
            continue;
        }
        const std::uint32_t bin = bin_for_offset(e.t - t0, cfg.num_bins, cfg.window_us);
        const std::size_t channel = 2 * static_cast<std::size_t>(bin) + polarity_index(e.p);
        values.at(channel, e.y, e.x) += 1.0;
    }
}

/// Counts in-window, in-bounds events into channel 2*bin+pol at (y, x).
/// Everything else lands in the skipped tally, never an error. The event
/// sequence is partitioned across threads and partial tensors are summed
/// in chunk order; counts are integers, so the result is bit-identical
/// for any thread cap.
inline EventTensor tensorize(const EventStream& stream, const TensorizeConfig& cfg) {
    cfg.validate();
    EventTensor out;
    out.geometry = stream.geometry;
    out.num_bins = cfg.num_bins;
    const std::size_t channels = 2 * static_cast<std::size_t>(cfg.num_bins);
    out.values = ValueGrid({channels, static_cast<std::size_t>(stream.geometry.height),
                            static_cast<std::size_t>(stream.geometry.width)});

    const std::size_t n = stream.events.size();
    const std::size_t chunks = parallel::chunk_count(n);
    if (chunks <= 1) {
        std::uint64_t skipped = 0;
        accumulate_range(stream, cfg, 0, n, out.values, skipped);
        out.skipped = skipped;
        return out;
    }

    std::vector<ValueGrid> partial(chunks, out.values);
    std::vector<std::uint64_t> partial_skipped(chunks, 0);
    parallel::for_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        accumulate_range(stream, cfg, begin, end, partial[c], partial_skipped[c]);
    });
    for (std::size_t c = 0; c < chunks; ++c) {
        out.values += partial[c];
        out.skipped += partial_skipped[c];
    }
    return out;
}

/// Step k covers [t0 + k*dT, t0 + (k+1)*dT).
inline std::vector<EventTensor> tensorize_sequence(const EventStream& stream,
                                                   const TensorizeConfig& cfg,
                                                   std::size_t num_steps) {
    cfg.validate();
    if (num_steps == 0) throw ConfigError("tensorize_sequence: num_steps must be >= 1");
    std::vector<EventTensor> steps;
    steps.reserve(num_steps);
    for (std::size_t k = 0; k < num_steps; ++k) {
        TensorizeConfig step_cfg = cfg;
        step_cfg.window_start_us = cfg.window_start_us + k * cfg.window_us;
        steps.push_back(tensorize(stream, step_cfg));
    }
    return steps;
}

}  // namespace eqstream
