#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace eqstream {

// Counter-based keyed generator: every draw is a pure function of
// (seed, stream, counter), so per-pixel sequences are independent and
// parallel execution cannot reorder draws.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t keyed_bits(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t counter) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ stream);
    h = mix64(h ^ counter);
    return h;
}

/// Stable stream id for a named purpose, pixel (or other slot) pair.
inline std::uint64_t stream_id(std::string_view purpose, std::uint64_t slot) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix64(h ^ slot);
}

}  // namespace rng

/// Sequential view over one (seed, stream) lane of the counter-based
/// generator. Copy-cheap; the counter is the only state.
class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t start_counter = 0)
        : seed_(seed), stream_(stream), counter_(start_counter) {}

    std::uint64_t next_u64() { return rng::keyed_bits(seed_, stream_, counter_++); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (consumes two draws).
    double gaussian() {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

    /// Exponential waiting time with the given rate (> 0).
    double exponential(double rate) {
        double u = 1.0 - uniform01();
        return -std::log(u) / rate;
    }

    /// Poisson count by Knuth's product method; fine for desk-scale means.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        double prod = 1.0;
        std::uint64_t k = 0;
        do {
            prod *= uniform01();
            ++k;
        } while (prod > limit);
        return k - 1;
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace eqstream
