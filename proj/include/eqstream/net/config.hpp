#pragma once

#include <array>
#include <cstdint>
#include <sstream>
#include <string>

#include "eqstream/errors.hpp"

namespace eqstream::net {

/// Three recurrent scales; the cumulative downsampling factors must come out
/// to 1/4, 1/8 and 1/16 so the padded input (a multiple of 16 per side)
/// divides evenly everywhere.
struct NetworkConfig {
    static constexpr std::size_t kNumScales = 3;
    static constexpr std::size_t kPadMultiple = 16;

    std::uint32_t input_channels = 20;
    std::array<std::uint32_t, kNumScales> strides{4, 2, 2};
    std::array<std::uint32_t, kNumScales> widths{16, 32, 64};
    std::uint32_t mixing_kernel = 3;

    void validate() const {
        if (input_channels == 0) throw ConfigError("network: input_channels must be >= 1");
        static constexpr std::array<std::uint32_t, kNumScales> want{4, 8, 16};
        std::uint32_t cumulative = 1;
        for (std::size_t i = 0; i < kNumScales; ++i) {
            if (strides[i] == 0) throw ConfigError("network: strides must be >= 1");
            cumulative *= strides[i];
            if (cumulative != want[i]) {
                throw ConfigError("network: cumulative strides must give spatial factors "
                                  "1/4, 1/8, 1/16");
            }
            if (widths[i] == 0) throw ConfigError("network: widths must be >= 1");
        }
        if (mixing_kernel % 2 == 0) throw ConfigError("network: mixing kernel must be odd");
    }

    /// FNV-1a over the canonical description; stamped into weight files so a
    /// store cannot be loaded into a differently shaped network.
    std::uint64_t hash() const {
        std::ostringstream os;
        os << "in=" << input_channels << ";strides=" << strides[0] << "," << strides[1] << ","
           << strides[2] << ";widths=" << widths[0] << "," << widths[1] << "," << widths[2]
           << ";k=" << mixing_kernel;
        const std::string canon = os.str();
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : canon) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

}  // namespace eqstream::net
