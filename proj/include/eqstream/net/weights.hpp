#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/grid.hpp"
#include "eqstream/net/config.hpp"
#include "eqstream/rng.hpp"

namespace eqstream::net {

struct ParameterSpec {
    std::string name;
    std::vector<std::size_t> dims;
    std::size_t fan_in;         // controls the init bound sqrt(3 / fan_in)
    double init_offset = 0.0;   // added after the uniform draw (forget-gate bias)
    std::size_t offset_begin = 0, offset_end = 0;  // element range the offset applies to
};

/// Parameter table for the three-scale network. Names are stable; they key
/// both the weight file and the deterministic initializer.
inline std::vector<ParameterSpec> parameter_spec(const NetworkConfig& cfg) {
    cfg.validate();
    std::vector<ParameterSpec> out;
    const std::size_t k = cfg.mixing_kernel;
    std::size_t in_ch = cfg.input_channels;
    for (std::size_t i = 0; i < NetworkConfig::kNumScales; ++i) {
        const std::string prefix = "scale" + std::to_string(i + 1) + ".";
        const std::size_t w = cfg.widths[i];
        const std::size_t s = cfg.strides[i];
        auto conv = [&](const std::string& name, std::size_t c_out, std::size_t c_in,
                        std::size_t kernel) {
            const std::size_t fan_in = c_in * kernel * kernel;
            out.push_back({prefix + name + ".weight", {c_out, c_in, kernel, kernel}, fan_in});
            out.push_back({prefix + name + ".bias", {c_out}, fan_in});
        };
        conv("down", w, in_ch, s);
        conv("mix", w, w, k);
        conv("lstm", 4 * w, 2 * w, k);
        // Forget gate occupies the second block of lstm bias channels; its
        // bias starts at +1 so early steps keep their cell state.
        out.back().init_offset = 1.0;
        out.back().offset_begin = w;
        out.back().offset_end = 2 * w;
        conv("out_z", w, w, k);
        conv("out_h", w, w, k);
        out.push_back({prefix + "ln.gain", {w}, w});
        out.push_back({prefix + "ln.offset", {w}, w});
        conv("ffn1", w, w, k);
        conv("ffn2", w, w, k);
        in_ch = w;
    }
    return out;
}

struct WeightStore {
    std::map<std::string, ValueGrid> tensors;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;  // provenance for reports; not serialized

    const ValueGrid& get(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ConfigError("weights: missing parameter " + name);
        return it->second;
    }
};

inline double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

/// Fan-in-scaled uniform init, one keyed draw per (seed, name, element).
/// Values are narrowed to float32 immediately so an init/save/load round
/// trip is bit-identical.
inline WeightStore init_weights(const NetworkConfig& cfg, std::uint64_t seed) {
    WeightStore store;
    store.config_hash = cfg.hash();
    store.seed = seed;
    for (const ParameterSpec& spec : parameter_spec(cfg)) {
        ValueGrid tensor(spec.dims);
        const double bound = std::sqrt(3.0 / static_cast<double>(spec.fan_in));
        const std::uint64_t stream = rng::stream_id(spec.name, 0);
        for (std::size_t j = 0; j < tensor.size(); ++j) {
            const double u =
                static_cast<double>(rng::keyed_bits(seed, stream, j) >> 11) * 0x1.0p-53;
            double v = -bound + 2.0 * bound * u;
            if (j >= spec.offset_begin && j < spec.offset_end) v += spec.init_offset;
            tensor[j] = quantize_f32(v);
        }
        store.tensors.emplace(spec.name, std::move(tensor));
    }
    return store;
}

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    }
    put_bytes(os, buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const char* what) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw FormatError(std::string("weights: truncated file reading ") + what);
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace detail

inline constexpr char kWeightMagic[4] = {'E', 'Q', 'W', '1'};
inline constexpr std::uint16_t kWeightVersion = 1;

inline void save_weights(const WeightStore& store, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("weights: cannot open for writing: " + path);
    detail::put_bytes(os, kWeightMagic, 4);
    detail::put_le<std::uint16_t>(os, kWeightVersion);
    detail::put_le<std::uint64_t>(os, store.config_hash);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(store.tensors.size()));
    for (const auto& [name, tensor] : store.tensors) {
        detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        detail::put_bytes(os, name.data(), name.size());
        detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.rank()));
        for (std::size_t d : tensor.dims()) {
            detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        }
        for (std::size_t j = 0; j < tensor.size(); ++j) {
            const float f = static_cast<float>(tensor[j]);
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof(bits));
            detail::put_le<std::uint32_t>(os, bits);
        }
    }
    if (!os) throw FormatError("weights: write failed: " + path);
}

inline WeightStore load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("weights: cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw FormatError("weights: truncated file reading magic");
    if (std::memcmp(magic, kWeightMagic, 4) != 0) {
        throw FormatError("weights: bad magic (expected EQW1)");
    }
    const auto version = detail::get_le<std::uint16_t>(is, "version");
    if (version != kWeightVersion) {
        throw FormatError("weights: unsupported version " + std::to_string(version));
    }
    WeightStore store;
    store.config_hash = detail::get_le<std::uint64_t>(is, "config hash");
    const auto count = detail::get_le<std::uint32_t>(is, "tensor count");
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = detail::get_le<std::uint16_t>(is, "name length");
        std::string name(name_len, '\0');
        if (name_len > 0 && !is.read(name.data(), name_len)) {
            throw FormatError("weights: truncated file reading name");
        }
        const auto ndim = detail::get_le<std::uint8_t>(is, "rank");
        if (ndim == 0 || ndim > 4) {
            throw FormatError("weights: tensor " + name + " has unsupported rank " +
                              std::to_string(ndim));
        }
        std::vector<std::size_t> dims(ndim);
        std::size_t total = 1;
        for (auto& d : dims) {
            const auto v = detail::get_le<std::uint32_t>(is, "dimension");
            if (v == 0) throw FormatError("weights: tensor " + name + " has a zero dimension");
            d = v;
            total *= v;
        }
        ValueGrid tensor(dims);
        for (std::size_t j = 0; j < total; ++j) {
            const auto bits = detail::get_le<std::uint32_t>(is, "tensor data");
            float f;
            std::memcpy(&f, &bits, sizeof(f));
            tensor[j] = static_cast<double>(f);
        }
        if (!store.tensors.emplace(std::move(name), std::move(tensor)).second) {
            throw FormatError("weights: duplicate tensor name");
        }
    }
    // Trailing bytes mean the writer and reader disagree about the layout.
    if (is.peek() != std::char_traits<char>::eof()) {
        throw FormatError("weights: trailing bytes after last tensor");
    }
    return store;
}

/// Load and check the store against a concrete network shape: the config
/// hash must match and the name/shape table must agree exactly.
inline WeightStore load_weights(const std::string& path, const NetworkConfig& cfg) {
    WeightStore store = load_weights(path);
    if (store.config_hash != cfg.hash()) {
        throw ConfigError("weights: file was written for a different network configuration");
    }
    const auto spec = parameter_spec(cfg);
    if (store.tensors.size() != spec.size()) {
        throw ConfigError("weights: parameter count mismatch");
    }
    for (const ParameterSpec& s : spec) {
        auto it = store.tensors.find(s.name);
        if (it == store.tensors.end()) throw ConfigError("weights: missing parameter " + s.name);
        if (it->second.dims() != s.dims) {
            throw ConfigError("weights: parameter " + s.name + " has unexpected shape");
        }
    }
    return store;
}

}  // namespace eqstream::net
