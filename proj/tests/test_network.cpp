#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "eqstream/net/network.hpp"
#include "eqstream/net/weights.hpp"
#include "eqstream/parallel.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eqstream;
using namespace eqstream::net;

namespace {

NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.input_channels = 4;
    cfg.widths = {2, 3, 4};
    return cfg;
}

std::vector<ValueGrid> random_inputs(const NetworkConfig& cfg, std::size_t steps, std::size_t h,
                                     std::size_t w, std::uint64_t seed) {
    std::vector<ValueGrid> inputs;
    for (std::size_t s = 0; s < steps; ++s) {
        ValueGrid x({cfg.input_channels, h, w});
        oracles::fill_random(x, seed + s, 2.0);
        inputs.push_back(std::move(x));
    }
    return inputs;
}

}  // namespace

TEST_CASE("network config validation and hashing", "[network]") {
    NetworkConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.hash() != 0);

    NetworkConfig other = cfg;
    other.input_channels = 10;
    CHECK(other.hash() != cfg.hash());

    NetworkConfig bad = cfg;
    bad.strides = {2, 2, 2};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.strides = {4, 2, 3};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    NetworkConfig even = cfg;
    even.mixing_kernel = 4;
    CHECK_THROWS_AS(even.validate(), ConfigError);
}

TEST_CASE("parameter table names and shapes", "[network]") {
    NetworkConfig cfg;  // 20 input channels, widths 16/32/64
    auto spec = parameter_spec(cfg);
    CHECK(spec.size() == 48u);  // 16 tensors per scale

    auto find = [&](const std::string& name) -> const ParameterSpec& {
        for (const auto& s : spec) {
            if (s.name == name) return s;
        }
        FAIL("missing parameter " + name);
        return spec.front();
    };
    CHECK(find("scale1.down.weight").dims == std::vector<std::size_t>{16, 20, 4, 4});
    CHECK(find("scale2.down.weight").dims == std::vector<std::size_t>{32, 16, 2, 2});
    CHECK(find("scale3.down.weight").dims == std::vector<std::size_t>{64, 32, 2, 2});
    CHECK(find("scale1.lstm.weight").dims == std::vector<std::size_t>{64, 32, 3, 3});
    CHECK(find("scale1.lstm.bias").dims == std::vector<std::size_t>{64});
    CHECK(find("scale3.ln.gain").dims == std::vector<std::size_t>{64});
    CHECK(find("scale2.ffn2.weight").dims == std::vector<std::size_t>{32, 32, 3, 3});

    const auto& lstm_bias = find("scale1.lstm.bias");
    CHECK(lstm_bias.init_offset == 1.0);
    CHECK(lstm_bias.offset_begin == 16u);
    CHECK(lstm_bias.offset_end == 32u);
}

TEST_CASE("weight init is fan-in bounded with the forget-gate offset", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 12345);
    CHECK(store.config_hash == cfg.hash());
    CHECK(store.seed == 12345u);

    for (const ParameterSpec& spec : parameter_spec(cfg)) {
        const ValueGrid& t = store.get(spec.name);
        REQUIRE(t.dims() == spec.dims);
        const double bound = std::sqrt(3.0 / static_cast<double>(spec.fan_in)) + 1e-6;
        for (std::size_t j = 0; j < t.size(); ++j) {
            const double expect_center =
                (j >= spec.offset_begin && j < spec.offset_end) ? spec.init_offset : 0.0;
            CHECK(std::fabs(t[j] - expect_center) <= bound);
            CHECK(t[j] == static_cast<double>(static_cast<float>(t[j])));  // f32 grid
        }
    }

    // Same seed reproduces, another seed differs.
    WeightStore again = init_weights(cfg, 12345);
    CHECK(again.tensors == store.tensors);
    WeightStore other = init_weights(cfg, 54321);
    CHECK_FALSE(other.tensors == store.tensors);
}

TEST_CASE("weight draws are independent per parameter name", "[network]") {
    WeightStore store = init_weights(tiny_config(), 9);
    const ValueGrid& a = store.get("scale1.mix.weight");
    const ValueGrid& b = store.get("scale2.mix.weight");
    std::size_t same = 0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) same += a[i] == b[i] ? 1 : 0;
    CHECK(same == 0u);
}

TEST_CASE("weight file round trip is bit exact", "[network]") {
    const std::filesystem::path dir = fixtures::scratch_dir("weights_roundtrip");
    const std::string path = (dir / "w.eqw").string();
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 77);
    save_weights(store, path);

    WeightStore loaded = load_weights(path, cfg);
    CHECK(loaded.config_hash == store.config_hash);
    CHECK(loaded.tensors == store.tensors);

    // Header bytes: magic, version 1, config hash little-endian.
    std::ifstream is(path, std::ios::binary);
    char head[14];
    REQUIRE(is.read(head, sizeof(head)));
    CHECK(head[0] == 'E');
    CHECK(head[1] == 'Q');
    CHECK(head[2] == 'W');
    CHECK(head[3] == '1');
    CHECK(head[4] == 1);
    CHECK(head[5] == 0);
    std::uint64_t hash = 0;
    for (int i = 0; i < 8; ++i) {
        hash |= static_cast<std::uint64_t>(static_cast<unsigned char>(head[6 + i])) << (8 * i);
    }
    CHECK(hash == cfg.hash());
}

TEST_CASE("weight file corruption is rejected", "[network]") {
    const std::filesystem::path dir = fixtures::scratch_dir("weights_corrupt");
    const std::string path = (dir / "w.eqw").string();
    NetworkConfig cfg = tiny_config();
    save_weights(init_weights(cfg, 5), path);

    auto read_all = [&]() {
        std::ifstream is(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    auto write_all = [&](const std::string& bytes, const std::string& p) {
        std::ofstream os(p, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    };
    const std::string good = read_all();

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    write_all(bad_magic, (dir / "bad_magic.eqw").string());
    CHECK_THROWS_AS(load_weights((dir / "bad_magic.eqw").string()), FormatError);

    std::string bad_version = good;
    bad_version[4] = 2;
    write_all(bad_version, (dir / "bad_version.eqw").string());
    CHECK_THROWS_AS(load_weights((dir / "bad_version.eqw").string()), FormatError);

    for (std::size_t cut : {std::size_t{3}, std::size_t{10}, std::size_t{20},
                            good.size() / 2, good.size() - 1}) {
        write_all(good.substr(0, cut), (dir / "trunc.eqw").string());
        CHECK_THROWS_AS(load_weights((dir / "trunc.eqw").string()), FormatError);
    }

    write_all(good + "x", (dir / "trailing.eqw").string());
    CHECK_THROWS_AS(load_weights((dir / "trailing.eqw").string()), FormatError);

    CHECK_THROWS_AS(load_weights((dir / "missing.eqw").string()), FormatError);

    // A structurally valid file for a different network shape.
    NetworkConfig other = cfg;
    other.input_channels = 6;
    CHECK_THROWS_AS(load_weights(path, other), ConfigError);
    CHECK_NOTHROW(load_weights(path));  // no-config load only checks structure
}

TEST_CASE("forward tap shapes follow the 1/4, 1/8, 1/16 ladder", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 11);

    auto fwd = network_forward(random_inputs(cfg, 2, 64, 64, 500), store, cfg);
    REQUIRE(fwd.steps.size() == 2u);
    CHECK(fwd.steps[0].taps[0].dims() == std::vector<std::size_t>{2, 16, 16});
    CHECK(fwd.steps[0].taps[1].dims() == std::vector<std::size_t>{3, 8, 8});
    CHECK(fwd.steps[0].taps[2].dims() == std::vector<std::size_t>{4, 4, 4});
    CHECK(fwd.padded_h == 64u);
    CHECK(fwd.padded_w == 64u);

    // Non-multiple extents are zero-padded up on the right/bottom.
    auto padded = network_forward(random_inputs(cfg, 1, 50, 40, 501), store, cfg);
    CHECK(padded.padded_h == 64u);
    CHECK(padded.padded_w == 48u);
    CHECK(padded.steps[0].taps[0].dims() == std::vector<std::size_t>{2, 16, 12});
    CHECK(padded.steps[0].taps[1].dims() == std::vector<std::size_t>{3, 8, 6});
    CHECK(padded.steps[0].taps[2].dims() == std::vector<std::size_t>{4, 4, 3});
}

TEST_CASE("every tap stays strictly inside (0, 1)", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 21);
    auto fwd = network_forward(random_inputs(cfg, 3, 32, 32, 600), store, cfg);
    for (const NetworkStep& step : fwd.steps) {
        for (const ValueGrid& tap : step.taps) {
            for (std::size_t i = 0; i < tap.size(); ++i) {
                CHECK(tap[i] > 0.0);
                CHECK(tap[i] < 1.0);
            }
        }
    }
}

TEST_CASE("zero weights pin every tap at exactly one half", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 1);
    for (auto& [name, tensor] : store.tensors) tensor.fill(0.0);

    auto fwd = network_forward(random_inputs(cfg, 3, 16, 16, 700), store, cfg);
    for (const NetworkStep& step : fwd.steps) {
        for (const ValueGrid& tap : step.taps) {
            for (std::size_t i = 0; i < tap.size(); ++i) CHECK(tap[i] == 0.5);
        }
    }
    for (const ValueGrid& h : fwd.state.h) {
        for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i] == 0.0);
    }
}

TEST_CASE("recurrence carries state between steps", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 31);
    ValueGrid frame({cfg.input_channels, 16, 16});
    oracles::fill_random(frame, 800, 2.0);
    auto fwd = network_forward({frame, frame}, store, cfg);
    // Identical inputs, different taps: the hidden state moved.
    bool any_diff = false;
    for (std::size_t i = 0; i < fwd.steps[0].taps[0].size(); ++i) {
        if (fwd.steps[0].taps[0][i] != fwd.steps[1].taps[0][i]) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("forward is reproducible and thread-count independent", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 41);
    auto inputs = random_inputs(cfg, 2, 24, 40, 900);

    parallel::set_max_threads(1);
    auto a = network_forward(inputs, store, cfg);
    parallel::set_max_threads(8);
    auto b = network_forward(inputs, store, cfg);
    parallel::set_max_threads(0);
    for (std::size_t s = 0; s < a.steps.size(); ++s) {
        for (std::size_t i = 0; i < NetworkConfig::kNumScales; ++i) {
            CHECK(a.steps[s].taps[i] == b.steps[s].taps[i]);
        }
    }
}

TEST_CASE("network rejects mismatched weights and inputs", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 51);

    NetworkConfig other = cfg;
    other.input_channels = 6;
    CHECK_THROWS_AS(network_forward(random_inputs(other, 1, 16, 16, 1000), store, other),
                    ConfigError);
    CHECK_THROWS_AS(network_forward({}, store, cfg), ValidationError);
    CHECK_THROWS_AS(network_forward(random_inputs(other, 1, 16, 16, 1001), store, cfg),
                    ShapeError);

    auto no_ctx = network_forward(random_inputs(cfg, 1, 16, 16, 1002), store, cfg, false);
    std::vector<std::array<ValueGrid, 3>> d_taps(1);
    CHECK_THROWS_AS(network_backward(no_ctx, store, cfg, d_taps), ShapeError);
}

TEST_CASE("backpropagation through time matches central differences", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 61);
    const std::size_t steps = 2, h = 8, w = 8;
    auto inputs = random_inputs(cfg, steps, h, w, 1100);

    // Fixed probe directions define a scalar loss over all taps.
    std::vector<std::array<ValueGrid, 3>> u(steps);
    {
        auto probe_fwd = network_forward(inputs, store, cfg);
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t i = 0; i < 3; ++i) {
                u[s][i] = oracles::probe_direction(probe_fwd.steps[s].taps[i].dims(),
                                                   1200 + 10 * s + i);
            }
        }
    }
    auto loss = [&]() {
        auto fwd = network_forward(inputs, store, cfg);
        double total = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t i = 0; i < 3; ++i) {
                total += oracles::weighted_sum(fwd.steps[s].taps[i], u[s][i]);
            }
        }
        return total;
    };

    auto fwd = network_forward(inputs, store, cfg, true);
    std::map<std::string, ValueGrid> d_params;
    auto d_inputs = network_backward(fwd, store, cfg, u, &d_params);
    REQUIRE(d_inputs.size() == steps);
    REQUIRE(d_inputs[0].dims() == inputs[0].dims());

    // Input gradients, including the cross-step path through the state.
    for (std::size_t s = 0; s < steps; ++s) {
        auto r = oracles::check_gradient(inputs[s], loss, d_inputs[s], 1e-3, 64);
        INFO("step " << s << " max rel err " << r.max_rel_err);
        CHECK(r.max_rel_err < 1e-3);
    }

    // Spot-check parameter gradients accumulated across steps and scales.
    for (const char* name : {"scale1.mix.weight", "scale1.lstm.bias", "scale2.down.weight",
                             "scale1.ln.gain", "scale3.ffn1.weight", "scale2.out_h.bias"}) {
        REQUIRE(d_params.count(name) == 1u);
        auto r = oracles::check_gradient(store.tensors.at(name), loss, d_params.at(name), 1e-3, 24);
        INFO(name << " max rel err " << r.max_rel_err);
        CHECK(r.max_rel_err < 1e-3);
    }
}

TEST_CASE("gradients flow only from inside the unpadded region", "[network]") {
    NetworkConfig cfg = tiny_config();
    WeightStore store = init_weights(cfg, 71);
    auto inputs = random_inputs(cfg, 1, 8, 8, 1300);  // padded to 16x16

    auto fwd = network_forward(inputs, store, cfg, true);
    std::vector<std::array<ValueGrid, 3>> u(1);
    for (std::size_t i = 0; i < 3; ++i) {
        u[0][i] = oracles::probe_direction(fwd.steps[0].taps[i].dims(), 1400 + i);
    }
    auto d_inputs = network_backward(fwd, store, cfg, u);
    CHECK(d_inputs[0].dims() == inputs[0].dims());  // cropped back to 8x8
    double norm = 0.0;
    for (std::size_t i = 0; i < d_inputs[0].size(); ++i) norm += std::fabs(d_inputs[0][i]);
    CHECK(norm > 0.0);
}
