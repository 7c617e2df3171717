#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/events.hpp"
#include "eqstream/grid.hpp"
#include "eqstream/net/network.hpp"
#include "eqstream/net/weights.hpp"
#include "eqstream/tensorize.hpp"

namespace eqstream {

struct PatchConfig {
    std::size_t patch_size = 3;

    void validate() const {
        if (patch_size == 0) throw ConfigError("patch: patch_size must be >= 1");
    }
    double normalizer() const { return static_cast<double>(patch_size * patch_size); }
};

/// Pooled patch vectors for one activation plane, laid out (rows, cols, C).
struct PatchGrid {
    std::size_t rows = 0, cols = 0, channels = 0;
    ValueGrid values;

    const double* vector_at(std::size_t r, std::size_t c) const {
        return values.data() + (r * cols + c) * channels;
    }
};

/// Splits the plane into non-overlapping patch_size x patch_size patches
/// (zero-padded past the right/bottom borders) and pools each channel with
/// the fixed normalizer patch_size^2 — padded zeros are genuine members, so
/// border patches are NOT renormalized.
inline PatchGrid patch_pool(const ValueGrid& activation, const PatchConfig& cfg) {
    cfg.validate();
    if (activation.rank() != 3) throw ShapeError("patch_pool: activation must be (C, H, W)");
    const std::size_t c = activation.dim(0), h = activation.dim(1), w = activation.dim(2);
    const std::size_t p = cfg.patch_size;
    PatchGrid grid;
    grid.rows = (h + p - 1) / p;
    grid.cols = (w + p - 1) / p;
    grid.channels = c;
    grid.values = ValueGrid({grid.rows, grid.cols, c});
    const double norm = cfg.normalizer();
    for (std::size_t r = 0; r < grid.rows; ++r) {
        const std::size_t y_end = std::min(h, (r + 1) * p);
        for (std::size_t col = 0; col < grid.cols; ++col) {
            const std::size_t x_end = std::min(w, (col + 1) * p);
            for (std::size_t ch = 0; ch < c; ++ch) {
                double sum = 0.0;
                for (std::size_t y = r * p; y < y_end; ++y) {
                    for (std::size_t x = col * p; x < x_end; ++x) {
                        sum += activation.at(ch, y, x);
                    }
                }
                grid.values.at(r, col, ch) = sum / norm;
            }
        }
    }
    return grid;
}

/// Scatters patch-vector gradients back onto the activation plane.
inline ValueGrid patch_pool_backward(const std::vector<std::size_t>& activation_dims,
                                     const PatchConfig& cfg, const ValueGrid& d_patches) {
    const std::size_t c = activation_dims[0], h = activation_dims[1], w = activation_dims[2];
    const std::size_t p = cfg.patch_size;
    ValueGrid d_act(activation_dims);
    const double norm = cfg.normalizer();
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t r = y / p, col = x / p;
            for (std::size_t ch = 0; ch < c; ++ch) {
                d_act.at(ch, y, x) = d_patches.at(r, col, ch) / norm;
            }
        }
    }
    return d_act;
}

/// 1 - cosine similarity. Conventions for empty regions: both vectors zero
/// means the patches agree (distance 0); exactly one zero means maximal
/// plain disagreement (distance 1).
inline double cosine_distance(const double* a, const double* b, std::size_t n,
                              bool* both_zero = nullptr) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (both_zero != nullptr) *both_zero = na == 0.0 && nb == 0.0;
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine_distance(const ValueGrid& a, const ValueGrid& b) {
    if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size()) {
        throw ShapeError("cosine_distance: vectors must be rank 1 with equal length");
    }
    return cosine_distance(a.data(), b.data(), a.size());
}

/// d(distance)/d(a) for the non-degenerate branch; zero when either vector
/// is zero (the convention value is locally constant).
inline void cosine_distance_backward(const double* a, const double* b, std::size_t n,
                                     double d_dist, double* d_a) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return;
    const double norm_a = std::sqrt(na), norm_b = std::sqrt(nb);
    const double sim = dot / (norm_a * norm_b);
    for (std::size_t i = 0; i < n; ++i) {
        const double ds_da = b[i] / (norm_a * norm_b) - sim * a[i] / na;
        d_a[i] += -d_dist * ds_da;
    }
}

struct ScaleScore {
    double mean_distance = 0.0;
    std::size_t patch_count = 0;
    std::size_t degenerate = 0;  // both-zero patch pairs
};

/// Mean cosine distance between corresponding pooled patches of two
/// activation planes. The reduction order is the fixed row-major patch
/// index, so the score is bit-stable.
inline ScaleScore scale_score(const ValueGrid& act_a, const ValueGrid& act_b,
                              const PatchConfig& cfg) {
    act_a.require_same_shape(act_b, "scale_score");
    const PatchGrid pa = patch_pool(act_a, cfg);
    const PatchGrid pb = patch_pool(act_b, cfg);
    ScaleScore score;
    score.patch_count = pa.rows * pa.cols;
    double total = 0.0;
    for (std::size_t r = 0; r < pa.rows; ++r) {
        for (std::size_t c = 0; c < pa.cols; ++c) {
            bool both_zero = false;
            total += cosine_distance(pa.vector_at(r, c), pb.vector_at(r, c), pa.channels,
                                     &both_zero);
            if (both_zero) ++score.degenerate;
        }
    }
    score.mean_distance = total / static_cast<double>(score.patch_count);
    return score;
}

/// Gradient of scale_score().mean_distance with respect to act_a.
inline ValueGrid scale_score_backward(const ValueGrid& act_a, const ValueGrid& act_b,
                                      const PatchConfig& cfg, double d_mean) {
    act_a.require_same_shape(act_b, "scale_score_backward");
    const PatchGrid pa = patch_pool(act_a, cfg);
    const PatchGrid pb = patch_pool(act_b, cfg);
    const double per_patch = d_mean / static_cast<double>(pa.rows * pa.cols);
    ValueGrid d_patches(pa.values.dims());
    for (std::size_t r = 0; r < pa.rows; ++r) {
        for (std::size_t c = 0; c < pa.cols; ++c) {
            double* slot = d_patches.data() + (r * pa.cols + c) * pa.channels;
            cosine_distance_backward(pa.vector_at(r, c), pb.vector_at(r, c), pa.channels,
                                     per_patch, slot);
        }
    }
    return patch_pool_backward(act_a.dims(), cfg, d_patches);
}

inline constexpr const char* kToolVersion = "0.1.0";

struct EqsConfig {
    TensorizeConfig tensorize;
    std::uint32_t num_steps = 1;
    PatchConfig patch;
    net::NetworkConfig network;

    void validate() const {
        tensorize.validate();
        patch.validate();
        network.validate();
        if (num_steps == 0) throw ConfigError("eqs: num_steps must be >= 1");
        if (network.input_channels != 2 * tensorize.num_bins) {
            throw ConfigError("eqs: network input_channels must equal 2 * num_bins");
        }
    }

    /// Digest of everything that shaped the score, stamped into reports.
    std::uint64_t digest(std::uint64_t weight_hash, std::uint64_t weight_seed) const {
        std::string canon = "bins=" + std::to_string(tensorize.num_bins) +
                            ";window=" + std::to_string(tensorize.window_us) +
                            ";start=" + std::to_string(tensorize.window_start_us) +
                            ";steps=" + std::to_string(num_steps) +
                            ";patch=" + std::to_string(patch.patch_size) +
                            ";net=" + std::to_string(network.hash()) +
                            ";weights=" + std::to_string(weight_hash) +
                            ";seed=" + std::to_string(weight_seed);
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : canon) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

struct ScaleSummary {
    double distance = 0.0;
    double similarity = 0.0;
    std::size_t patch_count = 0;
};

struct StepSummary {
    double distance = 0.0;
    double similarity = 0.0;
};

struct EqsReport {
    double eqs = 0.0;
    double distance = 0.0;
    std::vector<ScaleSummary> per_scale;
    std::vector<StepSummary> per_step;
    std::uint64_t degenerate_patches = 0;
    std::string config_digest;
    std::string tool_version = kToolVersion;
    std::uint64_t weight_seed = 0;
};

inline std::string hex_digest(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

namespace detail {

/// Shared forward path: score per (step, scale), aggregate unweighted.
inline EqsReport score_taps(const net::NetworkForward& fwd_a, const net::NetworkForward& fwd_b,
                            const EqsConfig& cfg, const net::WeightStore& weights,
                            std::vector<std::vector<ScaleScore>>* cells) {
    constexpr std::size_t kScales = net::NetworkConfig::kNumScales;
    const std::size_t steps = fwd_a.steps.size();
    EqsReport report;
    report.per_scale.assign(kScales, {});
    report.per_step.assign(steps, {});
    if (cells != nullptr) cells->assign(steps, std::vector<ScaleScore>(kScales));

    double total = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
        double step_total = 0.0;
        for (std::size_t i = 0; i < kScales; ++i) {
            const ScaleScore ss =
                scale_score(fwd_a.steps[s].taps[i], fwd_b.steps[s].taps[i], cfg.patch);
            if (cells != nullptr) (*cells)[s][i] = ss;
            report.per_scale[i].distance += ss.mean_distance;
            report.per_scale[i].patch_count = ss.patch_count;
            report.degenerate_patches += ss.degenerate;
            step_total += ss.mean_distance;
            total += ss.mean_distance;
        }
        report.per_step[s].distance = step_total / static_cast<double>(kScales);
        report.per_step[s].similarity = 1.0 - report.per_step[s].distance;
    }
    for (std::size_t i = 0; i < kScales; ++i) {
        report.per_scale[i].distance /= static_cast<double>(steps);
        report.per_scale[i].similarity = 1.0 - report.per_scale[i].distance;
    }
    report.distance = total / static_cast<double>(steps * kScales);
    report.eqs = 1.0 - report.distance;
    report.config_digest = hex_digest(cfg.digest(weights.config_hash, weights.seed));
    report.weight_seed = weights.seed;
    return report;
}

}  // namespace detail

/// Scores two aligned tensor sequences (one entry per time window).
inline EqsReport eqs_from_tensors(const std::vector<ValueGrid>& tensors_a,
                                  const std::vector<ValueGrid>& tensors_b,
                                  const net::WeightStore& weights, const EqsConfig& cfg) {
    cfg.validate();
    if (tensors_a.size() != tensors_b.size()) {
        throw ValidationError("eqs: step counts differ between the two streams");
    }
    const net::NetworkForward fwd_a = net::network_forward(tensors_a, weights, cfg.network);
    const net::NetworkForward fwd_b = net::network_forward(tensors_b, weights, cfg.network);
    return detail::score_taps(fwd_a, fwd_b, cfg, weights, nullptr);
}

/// Gradient of the EQS score with respect to stream A's event tensors
/// (stream B held constant). Optionally also returns the report.
inline std::vector<ValueGrid> eqs_gradient_from_tensors(const std::vector<ValueGrid>& tensors_a,
                                                        const std::vector<ValueGrid>& tensors_b,
                                                        const net::WeightStore& weights,
                                                        const EqsConfig& cfg,
                                                        EqsReport* report_out = nullptr) {
    cfg.validate();
    if (tensors_a.size() != tensors_b.size()) {
        throw ValidationError("eqs: step counts differ between the two streams");
    }
    constexpr std::size_t kScales = net::NetworkConfig::kNumScales;
    const net::NetworkForward fwd_a = net::network_forward(tensors_a, weights, cfg.network, true);
    const net::NetworkForward fwd_b = net::network_forward(tensors_b, weights, cfg.network);
    std::vector<std::vector<ScaleScore>> cells;
    EqsReport report = detail::score_taps(fwd_a, fwd_b, cfg, weights, &cells);
    if (report_out != nullptr) *report_out = report;

    // EQS = 1 - mean(cell distances), so each cell mean gets -1/(S*3).
    const std::size_t steps = fwd_a.steps.size();
    const double d_cell = -1.0 / static_cast<double>(steps * kScales);
    std::vector<std::array<ValueGrid, kScales>> d_taps(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < kScales; ++i) {
            d_taps[s][i] = scale_score_backward(fwd_a.steps[s].taps[i], fwd_b.steps[s].taps[i],
                                                cfg.patch, d_cell);
        }
    }
    return net::network_backward(fwd_a, weights, cfg.network, d_taps);
}

inline std::vector<ValueGrid> tensor_values(std::vector<EventTensor>&& tensors) {
    std::vector<ValueGrid> values;
    values.reserve(tensors.size());
    for (EventTensor& t : tensors) values.push_back(std::move(t.values));
    return values;
}

/// End-to-end score between two event streams: aligned tensorization into
/// cfg.num_steps consecutive windows, shared weights, pooled-patch cosine
/// aggregation.
inline EqsReport eqs(const EventStream& stream_a, const EventStream& stream_b,
                     const net::WeightStore& weights, const EqsConfig& cfg) {
    cfg.validate();
    if (!(stream_a.geometry == stream_b.geometry)) {
        throw ValidationError("eqs: streams must share sensor geometry");
    }
    auto tensors_a = tensor_values(tensorize_sequence(stream_a, cfg.tensorize, cfg.num_steps));
    auto tensors_b = tensor_values(tensorize_sequence(stream_b, cfg.tensorize, cfg.num_steps));
    return eqs_from_tensors(tensors_a, tensors_b, weights, cfg);
}

inline std::vector<ValueGrid> eqs_gradient(const EventStream& stream_a,
                                           const EventStream& stream_b,
                                           const net::WeightStore& weights, const EqsConfig& cfg,
                                           EqsReport* report_out = nullptr) {
    cfg.validate();
    if (!(stream_a.geometry == stream_b.geometry)) {
        throw ValidationError("eqs: streams must share sensor geometry");
    }
    auto tensors_a = tensor_values(tensorize_sequence(stream_a, cfg.tensorize, cfg.num_steps));
    auto tensors_b = tensor_values(tensorize_sequence(stream_b, cfg.tensorize, cfg.num_steps));
    return eqs_gradient_from_tensors(tensors_a, tensors_b, weights, cfg, report_out);
}

}  // namespace eqstream
