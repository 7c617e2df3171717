#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>

#include "eqstream/grid.hpp"
#include "eqstream/rng.hpp"
#include "eqstream/tensorize.hpp"

namespace oracles {

using namespace eqstream;

/// Reference tensorizer. Deliberately structured unlike the library path:
/// bin membership is found by scanning bin boundaries with 128-bit
/// comparisons instead of dividing, and there is no parallel merge.
inline EventTensor reference_tensorize(const EventStream& stream, const TensorizeConfig& cfg) {
    const SensorGeometry geo = stream.geometry;
    EventTensor out{geo, cfg.num_bins,
                    ValueGrid({2 * static_cast<std::size_t>(cfg.num_bins),
                               static_cast<std::size_t>(geo.height),
                               static_cast<std::size_t>(geo.width)}),
                    0};
    for (const Event& e : stream.events) {
        if (e.t < cfg.window_start_us) {
            ++out.skipped;
            continue;
        }
        const std::uint64_t offset = e.t - cfg.window_start_us;
        if (offset >= cfg.window_us) {
            ++out.skipped;
            continue;
        }
        if (e.x >= geo.width || e.y >= geo.height) {
            ++out.skipped;
            continue;
        }
        const unsigned __int128 lhs = static_cast<unsigned __int128>(offset) * cfg.num_bins;
        std::uint32_t bin = cfg.num_bins - 1;
        for (std::uint32_t b = 0; b < cfg.num_bins; ++b) {
            if (lhs < static_cast<unsigned __int128>(b + 1) * cfg.window_us) {
                bin = b;
                break;
            }
        }
        const std::size_t channel = 2 * static_cast<std::size_t>(bin) + (e.p > 0 ? 1 : 0);
        out.values.at(channel, e.y, e.x) += 1.0;
    }
    return out;
}

/// Reference convolution: materializes the zero-padded input first, then
/// runs the plain six-loop cross-correlation.
inline ValueGrid naive_conv2d(const ValueGrid& input, const ValueGrid& weight,
                              const ValueGrid& bias, std::size_t stride, std::size_t pad) {
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    ValueGrid padded({c_in, h + 2 * pad, w + 2 * pad});
    for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                padded.at(c, y + pad, x + pad) = input.at(c, y, x);
            }
        }
    }
    const std::size_t c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::size_t ow = (w + 2 * pad - kw) / stride + 1;
    ValueGrid out({c_out, oh, ow});
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = bias.at(co);
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            acc += weight.at(co, ci, ky, kx) *
                                   padded.at(ci, oy * stride + ky, ox * stride + kx);
                        }
                    }
                }
                out.at(co, oy, ox) = acc;
            }
        }
    }
    return out;
}

inline void fill_random(ValueGrid& grid, std::uint64_t seed, double scale = 1.0) {
    KeyedRng rng(seed, rng::stream_id("test.fill", 0));
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = rng.uniform(-scale, scale);
}

/// Deterministic probe direction: the scalar loss is sum(u * f(x)), so the
/// analytic gradient of the loss is the VJP of f with upstream u.
inline ValueGrid probe_direction(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    ValueGrid u(dims);
    fill_random(u, seed);
    return u;
}

inline double weighted_sum(const ValueGrid& value, const ValueGrid& u) {
    double s = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) s += value[i] * u[i];
    return s;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/// Central-difference check of an analytic gradient. `loss` must recompute
/// the scalar objective from the current contents of `x`.
inline GradCheckResult check_gradient(ValueGrid& x, const std::function<double()>& loss,
                                      const ValueGrid& analytic, double step = 1e-3,
                                      std::size_t max_elements = 0) {
    double g_max = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        g_max = std::max(g_max, std::fabs(analytic[i]));
    }
    GradCheckResult result;
    const std::size_t n = x.size();
    std::size_t stride = 1;
    if (max_elements > 0 && n > max_elements) stride = n / max_elements;
    for (std::size_t i = 0; i < n; i += stride) {
        const double saved = x[i];
        x[i] = saved + step;
        const double plus = loss();
        x[i] = saved - step;
        const double minus = loss();
        x[i] = saved;
        const double numeric = (plus - minus) / (2.0 * step);
        const double denom =
            std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-3 * g_max, 1e-12});
        result.max_rel_err = std::max(result.max_rel_err, std::fabs(analytic[i] - numeric) / denom);
        ++result.checked;
    }
    return result;
}

}  // namespace oracles
