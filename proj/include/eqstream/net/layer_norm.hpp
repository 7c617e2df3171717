#pragma once

#include <cmath>

#include "eqstream/errors.hpp"
#include "eqstream/grid.hpp"

namespace eqstream::net {

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormParams {
    ValueGrid gain;    // (C)
    ValueGrid offset;  // (C)
};

struct LayerNormContext {
    ValueGrid normalized;  // x_hat, same shape as input
    ValueGrid inv_std;     // (H, W)
};

inline void check_layer_norm_shapes(const ValueGrid& input, const LayerNormParams& p,
                                    const char* where) {
    if (input.rank() != 3) throw ShapeError(std::string(where) + ": input must be (C, H, W)");
    if (p.gain.rank() != 1 || p.offset.rank() != 1 || p.gain.dim(0) != input.dim(0) ||
        p.offset.dim(0) != input.dim(0)) {
        throw ShapeError(std::string(where) + ": gain/offset length must match channels");
    }
}

/// Normalizes over the channel axis independently at each spatial site:
/// out(c,y,x) = gain(c) * (in(c,y,x) - mu(y,x)) / sqrt(var(y,x) + eps) + offset(c).
inline ValueGrid layer_norm_forward(const ValueGrid& input, const LayerNormParams& p,
                                    LayerNormContext* ctx = nullptr) {
    check_layer_norm_shapes(input, p, "layer_norm_forward");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    ValueGrid out(input.dims());
    if (ctx != nullptr) {
        ctx->normalized = ValueGrid(input.dims());
        ctx->inv_std = ValueGrid({h, w});
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double mean = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) mean += input.at(ch, y, x);
            mean /= static_cast<double>(c);
            double var = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double d = input.at(ch, y, x) - mean;
                var += d * d;
            }
            var /= static_cast<double>(c);
            const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double x_hat = (input.at(ch, y, x) - mean) * inv_std;
                out.at(ch, y, x) = p.gain.at(ch) * x_hat + p.offset.at(ch);
                if (ctx != nullptr) ctx->normalized.at(ch, y, x) = x_hat;
            }
            if (ctx != nullptr) ctx->inv_std.at(y, x) = inv_std;
        }
    }
    return out;
}

struct LayerNormGrads {
    ValueGrid d_input;
    ValueGrid d_gain;
    ValueGrid d_offset;
};

inline LayerNormGrads layer_norm_backward(const LayerNormContext& ctx, const LayerNormParams& p,
                                          const ValueGrid& d_out) {
    if (d_out.dims() != ctx.normalized.dims()) {
        throw ShapeError("layer_norm_backward: upstream gradient shape mismatch");
    }
    const std::size_t c = d_out.dim(0), h = d_out.dim(1), w = d_out.dim(2);
    LayerNormGrads grads{ValueGrid(d_out.dims()), ValueGrid(std::vector<std::size_t>{c}),
                         ValueGrid(std::vector<std::size_t>{c})};
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double sum_dx_hat = 0.0;
            double sum_dx_hat_x_hat = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double x_hat = ctx.normalized.at(ch, y, x);
                const double g = d_out.at(ch, y, x);
                grads.d_gain.at(ch) += g * x_hat;
                grads.d_offset.at(ch) += g;
                const double dx_hat = g * p.gain.at(ch);
                sum_dx_hat += dx_hat;
                sum_dx_hat_x_hat += dx_hat * x_hat;
            }
            const double inv_c = 1.0 / static_cast<double>(c);
            const double inv_std = ctx.inv_std.at(y, x);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double x_hat = ctx.normalized.at(ch, y, x);
                const double dx_hat = d_out.at(ch, y, x) * p.gain.at(ch);
                grads.d_input.at(ch, y, x) =
                    inv_std * (dx_hat - inv_c * sum_dx_hat - x_hat * inv_c * sum_dx_hat_x_hat);
            }
        }
    }
    return grads;
}

}  // namespace eqstream::net
