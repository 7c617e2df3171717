#pragma once

#include <algorithm>
#include <cmath>

#include "eqstream/errors.hpp"
#include "eqstream/grid.hpp"
#include "eqstream/net/conv2d.hpp"

namespace eqstream::net {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline ValueGrid concat_channels(const ValueGrid& a, const ValueGrid& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
        throw ShapeError("concat_channels: spatial dims must match");
    }
    ValueGrid out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

inline ValueGrid channel_slice(const ValueGrid& t, std::size_t begin, std::size_t count) {
    if (t.rank() != 3 || begin + count > t.dim(0)) throw ShapeError("channel_slice: out of range");
    ValueGrid out({count, t.dim(1), t.dim(2)});
    const std::size_t plane = t.dim(1) * t.dim(2);
    std::copy(t.data() + begin * plane, t.data() + (begin + count) * plane, out.data());
    return out;
}

/// All gates come from a single same-padded convolution over concat(input, h)
/// with 4*width output channels, split as [i, f, g, o]:
///   i, f, o = sigmoid(pre), g = tanh(pre)
///   c' = f*c + i*g,  h' = o*tanh(c')
struct ConvLstmContext {
    ValueGrid concat;  // (2W, H, W) conv input
    ValueGrid i, f, g, o;
    ValueGrid c_prev;
    ValueGrid tanh_c_new;
};

struct ConvLstmResult {
    ValueGrid h;
    ValueGrid c;
};

inline ConvLstmResult conv_lstm_step(const ValueGrid& input, const ValueGrid& h_prev,
                                     const ValueGrid& c_prev, const ConvParams& params,
                                     ConvLstmContext* ctx = nullptr) {
    if (input.rank() != 3 || h_prev.dims() != c_prev.dims() || h_prev.rank() != 3 ||
        h_prev.dim(1) != input.dim(1) || h_prev.dim(2) != input.dim(2)) {
        throw ShapeError("conv_lstm_step: input/state shapes inconsistent");
    }
    const std::size_t width = h_prev.dim(0);
    if (params.weight.dim(0) != 4 * width ||
        params.weight.dim(1) != input.dim(0) + width) {
        throw ShapeError("conv_lstm_step: gate conv must map concat channels to 4*width");
    }
    const std::size_t kernel = params.weight.dim(2);
    if (kernel != params.weight.dim(3) || kernel % 2 == 0) {
        throw ShapeError("conv_lstm_step: gate conv kernel must be square and odd");
    }

    const ValueGrid concat = concat_channels(input, h_prev);
    const ValueGrid pre = conv2d_forward(concat, params, 1, kernel / 2);

    const std::size_t h = input.dim(1), w = input.dim(2);
    const std::size_t plane = h * w;
    ValueGrid gi({width, h, w}), gf({width, h, w}), gg({width, h, w}), go({width, h, w});
    ConvLstmResult out{ValueGrid({width, h, w}), ValueGrid({width, h, w})};
    ValueGrid tanh_c({width, h, w});
    for (std::size_t ch = 0; ch < width; ++ch) {
        for (std::size_t s = 0; s < plane; ++s) {
            const std::size_t idx = ch * plane + s;
            const double vi = sigmoid(pre.data()[(0 * width + ch) * plane + s]);
            const double vf = sigmoid(pre.data()[(1 * width + ch) * plane + s]);
            const double vg = std::tanh(pre.data()[(2 * width + ch) * plane + s]);
            const double vo = sigmoid(pre.data()[(3 * width + ch) * plane + s]);
            const double c_new = vf * c_prev.data()[idx] + vi * vg;
            const double tc = std::tanh(c_new);
            gi.data()[idx] = vi;
            gf.data()[idx] = vf;
            gg.data()[idx] = vg;
            go.data()[idx] = vo;
            out.c.data()[idx] = c_new;
            out.h.data()[idx] = vo * tc;
            tanh_c.data()[idx] = tc;
        }
    }
    if (ctx != nullptr) {
        ctx->concat = concat;
        ctx->i = std::move(gi);
        ctx->f = std::move(gf);
        ctx->g = std::move(gg);
        ctx->o = std::move(go);
        ctx->c_prev = c_prev;
        ctx->tanh_c_new = std::move(tanh_c);
    }
    return out;
}

struct ConvLstmGrads {
    ValueGrid d_input;
    ValueGrid d_h_prev;
    ValueGrid d_c_prev;
    ValueGrid d_weight;
    ValueGrid d_bias;
};

inline ConvLstmGrads conv_lstm_backward(const ConvLstmContext& ctx, const ConvParams& params,
                                        const ValueGrid& d_h, const ValueGrid& d_c) {
    const std::size_t width = ctx.i.dim(0);
    const std::size_t h = ctx.i.dim(1), w = ctx.i.dim(2);
    if (d_h.dims() != ctx.i.dims() || d_c.dims() != ctx.i.dims()) {
        throw ShapeError("conv_lstm_backward: upstream gradient shape mismatch");
    }
    const std::size_t plane = h * w;
    const std::size_t kernel = params.weight.dim(2);

    ValueGrid d_pre({4 * width, h, w});
    ValueGrid d_c_prev({width, h, w});
    for (std::size_t ch = 0; ch < width; ++ch) {
        for (std::size_t s = 0; s < plane; ++s) {
            const std::size_t idx = ch * plane + s;
            const double vi = ctx.i.data()[idx];
            const double vf = ctx.f.data()[idx];
            const double vg = ctx.g.data()[idx];
            const double vo = ctx.o.data()[idx];
            const double tc = ctx.tanh_c_new.data()[idx];
            const double dh = d_h.data()[idx];
            const double dc_total = d_c.data()[idx] + dh * vo * (1.0 - tc * tc);
            const double d_o = dh * tc;
            const double d_i = dc_total * vg;
            const double d_f = dc_total * ctx.c_prev.data()[idx];
            const double d_g = dc_total * vi;
            d_pre.data()[(0 * width + ch) * plane + s] = d_i * vi * (1.0 - vi);
            d_pre.data()[(1 * width + ch) * plane + s] = d_f * vf * (1.0 - vf);
            d_pre.data()[(2 * width + ch) * plane + s] = d_g * (1.0 - vg * vg);
            d_pre.data()[(3 * width + ch) * plane + s] = d_o * vo * (1.0 - vo);
            d_c_prev.data()[idx] = dc_total * vf;
        }
    }

    Conv2dGrads conv = conv2d_backward(ctx.concat, params, 1, kernel / 2, d_pre);
    const std::size_t in_channels = ctx.concat.dim(0) - width;
    ConvLstmGrads grads;
    grads.d_input = channel_slice(conv.d_input, 0, in_channels);
    grads.d_h_prev = channel_slice(conv.d_input, in_channels, width);
    grads.d_c_prev = std::move(d_c_prev);
    grads.d_weight = std::move(conv.d_weight);
    grads.d_bias = std::move(conv.d_bias);
    return grads;
}

}  // namespace eqstream::net
