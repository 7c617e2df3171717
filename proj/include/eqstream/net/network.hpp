#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/grid.hpp"
#include "eqstream/net/config.hpp"
#include "eqstream/net/conv2d.hpp"
#include "eqstream/net/conv_lstm.hpp"
#include "eqstream/net/layer_norm.hpp"
#include "eqstream/net/weights.hpp"

namespace eqstream::net {

struct ScaleParams {
    ConvParams down, mix, lstm, out_z, out_h, ffn1, ffn2;
    LayerNormParams ln;
};

inline ScaleParams bind_scale_params(const WeightStore& store, std::size_t scale) {
    const std::string prefix = "scale" + std::to_string(scale + 1) + ".";
    auto conv = [&](const std::string& name) {
        return ConvParams{store.get(prefix + name + ".weight"), store.get(prefix + name + ".bias")};
    };
    ScaleParams p{conv("down"), conv("mix"),  conv("lstm"), conv("out_z"),
                  conv("out_h"), conv("ffn1"), conv("ffn2"),
                  LayerNormParams{store.get(prefix + "ln.gain"), store.get(prefix + "ln.offset")}};
    return p;
}

inline ValueGrid sigmoid_map(const ValueGrid& t) {
    ValueGrid out(t.dims());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = sigmoid(t[i]);
    return out;
}

/// One recurrent scale:
///   Z      = sigmoid(mix(down(X)))        down: kernel = stride, no padding
///   (h, c) = ConvLSTM(Z, h_prev, c_prev)
///   o      = sigmoid(out_z(Z) + out_h(h)) the tap read by the metric
///   X_next = h + ffn2(sigmoid(ffn1(LN(h))))
struct RvtBlockContext {
    ValueGrid x_in;
    ValueGrid z_down;
    ValueGrid z;
    ConvLstmContext lstm;
    ValueGrid h;
    ValueGrid o;
    LayerNormContext ln;
    ValueGrid ln_out;
    ValueGrid ffn1_act;
};

struct RvtBlockOutput {
    ValueGrid o;
    ValueGrid x_next;
    ValueGrid h;
    ValueGrid c;
};

inline RvtBlockOutput rvt_block_forward(const ValueGrid& x, const ValueGrid& h_prev,
                                        const ValueGrid& c_prev, const ScaleParams& p,
                                        RvtBlockContext* ctx = nullptr) {
    const std::size_t stride = p.down.weight.dim(2);
    const std::size_t kernel = p.mix.weight.dim(2);
    const std::size_t pad = kernel / 2;

    ValueGrid z_down = conv2d_forward(x, p.down, stride, 0);
    ValueGrid z = sigmoid_map(conv2d_forward(z_down, p.mix, 1, pad));

    ConvLstmContext* lstm_ctx = ctx != nullptr ? &ctx->lstm : nullptr;
    ConvLstmResult state = conv_lstm_step(z, h_prev, c_prev, p.lstm, lstm_ctx);

    ValueGrid o_pre = conv2d_forward(z, p.out_z, 1, pad);
    o_pre += conv2d_forward(state.h, p.out_h, 1, pad);
    ValueGrid o = sigmoid_map(o_pre);

    ValueGrid ln_out = layer_norm_forward(state.h, p.ln, ctx != nullptr ? &ctx->ln : nullptr);
    ValueGrid ffn1_act = sigmoid_map(conv2d_forward(ln_out, p.ffn1, 1, pad));
    ValueGrid x_next = state.h;
    x_next += conv2d_forward(ffn1_act, p.ffn2, 1, pad);

    if (ctx != nullptr) {
        ctx->x_in = x;
        ctx->z_down = std::move(z_down);
        ctx->z = z;
        ctx->h = state.h;
        ctx->o = o;
        ctx->ln_out = std::move(ln_out);
        ctx->ffn1_act = std::move(ffn1_act);
    }
    return RvtBlockOutput{std::move(o), std::move(x_next), std::move(state.h),
                          std::move(state.c)};
}

inline void accumulate_param_grad(std::map<std::string, ValueGrid>* acc, const std::string& name,
                                  const ValueGrid& grad) {
    if (acc == nullptr) return;
    auto it = acc->find(name);
    if (it == acc->end()) {
        acc->emplace(name, grad);
    } else {
        it->second += grad;
    }
}

struct RvtBlockGrads {
    ValueGrid d_x;
    ValueGrid d_h_prev;
    ValueGrid d_c_prev;
};

/// Exact reverse pass for one block step. d_o is the tap gradient, d_x_next
/// the gradient flowing back from the next scale, d_h_in/d_c_in the
/// through-time gradients from the following step at this scale.
inline RvtBlockGrads rvt_block_backward(const RvtBlockContext& ctx, const ScaleParams& p,
                                        const ValueGrid& d_o, const ValueGrid& d_x_next,
                                        const ValueGrid& d_h_in, const ValueGrid& d_c_in,
                                        std::map<std::string, ValueGrid>* d_params = nullptr,
                                        const std::string& prefix = "") {
    const std::size_t stride = p.down.weight.dim(2);
    const std::size_t kernel = p.mix.weight.dim(2);
    const std::size_t pad = kernel / 2;

    ValueGrid d_h = d_h_in;
    d_h += d_x_next;  // residual connection in X_next = h + ffn(...)

    // FFN branch of X_next.
    Conv2dGrads g_ffn2 = conv2d_backward(ctx.ffn1_act, p.ffn2, 1, pad, d_x_next);
    ValueGrid d_ffn1_pre(ctx.ffn1_act.dims());
    for (std::size_t i = 0; i < d_ffn1_pre.size(); ++i) {
        const double a = ctx.ffn1_act[i];
        d_ffn1_pre[i] = g_ffn2.d_input[i] * a * (1.0 - a);
    }
    Conv2dGrads g_ffn1 = conv2d_backward(ctx.ln_out, p.ffn1, 1, pad, d_ffn1_pre);
    LayerNormGrads g_ln = layer_norm_backward(ctx.ln, p.ln, g_ffn1.d_input);
    d_h += g_ln.d_input;

    // Tap o = sigmoid(out_z(Z) + out_h(h)).
    ValueGrid d_o_pre(ctx.o.dims());
    for (std::size_t i = 0; i < d_o_pre.size(); ++i) {
        const double a = ctx.o[i];
        d_o_pre[i] = d_o[i] * a * (1.0 - a);
    }
    Conv2dGrads g_out_z = conv2d_backward(ctx.z, p.out_z, 1, pad, d_o_pre);
    Conv2dGrads g_out_h = conv2d_backward(ctx.h, p.out_h, 1, pad, d_o_pre);
    d_h += g_out_h.d_input;

    ConvLstmGrads g_lstm = conv_lstm_backward(ctx.lstm, p.lstm, d_h, d_c_in);

    ValueGrid d_z = g_out_z.d_input;
    d_z += g_lstm.d_input;
    ValueGrid d_mix_pre(d_z.dims());
    for (std::size_t i = 0; i < d_z.size(); ++i) {
        const double a = ctx.z[i];
        d_mix_pre[i] = d_z[i] * a * (1.0 - a);
    }
    Conv2dGrads g_mix = conv2d_backward(ctx.z_down, p.mix, 1, pad, d_mix_pre);
    Conv2dGrads g_down = conv2d_backward(ctx.x_in, p.down, stride, 0, g_mix.d_input);

    if (d_params != nullptr) {
        accumulate_param_grad(d_params, prefix + "down.weight", g_down.d_weight);
        accumulate_param_grad(d_params, prefix + "down.bias", g_down.d_bias);
        accumulate_param_grad(d_params, prefix + "mix.weight", g_mix.d_weight);
        accumulate_param_grad(d_params, prefix + "mix.bias", g_mix.d_bias);
        accumulate_param_grad(d_params, prefix + "lstm.weight", g_lstm.d_weight);
        accumulate_param_grad(d_params, prefix + "lstm.bias", g_lstm.d_bias);
        accumulate_param_grad(d_params, prefix + "out_z.weight", g_out_z.d_weight);
        accumulate_param_grad(d_params, prefix + "out_z.bias", g_out_z.d_bias);
        accumulate_param_grad(d_params, prefix + "out_h.weight", g_out_h.d_weight);
        accumulate_param_grad(d_params, prefix + "out_h.bias", g_out_h.d_bias);
        accumulate_param_grad(d_params, prefix + "ln.gain", g_ln.d_gain);
        accumulate_param_grad(d_params, prefix + "ln.offset", g_ln.d_offset);
        accumulate_param_grad(d_params, prefix + "ffn1.weight", g_ffn1.d_weight);
        accumulate_param_grad(d_params, prefix + "ffn1.bias", g_ffn1.d_bias);
        accumulate_param_grad(d_params, prefix + "ffn2.weight", g_ffn2.d_weight);
        accumulate_param_grad(d_params, prefix + "ffn2.bias", g_ffn2.d_bias);
    }
    return RvtBlockGrads{std::move(g_down.d_input), std::move(g_lstm.d_h_prev),
                         std::move(g_lstm.d_c_prev)};
}

struct RecurrentState {
    std::vector<ValueGrid> h;
    std::vector<ValueGrid> c;
};

inline std::size_t pad_up(std::size_t v, std::size_t multiple) {
    const std::size_t r = v % multiple;
    return r == 0 ? v : v + (multiple - r);
}

inline RecurrentState make_initial_state(const NetworkConfig& cfg, std::size_t padded_h,
                                         std::size_t padded_w) {
    RecurrentState state;
    std::size_t h = padded_h, w = padded_w;
    for (std::size_t i = 0; i < NetworkConfig::kNumScales; ++i) {
        h /= cfg.strides[i];
        w /= cfg.strides[i];
        state.h.emplace_back(std::vector<std::size_t>{cfg.widths[i], h, w});
        state.c.emplace_back(std::vector<std::size_t>{cfg.widths[i], h, w});
    }
    return state;
}

/// Zero-pads the right and bottom borders so both spatial extents are
/// multiples of the cumulative downsampling factor.
inline ValueGrid pad_input(const ValueGrid& x, std::size_t multiple) {
    if (x.rank() != 3) throw ShapeError("pad_input: input must be (C, H, W)");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::size_t ph = pad_up(h, multiple), pw = pad_up(w, multiple);
    if (ph == h && pw == w) return x;
    ValueGrid out({c, ph, pw});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xx = 0; xx < w; ++xx) out.at(ch, y, xx) = x.at(ch, y, xx);
        }
    }
    return out;
}

inline ValueGrid crop_input(const ValueGrid& x, std::size_t h, std::size_t w) {
    if (x.dim(1) == h && x.dim(2) == w) return x;
    ValueGrid out({x.dim(0), h, w});
    for (std::size_t ch = 0; ch < x.dim(0); ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xx = 0; xx < w; ++xx) out.at(ch, y, xx) = x.at(ch, y, xx);
        }
    }
    return out;
}

struct NetworkStep {
    std::array<ValueGrid, NetworkConfig::kNumScales> taps;
};

struct NetworkForward {
    std::vector<NetworkStep> steps;
    RecurrentState state;
    std::vector<std::array<RvtBlockContext, NetworkConfig::kNumScales>> contexts;
    std::size_t input_h = 0, input_w = 0;
    std::size_t padded_h = 0, padded_w = 0;
};

/// Runs the three-scale recurrent extractor over a sequence of event
/// tensors and records the per-scale sigmoid taps. With keep_context the
/// per-step intermediates are retained for network_backward.
inline NetworkForward network_forward(const std::vector<ValueGrid>& inputs,
                                      const WeightStore& weights, const NetworkConfig& cfg,
                                      bool keep_context = false) {
    cfg.validate();
    if (weights.config_hash != cfg.hash()) {
        throw ConfigError("network: weights do not match the network configuration");
    }
    if (inputs.empty()) throw ValidationError("network: need at least one input tensor");
    for (const ValueGrid& x : inputs) {
        if (x.rank() != 3 || x.dim(0) != cfg.input_channels) {
            throw ShapeError("network: input must be (input_channels, H, W)");
        }
        if (x.dim(1) != inputs.front().dim(1) || x.dim(2) != inputs.front().dim(2)) {
            throw ShapeError("network: all steps must share one spatial shape");
        }
    }

    std::array<ScaleParams, NetworkConfig::kNumScales> params;
    for (std::size_t i = 0; i < NetworkConfig::kNumScales; ++i) {
        params[i] = bind_scale_params(weights, i);
    }

    NetworkForward fwd;
    fwd.input_h = inputs.front().dim(1);
    fwd.input_w = inputs.front().dim(2);
    fwd.padded_h = pad_up(fwd.input_h, NetworkConfig::kPadMultiple);
    fwd.padded_w = pad_up(fwd.input_w, NetworkConfig::kPadMultiple);
    fwd.state = make_initial_state(cfg, fwd.padded_h, fwd.padded_w);

    for (const ValueGrid& raw : inputs) {
        ValueGrid x = pad_input(raw, NetworkConfig::kPadMultiple);
        NetworkStep step;
        std::array<RvtBlockContext, NetworkConfig::kNumScales> ctxs;
        for (std::size_t i = 0; i < NetworkConfig::kNumScales; ++i) {
            RvtBlockContext* ctx = keep_context ? &ctxs[i] : nullptr;
            RvtBlockOutput out =
                rvt_block_forward(x, fwd.state.h[i], fwd.state.c[i], params[i], ctx);
            fwd.state.h[i] = std::move(out.h);
            fwd.state.c[i] = std::move(out.c);
            step.taps[i] = std::move(out.o);
            x = std::move(out.x_next);
        }
        fwd.steps.push_back(std::move(step));
        if (keep_context) fwd.contexts.push_back(std::move(ctxs));
    }
    return fwd;
}

/// Backpropagation through time over the recorded forward pass. d_taps must
/// supply one gradient per (step, scale); returns the gradient with respect
/// to each input tensor, cropped back to the unpadded shape. Parameter
/// gradients accumulate into d_params when provided.
inline std::vector<ValueGrid> network_backward(
    const NetworkForward& fwd, const WeightStore& weights, const NetworkConfig& cfg,
    const std::vector<std::array<ValueGrid, NetworkConfig::kNumScales>>& d_taps,
    std::map<std::string, ValueGrid>* d_params = nullptr) {
    if (fwd.contexts.size() != fwd.steps.size()) {
        throw ShapeError("network_backward: forward pass was not run with keep_context");
    }
    if (d_taps.size() != fwd.steps.size()) {
        throw ShapeError("network_backward: need one tap gradient per step");
    }

    std::array<ScaleParams, NetworkConfig::kNumScales> params;
    for (std::size_t i = 0; i < NetworkConfig::kNumScales; ++i) {
        params[i] = bind_scale_params(weights, i);
    }

    std::array<ValueGrid, NetworkConfig::kNumScales> d_h, d_c;
    for (std::size_t i = 0; i < NetworkConfig::kNumScales; ++i) {
        d_h[i] = ValueGrid(fwd.contexts.back()[i].h.dims());
        d_c[i] = ValueGrid(fwd.contexts.back()[i].h.dims());
    }

    std::vector<ValueGrid> d_inputs(fwd.steps.size());
    for (std::size_t step = fwd.steps.size(); step-- > 0;) {
        // Nothing consumes the last scale's X_next, so its gradient is zero.
        ValueGrid d_x_next(
            fwd.contexts[step][NetworkConfig::kNumScales - 1].h.dims());
        for (std::size_t i = NetworkConfig::kNumScales; i-- > 0;) {
            const RvtBlockContext& ctx = fwd.contexts[step][i];
            if (d_taps[step][i].dims() != ctx.o.dims()) {
                throw ShapeError("network_backward: tap gradient shape mismatch");
            }
            const std::string prefix = "scale" + std::to_string(i + 1) + ".";
            RvtBlockGrads grads = rvt_block_backward(ctx, params[i], d_taps[step][i], d_x_next,
                                                     d_h[i], d_c[i], d_params, prefix);
            d_h[i] = std::move(grads.d_h_prev);
            d_c[i] = std::move(grads.d_c_prev);
            d_x_next = std::move(grads.d_x);
        }
        d_inputs[step] = crop_input(d_x_next, fwd.input_h, fwd.input_w);
    }
    return d_inputs;
}

}  // namespace eqstream::net
