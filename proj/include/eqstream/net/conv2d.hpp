#pragma once

#include <cstdint>

#include "eqstream/errors.hpp"
#include "eqstream/grid.hpp"
#include "eqstream/parallel.hpp"

namespace eqstream::net {

struct ConvParams {
    ValueGrid weight;  // (C_out, C_in, k_h, k_w)
    ValueGrid bias;    // (C_out)
};

inline void check_conv_shapes(const ValueGrid& input, const ConvParams& p, const char* where) {
    if (input.rank() != 3) throw ShapeError(std::string(where) + ": input must be (C, H, W)");
    if (p.weight.rank() != 4) {
        throw ShapeError(std::string(where) + ": weight must be (C_out, C_in, k, k)");
    }
    if (p.bias.rank() != 1 || p.bias.dim(0) != p.weight.dim(0)) {
        throw ShapeError(std::string(where) + ": bias length must match output channels");
    }
    if (p.weight.dim(1) != input.dim(0)) {
        throw ShapeError(std::string(where) + ": input channels " +
                         std::to_string(input.dim(0)) + " do not match weight " +
                         std::to_string(p.weight.dim(1)));
    }
}

inline std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                      std::size_t pad) {
    const std::size_t padded = in + 2 * pad;
    if (padded < kernel) throw ShapeError("conv2d: kernel larger than padded input");
    return (padded - kernel) / stride + 1;
}

/// Cross-correlation with zero padding:
/// out(co, oy, ox) = bias(co) + sum_{ci,ky,kx} w(co,ci,ky,kx) *
///                   in(ci, oy*stride - pad + ky, ox*stride - pad + kx).
inline ValueGrid conv2d_forward(const ValueGrid& input, const ConvParams& p, std::size_t stride,
                                std::size_t pad) {
    check_conv_shapes(input, p, "conv2d_forward");
    if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t c_out = p.weight.dim(0), kh = p.weight.dim(2), kw = p.weight.dim(3);
    const std::size_t oh = conv_output_extent(h, kh, stride, pad);
    const std::size_t ow = conv_output_extent(w, kw, stride, pad);

    ValueGrid out({c_out, oh, ow});
    parallel::for_chunks(c_out, [&](std::size_t, std::size_t co_begin, std::size_t co_end) {
        for (std::size_t co = co_begin; co < co_end; ++co) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = p.bias.at(co);
                    for (std::size_t ci = 0; ci < c_in; ++ci) {
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                acc += p.weight.at(co, ci, ky, kx) *
                                       input.at(ci, static_cast<std::size_t>(iy),
                                                static_cast<std::size_t>(ix));
                            }
                        }
                    }
                    out.at(co, oy, ox) = acc;
                }
            }
        }
    });
    return out;
}

struct Conv2dGrads {
    ValueGrid d_input;
    ValueGrid d_weight;
    ValueGrid d_bias;
};

/// Vector-Jacobian products for conv2d_forward. Every output element is
/// written by exactly one fixed loop nest, so results are identical for any
/// thread count.
inline Conv2dGrads conv2d_backward(const ValueGrid& input, const ConvParams& p,
                                   std::size_t stride, std::size_t pad,
                                   const ValueGrid& d_out) {
    check_conv_shapes(input, p, "conv2d_backward");
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t c_out = p.weight.dim(0), kh = p.weight.dim(2), kw = p.weight.dim(3);
    const std::size_t oh = conv_output_extent(h, kh, stride, pad);
    const std::size_t ow = conv_output_extent(w, kw, stride, pad);
    if (d_out.rank() != 3 || d_out.dim(0) != c_out || d_out.dim(1) != oh || d_out.dim(2) != ow) {
        throw ShapeError("conv2d_backward: upstream gradient shape mismatch");
    }

    Conv2dGrads grads{ValueGrid(std::vector<std::size_t>{c_in, h, w}),
                      ValueGrid(std::vector<std::size_t>{c_out, c_in, kh, kw}),
                      ValueGrid(std::vector<std::size_t>{c_out})};

    for (std::size_t co = 0; co < c_out; ++co) {
        double acc = 0.0;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) acc += d_out.at(co, oy, ox);
        }
        grads.d_bias.at(co) = acc;
    }

    parallel::for_chunks(c_out, [&](std::size_t, std::size_t co_begin, std::size_t co_end) {
        for (std::size_t co = co_begin; co < co_end; ++co) {
            for (std::size_t ci = 0; ci < c_in; ++ci) {
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        double acc = 0.0;
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            for (std::size_t ox = 0; ox < ow; ++ox) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                acc += input.at(ci, static_cast<std::size_t>(iy),
                                                static_cast<std::size_t>(ix)) *
                                       d_out.at(co, oy, ox);
                            }
                        }
                        grads.d_weight.at(co, ci, ky, kx) = acc;
                    }
                }
            }
        }
    });

    parallel::for_chunks(c_in, [&](std::size_t, std::size_t ci_begin, std::size_t ci_end) {
        for (std::size_t ci = ci_begin; ci < ci_end; ++ci) {
            for (std::size_t iy = 0; iy < h; ++iy) {
                for (std::size_t ix = 0; ix < w; ++ix) {
                    double acc = 0.0;
                    for (std::size_t co = 0; co < c_out; ++co) {
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const std::ptrdiff_t num_y = static_cast<std::ptrdiff_t>(iy + pad) -
                                                         static_cast<std::ptrdiff_t>(ky);
                            if (num_y < 0 || num_y % static_cast<std::ptrdiff_t>(stride) != 0) {
                                continue;
                            }
                            const std::size_t oy = static_cast<std::size_t>(num_y) / stride;
                            if (oy >= oh) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t num_x =
                                    static_cast<std::ptrdiff_t>(ix + pad) -
                                    static_cast<std::ptrdiff_t>(kx);
                                if (num_x < 0 ||
                                    num_x % static_cast<std::ptrdiff_t>(stride) != 0) {
                                    continue;
                                }
                                const std::size_t ox = static_cast<std::size_t>(num_x) / stride;
                                if (ox >= ow) continue;
                                acc += p.weight.at(co, ci, ky, kx) * d_out.at(co, oy, ox);
                            }
                        }
                    }
                    grads.d_input.at(ci, iy, ix) = acc;
                }
            }
        }
    });
    return grads;
}

}  // namespace eqstream::net
