#pragma once

// Independent reference implementations used as oracles. These deliberately
// share no code with the library: convolutions gather per output element in
// plain nested loops, the hash is restated from its published constants.

#include <cmath>
#include <cstdint>
#include <string_view>

#include "dalight/core/tensor.hpp"

namespace oracle {

// Direct cross-correlation, one gather per output element.
inline dalight::Tensor conv3d(const dalight::Tensor& x, const dalight::Tensor& w,
                              const dalight::Tensor* bias, int stride, int padding) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    const int64_t B = xs[0], Cin = xs[1], D = xs[2], H = xs[3], W = xs[4];
    const int64_t Cout = ws[0], k = ws[2];
    const int64_t s = stride, p = padding;
    const int64_t Do = (D + 2 * p - k) / s + 1;
    const int64_t Ho = (H + 2 * p - k) / s + 1;
    const int64_t Wo = (W + 2 * p - k) / s + 1;
    dalight::Tensor out(dalight::Shape{B, Cout, Do, Ho, Wo});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t co = 0; co < Cout; ++co)
            for (int64_t od = 0; od < Do; ++od)
                for (int64_t oh = 0; oh < Ho; ++oh)
                    for (int64_t ow = 0; ow < Wo; ++ow) {
                        double acc = bias ? (*bias)[co] : 0.0;
                        for (int64_t ci = 0; ci < Cin; ++ci)
                            for (int64_t kd = 0; kd < k; ++kd)
                                for (int64_t kh = 0; kh < k; ++kh)
                                    for (int64_t kw = 0; kw < k; ++kw) {
                                        const int64_t id = od * s + kd - p;
                                        const int64_t ih = oh * s + kh - p;
                                        const int64_t iw = ow * s + kw - p;
                                        if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 ||
                                            iw >= W) {
                                            continue;
                                        }
                                        acc += w[(((co * Cin + ci) * k + kd) * k + kh) * k + kw] *
                                               x[(((b * Cin + ci) * D + id) * H + ih) * W + iw];
                                    }
                        out[(((b * Cout + co) * Do + od) * Ho + oh) * Wo + ow] = acc;
                    }
    return out;
}

inline dalight::Tensor depthwise_conv3d(const dalight::Tensor& x, const dalight::Tensor& w,
                                        int stride, int padding) {
    const auto& xs = x.shape();
    const int64_t B = xs[0], C = xs[1], D = xs[2], H = xs[3], W = xs[4];
    const int64_t k = w.shape()[1];
    const int64_t s = stride, p = padding;
    const int64_t Do = (D + 2 * p - k) / s + 1;
    const int64_t Ho = (H + 2 * p - k) / s + 1;
    const int64_t Wo = (W + 2 * p - k) / s + 1;
    dalight::Tensor out(dalight::Shape{B, C, Do, Ho, Wo});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t od = 0; od < Do; ++od)
                for (int64_t oh = 0; oh < Ho; ++oh)
                    for (int64_t ow = 0; ow < Wo; ++ow) {
                        double acc = 0.0;
                        for (int64_t kd = 0; kd < k; ++kd)
                            for (int64_t kh = 0; kh < k; ++kh)
                                for (int64_t kw = 0; kw < k; ++kw) {
                                    const int64_t id = od * s + kd - p;
                                    const int64_t ih = oh * s + kh - p;
                                    const int64_t iw = ow * s + kw - p;
                                    if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 ||
                                        iw >= W) {
                                        continue;
                                    }
                                    acc += w[((c * k + kd) * k + kh) * k + kw] *
                                           x[(((b * C + c) * D + id) * H + ih) * W + iw];
                                }
                        out[(((b * C + c) * Do + od) * Ho + oh) * Wo + ow] = acc;
                    }
    return out;
}

// Per-voxel matrix multiply over the channel axis.
inline dalight::Tensor pointwise_conv3d(const dalight::Tensor& x, const dalight::Tensor& w,
                                        const dalight::Tensor* bias) {
    const auto& xs = x.shape();
    const int64_t B = xs[0], Cin = xs[1], N = xs[2] * xs[3] * xs[4];
    const int64_t Cout = w.shape()[0];
    dalight::Tensor out(dalight::Shape{B, Cout, xs[2], xs[3], xs[4]});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t v = 0; v < N; ++v)
            for (int64_t co = 0; co < Cout; ++co) {
                double acc = bias ? (*bias)[co] : 0.0;
                for (int64_t ci = 0; ci < Cin; ++ci) {
                    acc += w[co * Cin + ci] * x[(b * Cin + ci) * N + v];
                }
                out[(b * Cout + co) * N + v] = acc;
            }
    return out;
}

// Expands a depthwise kernel [C,k,k,k] into the block-diagonal dense kernel
// [C,C,k,k,k] with w_dense[o,i,..] = 0 for o != i.
inline dalight::Tensor block_diagonal_kernel(const dalight::Tensor& w_dw) {
    const int64_t C = w_dw.shape()[0], k = w_dw.shape()[1];
    dalight::Tensor dense(dalight::Shape{C, C, k, k, k});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < k * k * k; ++i) {
            dense[(c * C + c) * k * k * k + i] = w_dw[c * k * k * k + i];
        }
    return dense;
}

// Reference FNV-1a restated from the published offset basis and prime.
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ull;
    }
    return h;
}

}  // namespace oracle
