#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "dalight/core/tape.hpp"
#include "dalight/core/tensor.hpp"

namespace dalight::ops {

namespace detail {

// Valid output range for one kernel tap: indices o with
// 0 <= o*stride + k - pad < extent.
struct TapRange {
    int64_t lo, hi;  // inclusive; empty when lo > hi
};

inline TapRange tap_range(int64_t extent, int64_t out_extent, int64_t stride, int64_t pad,
                          int64_t k) {
    int64_t lo = 0;
    if (pad - k > 0) lo = (pad - k + stride - 1) / stride;
    int64_t hi = out_extent - 1;
    int64_t num = extent - 1 + pad - k;
    if (num < 0) return {1, 0};
    hi = std::min(hi, num / stride);
    return {lo, hi};
}

inline void check_rank(const Tensor& t, int rank, const char* what) {
    if (!t.defined() || t.shape().rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         (t.defined() ? ", got " + t.shape().str() : std::string(" (undefined)")));
    }
}

}  // namespace detail

// Dense 3D convolution with cross-correlation semantics (no kernel flip).
// x: [B,Cin,D,H,W], w: [Cout,Cin,k,k,k], bias: optional [Cout].
inline Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride,
                     int padding, Tape* tape = nullptr) {
    detail::check_rank(x, 5, "conv3d input");
    detail::check_rank(w, 5, "conv3d weight");
    const int64_t B = x.shape()[0], Cin = x.shape()[1];
    const int64_t D = x.shape()[2], H = x.shape()[3], W = x.shape()[4];
    const int64_t Cout = w.shape()[0], k = w.shape()[2];
    if (w.shape()[1] != Cin || w.shape()[3] != k || w.shape()[4] != k) {
        throw ShapeError("conv3d: weight " + w.shape().str() + " does not match input " +
                         x.shape().str());
    }
    if (stride < 1 || padding < 0) throw ShapeError("conv3d: bad stride/padding");
    if (D + 2 * padding < k || H + 2 * padding < k || W + 2 * padding < k) {
        throw ShapeError("conv3d: kernel " + std::to_string(k) + " exceeds padded input " +
                         x.shape().str());
    }
    if (bias && (bias->shape().rank() != 1 || bias->shape()[0] != Cout)) {
        throw ShapeError("conv3d: bias shape " + bias->shape().str());
    }

    const int64_t s = stride, p = padding;
    const int64_t Do = (D + 2 * p - k) / s + 1;
    const int64_t Ho = (H + 2 * p - k) / s + 1;
    const int64_t Wo = (W + 2 * p - k) / s + 1;
    Tensor out(Shape{B, Cout, Do, Ho, Wo});

    const double* xd = x.data();
    const double* wd = w.data();
    double* od = out.data();
    const int64_t x_plane = D * H * W, o_plane = Do * Ho * Wo;

    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Cout; ++co) {
            double* op = od + (b * Cout + co) * o_plane;
            const double bv = bias ? bias->data()[co] : 0.0;
            std::fill(op, op + o_plane, bv);
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const double* xp = xd + (b * Cin + ci) * x_plane;
                const double* wp = wd + (co * Cin + ci) * k * k * k;
                for (int64_t kd = 0; kd < k; ++kd) {
                    const auto rd = detail::tap_range(D, Do, s, p, kd);
                    for (int64_t kh = 0; kh < k; ++kh) {
                        const auto rh = detail::tap_range(H, Ho, s, p, kh);
                        for (int64_t kw = 0; kw < k; ++kw) {
                            const auto rw = detail::tap_range(W, Wo, s, p, kw);
                            const double wv = wp[(kd * k + kh) * k + kw];
                            if (wv == 0.0) continue;
                            for (int64_t odi = rd.lo; odi <= rd.hi; ++odi) {
                                const int64_t id = odi * s + kd - p;
                                for (int64_t ohi = rh.lo; ohi <= rh.hi; ++ohi) {
                                    const int64_t ih = ohi * s + kh - p;
                                    double* orow = op + (odi * Ho + ohi) * Wo;
                                    const double* xrow = xp + (id * H + ih) * W + kw - p;
                                    for (int64_t owi = rw.lo; owi <= rw.hi; ++owi) {
                                        orow[owi] += wv * xrow[owi * s];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.check_finite("conv3d");

    if (tape) {
        Tensor bt = bias ? *bias : Tensor();
        tape->record(
            [x, w, bt, out, s, p, k, B, Cin, Cout, D, H, W, Do, Ho, Wo]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                double* gw = w.ensure_grad();
                const double* xd = x.data();
                const double* wd = w.data();
                const int64_t x_plane = D * H * W, o_plane = Do * Ho * Wo;
                if (bt.defined()) {
                    double* gb = bt.ensure_grad();
                    for (int64_t b = 0; b < B; ++b) {
                        for (int64_t co = 0; co < Cout; ++co) {
                            const double* gp = g + (b * Cout + co) * o_plane;
                            double acc = 0.0;
                            for (int64_t i = 0; i < o_plane; ++i) acc += gp[i];
                            gb[co] += acc;
                        }
                    }
                }
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t co = 0; co < Cout; ++co) {
                        const double* gp = g + (b * Cout + co) * o_plane;
                        for (int64_t ci = 0; ci < Cin; ++ci) {
                            double* gxp = gx + (b * Cin + ci) * x_plane;
                            const double* xp = xd + (b * Cin + ci) * x_plane;
                            const double* wp = wd + (co * Cin + ci) * k * k * k;
                            double* gwp = gw + (co * Cin + ci) * k * k * k;
                            for (int64_t kd = 0; kd < k; ++kd) {
                                const auto rd = detail::tap_range(D, Do, s, p, kd);
                                for (int64_t kh = 0; kh < k; ++kh) {
                                    const auto rh = detail::tap_range(H, Ho, s, p, kh);
                                    for (int64_t kw = 0; kw < k; ++kw) {
                                        const auto rw = detail::tap_range(W, Wo, s, p, kw);
                                        const double wv = wp[(kd * k + kh) * k + kw];
                                        double wacc = 0.0;
                                        for (int64_t odi = rd.lo; odi <= rd.hi; ++odi) {
                                            const int64_t id = odi * s + kd - p;
                                            for (int64_t ohi = rh.lo; ohi <= rh.hi; ++ohi) {
                                                const int64_t ih = ohi * s + kh - p;
                                                const double* grow = gp + (odi * Ho + ohi) * Wo;
                                                double* gxrow = gxp + (id * H + ih) * W + kw - p;
                                                const double* xrow = xp + (id * H + ih) * W + kw - p;
                                                for (int64_t owi = rw.lo; owi <= rw.hi; ++owi) {
                                                    const double gv = grow[owi];
                                                    gxrow[owi * s] += wv * gv;
                                                    wacc += xrow[owi * s] * gv;
                                                }
                                            }
                                        }
                                        gwp[(kd * k + kh) * k + kw] += wacc;
                                    }
                                }
                            }
                        }
                    }
                }
            },
            bias ? std::initializer_list<Tensor>{x, w, *bias, out}
                 : std::initializer_list<Tensor>{x, w, out});
    }
    return out;
}

// Channel-wise spatial filtering: channel c of the output depends only on
// channel c of the input. x: [B,C,D,H,W], w: [C,k,k,k]. No bias.
inline Tensor depthwise_conv3d(const Tensor& x, const Tensor& w, int stride, int padding,
                               Tape* tape = nullptr) {
    detail::check_rank(x, 5, "depthwise_conv3d input");
    detail::check_rank(w, 4, "depthwise_conv3d weight");
    const int64_t B = x.shape()[0], C = x.shape()[1];
    const int64_t D = x.shape()[2], H = x.shape()[3], W = x.shape()[4];
    const int64_t k = w.shape()[1];
    if (w.shape()[0] != C || w.shape()[2] != k || w.shape()[3] != k) {
        throw ShapeError("depthwise_conv3d: weight " + w.shape().str() +
                         " does not match input channels of " + x.shape().str());
    }
    if (stride < 1 || padding < 0) throw ShapeError("depthwise_conv3d: bad stride/padding");
    if (D + 2 * padding < k || H + 2 * padding < k || W + 2 * padding < k) {
        throw ShapeError("depthwise_conv3d: kernel exceeds padded input");
    }

    const int64_t s = stride, p = padding;
    const int64_t Do = (D + 2 * p - k) / s + 1;
    const int64_t Ho = (H + 2 * p - k) / s + 1;
    const int64_t Wo = (W + 2 * p - k) / s + 1;
    Tensor out(Shape{B, C, Do, Ho, Wo});

    const double* xd = x.data();
    const double* wd = w.data();
    double* od = out.data();
    const int64_t x_plane = D * H * W, o_plane = Do * Ho * Wo;

    for (int64_t b = 0; b < B; ++b) {
        for (int64_t c = 0; c < C; ++c) {
            double* op = od + (b * C + c) * o_plane;
            const double* xp = xd + (b * C + c) * x_plane;
            const double* wp = wd + c * k * k * k;
            for (int64_t kd = 0; kd < k; ++kd) {
                const auto rd = detail::tap_range(D, Do, s, p, kd);
                for (int64_t kh = 0; kh < k; ++kh) {
                    const auto rh = detail::tap_range(H, Ho, s, p, kh);
                    for (int64_t kw = 0; kw < k; ++kw) {
                        const auto rw = detail::tap_range(W, Wo, s, p, kw);
                        const double wv = wp[(kd * k + kh) * k + kw];
                        for (int64_t odi = rd.lo; odi <= rd.hi; ++odi) {
                            const int64_t id = odi * s + kd - p;
                            for (int64_t ohi = rh.lo; ohi <= rh.hi; ++ohi) {
                                const int64_t ih = ohi * s + kh - p;
                                double* orow = op + (odi * Ho + ohi) * Wo;
                                const double* xrow = xp + (id * H + ih) * W + kw - p;
                                for (int64_t owi = rw.lo; owi <= rw.hi; ++owi) {
                                    orow[owi] += wv * xrow[owi * s];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.check_finite("depthwise_conv3d");

    if (tape) {
        tape->record(
            [x, w, out, s, p, k, B, C, D, H, W, Do, Ho, Wo]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                double* gw = w.ensure_grad();
                const double* xd = x.data();
                const double* wd = w.data();
                const int64_t x_plane = D * H * W, o_plane = Do * Ho * Wo;
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t c = 0; c < C; ++c) {
                        const double* gp = g + (b * C + c) * o_plane;
                        double* gxp = gx + (b * C + c) * x_plane;
                        const double* xp = xd + (b * C + c) * x_plane;
                        const double* wp = wd + c * k * k * k;
                        double* gwp = gw + c * k * k * k;
                        for (int64_t kd = 0; kd < k; ++kd) {
                            const auto rd = detail::tap_range(D, Do, s, p, kd);
                            for (int64_t kh = 0; kh < k; ++kh) {
                                const auto rh = detail::tap_range(H, Ho, s, p, kh);
                                for (int64_t kw = 0; kw < k; ++kw) {
                                    const auto rw = detail::tap_range(W, Wo, s, p, kw);
                                    const double wv = wp[(kd * k + kh) * k + kw];
                                    double wacc = 0.0;
                                    for (int64_t odi = rd.lo; odi <= rd.hi; ++odi) {
                                        const int64_t id = odi * s + kd - p;
                                        for (int64_t ohi = rh.lo; ohi <= rh.hi; ++ohi) {
                                            const int64_t ih = ohi * s + kh - p;
                                            const double* grow = gp + (odi * Ho + ohi) * Wo;
                                            double* gxrow = gxp + (id * H + ih) * W + kw - p;
                                            const double* xrow = xp + (id * H + ih) * W + kw - p;
                                            for (int64_t owi = rw.lo; owi <= rw.hi; ++owi) {
                                                const double gv = grow[owi];
                                                gxrow[owi * s] += wv * gv;
                                                wacc += xrow[owi * s] * gv;
                                            }
                                        }
                                    }
                                    gwp[(kd * k + kh) * k + kw] += wacc;
                                }
                            }
                        }
                    }
                }
            },
            {x, w, out});
    }
    return out;
}

// 1x1x1 channel mixing: a per-voxel matrix multiply over the channel axis.
// x: [B,Cin,D,H,W], w: [Cout,Cin], bias: optional [Cout].
inline Tensor pointwise_conv3d(const Tensor& x, const Tensor& w, const Tensor* bias,
                               Tape* tape = nullptr) {
    detail::check_rank(x, 5, "pointwise_conv3d input");
    detail::check_rank(w, 2, "pointwise_conv3d weight");
    const int64_t B = x.shape()[0], Cin = x.shape()[1];
    const int64_t N = x.shape()[2] * x.shape()[3] * x.shape()[4];
    const int64_t Cout = w.shape()[0];
    if (w.shape()[1] != Cin) {
        throw ShapeError("pointwise_conv3d: weight " + w.shape().str() + " vs input " +
                         x.shape().str());
    }
    if (bias && (bias->shape().rank() != 1 || bias->shape()[0] != Cout)) {
        throw ShapeError("pointwise_conv3d: bias shape " + bias->shape().str());
    }

    Tensor out(Shape{B, Cout, x.shape()[2], x.shape()[3], x.shape()[4]});
    const double* xd = x.data();
    const double* wd = w.data();
    double* od = out.data();

    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Cout; ++co) {
            double* op = od + (b * Cout + co) * N;
            const double bv = bias ? bias->data()[co] : 0.0;
            std::fill(op, op + N, bv);
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const double wv = wd[co * Cin + ci];
                if (wv == 0.0) continue;
                const double* xp = xd + (b * Cin + ci) * N;
                for (int64_t i = 0; i < N; ++i) op[i] += wv * xp[i];
            }
        }
    }
    out.check_finite("pointwise_conv3d");

    if (tape) {
        Tensor bt = bias ? *bias : Tensor();
        tape->record(
            [x, w, bt, out, B, Cin, Cout, N]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                double* gw = w.ensure_grad();
                const double* xd = x.data();
                const double* wd = w.data();
                double* gb = bt.defined() ? bt.ensure_grad() : nullptr;
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t co = 0; co < Cout; ++co) {
                        const double* gp = g + (b * Cout + co) * N;
                        if (gb) {
                            double acc = 0.0;
                            for (int64_t i = 0; i < N; ++i) acc += gp[i];
                            gb[co] += acc;
                        }
                        for (int64_t ci = 0; ci < Cin; ++ci) {
                            const double wv = wd[co * Cin + ci];
                            double* gxp = gx + (b * Cin + ci) * N;
                            const double* xp = xd + (b * Cin + ci) * N;
                            double wacc = 0.0;
                            for (int64_t i = 0; i < N; ++i) {
                                gxp[i] += wv * gp[i];
                                wacc += xp[i] * gp[i];
                            }
                            gw[co * Cin + ci] += wacc;
                        }
                    }
                }
            },
            bias ? std::initializer_list<Tensor>{x, w, *bias, out}
                 : std::initializer_list<Tensor>{x, w, out});
    }
    return out;
}

// Transposed convolution fixed at kernel 2, stride 2: exact doubling of every
// spatial extent. x: [B,Cin,D,H,W], w: [Cin,Cout,2,2,2], bias: optional [Cout].
// The forward map is the adjoint of a stride-2 k=2 convolution.
inline Tensor transposed_conv3d(const Tensor& x, const Tensor& w, const Tensor* bias,
                                Tape* tape = nullptr) {
    detail::check_rank(x, 5, "transposed_conv3d input");
    detail::check_rank(w, 5, "transposed_conv3d weight");
    const int64_t B = x.shape()[0], Cin = x.shape()[1];
    const int64_t D = x.shape()[2], H = x.shape()[3], W = x.shape()[4];
    const int64_t Cout = w.shape()[1];
    if (w.shape()[0] != Cin || w.shape()[2] != 2 || w.shape()[3] != 2 || w.shape()[4] != 2) {
        throw ShapeError("transposed_conv3d: weight " + w.shape().str() +
                         " must be [Cin,Cout,2,2,2] with Cin = " + std::to_string(Cin));
    }
    if (bias && (bias->shape().rank() != 1 || bias->shape()[0] != Cout)) {
        throw ShapeError("transposed_conv3d: bias shape " + bias->shape().str());
    }

    const int64_t Do = 2 * D, Ho = 2 * H, Wo = 2 * W;
    Tensor out(Shape{B, Cout, Do, Ho, Wo});
    const double* xd = x.data();
    const double* wd = w.data();
    double* od = out.data();
    const int64_t x_plane = D * H * W, o_plane = Do * Ho * Wo;

    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Cout; ++co) {
            double* op = od + (b * Cout + co) * o_plane;
            const double bv = bias ? bias->data()[co] : 0.0;
            std::fill(op, op + o_plane, bv);
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const double* xp = xd + (b * Cin + ci) * x_plane;
                const double* wp = wd + (ci * Cout + co) * 8;
                for (int64_t kd = 0; kd < 2; ++kd) {
                    for (int64_t kh = 0; kh < 2; ++kh) {
                        for (int64_t kw = 0; kw < 2; ++kw) {
                            const double wv = wp[(kd * 2 + kh) * 2 + kw];
                            if (wv == 0.0) continue;
                            for (int64_t d = 0; d < D; ++d) {
                                for (int64_t h = 0; h < H; ++h) {
                                    const double* xrow = xp + (d * H + h) * W;
                                    double* orow =
                                        op + ((2 * d + kd) * Ho + (2 * h + kh)) * Wo + kw;
                                    for (int64_t ww = 0; ww < W; ++ww) {
                                        orow[2 * ww] += wv * xrow[ww];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.check_finite("transposed_conv3d");

    if (tape) {
        Tensor bt = bias ? *bias : Tensor();
        tape->record(
            [x, w, bt, out, B, Cin, Cout, D, H, W, Ho, Wo]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                double* gw = w.ensure_grad();
                const double* xd = x.data();
                const double* wd = w.data();
                const int64_t x_plane = D * H * W, o_plane = 8 * x_plane;
                if (bt.defined()) {
                    double* gb = bt.ensure_grad();
                    for (int64_t b = 0; b < B; ++b) {
                        for (int64_t co = 0; co < Cout; ++co) {
                            const double* gp = g + (b * Cout + co) * o_plane;
                            double acc = 0.0;
                            for (int64_t i = 0; i < o_plane; ++i) acc += gp[i];
                            gb[co] += acc;
                        }
                    }
                }
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t co = 0; co < Cout; ++co) {
                        const double* gp = g + (b * Cout + co) * o_plane;
                        for (int64_t ci = 0; ci < Cin; ++ci) {
                            double* gxp = gx + (b * Cin + ci) * x_plane;
                            const double* xp = xd + (b * Cin + ci) * x_plane;
                            const double* wp = wd + (ci * Cout + co) * 8;
                            double* gwp = gw + (ci * Cout + co) * 8;
                            for (int64_t kd = 0; kd < 2; ++kd) {
                                for (int64_t kh = 0; kh < 2; ++kh) {
                                    for (int64_t kw = 0; kw < 2; ++kw) {
                                        const double wv = wp[(kd * 2 + kh) * 2 + kw];
                                        double wacc = 0.0;
                                        for (int64_t d = 0; d < D; ++d) {
                                            for (int64_t h = 0; h < H; ++h) {
                                                const double* xrow = xp + (d * H + h) * W;
                                                double* gxrow = gxp + (d * H + h) * W;
                                                const double* grow =
                                                    gp + ((2 * d + kd) * Ho + (2 * h + kh)) * Wo +
                                                    kw;
                                                for (int64_t ww = 0; ww < W; ++ww) {
                                                    const double gv = grow[2 * ww];
                                                    gxrow[ww] += wv * gv;
                                                    wacc += xrow[ww] * gv;
                                                }
                                            }
                                        }
                                        gwp[(kd * 2 + kh) * 2 + kw] += wacc;
                                    }
                                }
                            }
                        }
                    }
                }
            },
            bias ? std::initializer_list<Tensor>{x, w, *bias, out}
                 : std::initializer_list<Tensor>{x, w, out});
    }
    return out;
}

}  // namespace dalight::ops
