#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dalight/core/tape.hpp"
#include "dalight/core/tensor.hpp"

namespace dalight::ops {

enum class Activation { gelu, sigmoid };
enum class PoolMode { mean_over_hw, global_mean };
enum class Elementwise { add, mul };

namespace detail {

inline double sigmoid_scalar(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

// Exact Gaussian-CDF GELU: x * Phi(x).
inline double gelu_scalar(double v) {
    return v * 0.5 * (1.0 + std::erf(v * 0.70710678118654752440));
}

inline double gelu_deriv(double v) {
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    const double phi_cdf = 0.5 * (1.0 + std::erf(v * 0.70710678118654752440));
    const double phi_pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
    return phi_cdf + v * phi_pdf;
}

}  // namespace detail

// Element-wise nonlinearity.
inline Tensor activation(const Tensor& x, Activation kind, Tape* tape = nullptr) {
    Tensor out(x.shape());
    const double* xd = x.data();
    double* od = out.data();
    const int64_t n = x.size();
    if (kind == Activation::gelu) {
        for (int64_t i = 0; i < n; ++i) od[i] = detail::gelu_scalar(xd[i]);
    } else {
        for (int64_t i = 0; i < n; ++i) od[i] = detail::sigmoid_scalar(xd[i]);
    }
    out.check_finite("activation");
    if (tape) {
        tape->record(
            [x, out, kind, n]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                const double* xd = x.data();
                const double* od = out.data();
                if (kind == Activation::gelu) {
                    for (int64_t i = 0; i < n; ++i) gx[i] += detail::gelu_deriv(xd[i]) * g[i];
                } else {
                    for (int64_t i = 0; i < n; ++i) gx[i] += od[i] * (1.0 - od[i]) * g[i];
                }
            },
            {x, out});
    }
    return out;
}

inline Tensor gelu(const Tensor& x, Tape* tape = nullptr) {
    return activation(x, Activation::gelu, tape);
}

inline Tensor sigmoid(const Tensor& x, Tape* tape = nullptr) {
    return activation(x, Activation::sigmoid, tape);
}

namespace detail {

// Shared softmax kernel over a strided axis: for each of `rows` groups the
// axis has `n` entries spaced `stride` apart starting at base(row).
template <typename BaseFn>
inline void softmax_groups(const double* xd, double* od, int64_t rows, int64_t n, int64_t stride,
                           BaseFn base) {
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t b = base(r);
        double mx = xd[b];
        for (int64_t i = 1; i < n; ++i) mx = std::max(mx, xd[b + i * stride]);
        double sum = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            const double e = std::exp(xd[b + i * stride] - mx);
            od[b + i * stride] = e;
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int64_t i = 0; i < n; ++i) od[b + i * stride] *= inv;
    }
}

template <typename BaseFn>
inline void softmax_groups_backward(const double* od, const double* g, double* gx, int64_t rows,
                                    int64_t n, int64_t stride, BaseFn base) {
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t b = base(r);
        double dot = 0.0;
        for (int64_t i = 0; i < n; ++i) dot += g[b + i * stride] * od[b + i * stride];
        for (int64_t i = 0; i < n; ++i) {
            const int64_t j = b + i * stride;
            gx[j] += od[j] * (g[j] - dot);
        }
    }
}

}  // namespace detail

// Per-voxel softmax over the channel axis of [B,K,spatial...], computed with
// max-subtraction for stability.
inline Tensor softmax_channel(const Tensor& z, Tape* tape = nullptr) {
    if (z.shape().rank() < 2) throw ShapeError("softmax_channel: rank >= 2 required");
    const int64_t B = z.shape()[0], K = z.shape()[1];
    const int64_t S = z.size() / (B * K);
    Tensor out(z.shape());
    auto base = [K, S](int64_t r) {
        const int64_t b = r / S, v = r % S;
        return (b * K) * S + v;
    };
    detail::softmax_groups(z.data(), out.data(), B * S, K, S, base);
    out.check_finite("softmax_channel");
    if (tape) {
        tape->record(
            [z, out, B, K, S, base]() {
                const double* g = out.grad();
                if (!g) return;
                detail::softmax_groups_backward(out.data(), g, z.ensure_grad(), B * S, K, S, base);
            },
            {z, out});
    }
    return out;
}

// Row softmax over the last axis of any tensor of rank >= 1.
inline Tensor softmax_lastdim(const Tensor& z, Tape* tape = nullptr) {
    const int64_t n = z.shape()[z.shape().rank() - 1];
    const int64_t rows = z.size() / n;
    Tensor out(z.shape());
    auto base = [n](int64_t r) { return r * n; };
    detail::softmax_groups(z.data(), out.data(), rows, n, 1, base);
    out.check_finite("softmax_lastdim");
    if (tape) {
        tape->record(
            [z, out, rows, n, base]() {
                const double* g = out.grad();
                if (!g) return;
                detail::softmax_groups_backward(out.data(), g, z.ensure_grad(), rows, n, 1, base);
            },
            {z, out});
    }
    return out;
}

// mean_over_hw: [B,C,D,H,W] -> [B,C,D]; global_mean: [B,C,spatial...] -> [B,C].
inline Tensor pool(const Tensor& x, PoolMode mode, Tape* tape = nullptr) {
    if (mode == PoolMode::mean_over_hw) {
        if (x.shape().rank() != 5) throw ShapeError("pool(mean_over_hw): rank-5 input required");
        const int64_t B = x.shape()[0], C = x.shape()[1], D = x.shape()[2];
        const int64_t HW = x.shape()[3] * x.shape()[4];
        Tensor out(Shape{B, C, D});
        const double* xd = x.data();
        double* od = out.data();
        const double inv = 1.0 / static_cast<double>(HW);
        for (int64_t i = 0; i < B * C * D; ++i) {
            const double* xp = xd + i * HW;
            double acc = 0.0;
            for (int64_t j = 0; j < HW; ++j) acc += xp[j];
            od[i] = acc * inv;
        }
        out.check_finite("pool");
        if (tape) {
            tape->record(
                [x, out, B, C, D, HW, inv]() {
                    const double* g = out.grad();
                    if (!g) return;
                    double* gx = x.ensure_grad();
                    for (int64_t i = 0; i < B * C * D; ++i) {
                        const double gv = g[i] * inv;
                        double* gp = gx + i * HW;
                        for (int64_t j = 0; j < HW; ++j) gp[j] += gv;
                    }
                },
                {x, out});
        }
        return out;
    }

    if (x.shape().rank() < 3) throw ShapeError("pool(global_mean): rank >= 3 required");
    const int64_t B = x.shape()[0], C = x.shape()[1];
    const int64_t S = x.size() / (B * C);
    Tensor out(Shape{B, C});
    const double* xd = x.data();
    double* od = out.data();
    const double inv = 1.0 / static_cast<double>(S);
    for (int64_t i = 0; i < B * C; ++i) {
        const double* xp = xd + i * S;
        double acc = 0.0;
        for (int64_t j = 0; j < S; ++j) acc += xp[j];
        od[i] = acc * inv;
    }
    out.check_finite("pool");
    if (tape) {
        tape->record(
            [x, out, B, C, S, inv]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                for (int64_t i = 0; i < B * C; ++i) {
                    const double gv = g[i] * inv;
                    double* gp = gx + i * S;
                    for (int64_t j = 0; j < S; ++j) gp[j] += gv;
                }
            },
            {x, out});
    }
    return out;
}

// Standard [m,n] x [n,p] product.
inline Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    if (a.shape().rank() != 2 || b.shape().rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: " + a.shape().str() + " x " + b.shape().str());
    }
    const int64_t m = a.shape()[0], n = a.shape()[1], p = b.shape()[1];
    Tensor out(Shape{m, p});
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t kk = 0; kk < n; ++kk) {
            const double av = ad[i * n + kk];
            const double* brow = bd + kk * p;
            double* orow = od + i * p;
            for (int64_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    }
    out.check_finite("matmul");
    if (tape) {
        tape->record(
            [a, b, out, m, n, p]() {
                const double* g = out.grad();
                if (!g) return;
                double* ga = a.ensure_grad();
                double* gb = b.ensure_grad();
                const double* ad = a.data();
                const double* bd = b.data();
                for (int64_t i = 0; i < m; ++i) {
                    for (int64_t kk = 0; kk < n; ++kk) {
                        double acc = 0.0;
                        const double* brow = bd + kk * p;
                        const double* grow = g + i * p;
                        for (int64_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
                        ga[i * n + kk] += acc;
                    }
                }
                for (int64_t kk = 0; kk < n; ++kk) {
                    for (int64_t j = 0; j < p; ++j) {
                        double acc = 0.0;
                        for (int64_t i = 0; i < m; ++i) acc += ad[i * n + kk] * g[i * p + j];
                        gb[kk * p + j] += acc;
                    }
                }
            },
            {a, b, out});
    }
    return out;
}

// Batched product over a leading batch axis, with optional transposes:
// out[b] = op(a[b]) * op(b[b]).
inline Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b,
                  Tape* tape = nullptr) {
    if (a.shape().rank() != 3 || b.shape().rank() != 3 || a.shape()[0] != b.shape()[0]) {
        throw ShapeError("bmm: " + a.shape().str() + " x " + b.shape().str());
    }
    const int64_t B = a.shape()[0];
    const int64_t m = trans_a ? a.shape()[2] : a.shape()[1];
    const int64_t n = trans_a ? a.shape()[1] : a.shape()[2];
    const int64_t n2 = trans_b ? b.shape()[2] : b.shape()[1];
    const int64_t p = trans_b ? b.shape()[1] : b.shape()[2];
    if (n != n2) throw ShapeError("bmm: inner dims disagree");

    const int64_t a_sz = a.shape()[1] * a.shape()[2], b_sz = b.shape()[1] * b.shape()[2];
    // element (i,j) of an operand with physical rows r, transposed or not
    auto idx = [](bool trans, int64_t cols_phys, int64_t i, int64_t j) {
        return trans ? j * cols_phys + i : i * cols_phys + j;
    };
    const int64_t a_cols = a.shape()[2], b_cols = b.shape()[2];

    Tensor out(Shape{B, m, p});
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int64_t bt = 0; bt < B; ++bt) {
        const double* ap = ad + bt * a_sz;
        const double* bp = bd + bt * b_sz;
        double* op = od + bt * m * p;
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < p; ++j) {
                double acc = 0.0;
                for (int64_t kk = 0; kk < n; ++kk) {
                    acc += ap[idx(trans_a, a_cols, i, kk)] * bp[idx(trans_b, b_cols, kk, j)];
                }
                op[i * p + j] = acc;
            }
        }
    }
    out.check_finite("bmm");
    if (tape) {
        tape->record(
            [a, b, out, trans_a, trans_b, B, m, n, p, a_sz, b_sz, a_cols, b_cols, idx]() {
                const double* g = out.grad();
                if (!g) return;
                double* ga = a.ensure_grad();
                double* gb = b.ensure_grad();
                const double* ad = a.data();
                const double* bd = b.data();
                for (int64_t bt = 0; bt < B; ++bt) {
                    const double* ap = ad + bt * a_sz;
                    const double* bp = bd + bt * b_sz;
                    const double* gp = g + bt * m * p;
                    double* gap = ga + bt * a_sz;
                    double* gbp = gb + bt * b_sz;
                    for (int64_t i = 0; i < m; ++i) {
                        for (int64_t j = 0; j < p; ++j) {
                            const double gv = gp[i * p + j];
                            if (gv == 0.0) continue;
                            for (int64_t kk = 0; kk < n; ++kk) {
                                gap[idx(trans_a, a_cols, i, kk)] +=
                                    gv * bp[idx(trans_b, b_cols, kk, j)];
                                gbp[idx(trans_b, b_cols, kk, j)] +=
                                    gv * ap[idx(trans_a, a_cols, i, kk)];
                            }
                        }
                    }
                }
            },
            {a, b, out});
    }
    return out;
}

// Affine map on feature vectors: x: [B,Cin], w: [Cout,Cin], bias optional [Cout].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias, Tape* tape = nullptr) {
    if (x.shape().rank() != 2 || w.shape().rank() != 2 || x.shape()[1] != w.shape()[1]) {
        throw ShapeError("linear: " + x.shape().str() + " x " + w.shape().str());
    }
    const int64_t B = x.shape()[0], Cin = x.shape()[1], Cout = w.shape()[0];
    if (bias && (bias->shape().rank() != 1 || bias->shape()[0] != Cout)) {
        throw ShapeError("linear: bias shape " + bias->shape().str());
    }
    Tensor out(Shape{B, Cout});
    const double* xd = x.data();
    const double* wd = w.data();
    double* od = out.data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t o = 0; o < Cout; ++o) {
            double acc = bias ? bias->data()[o] : 0.0;
            const double* wrow = wd + o * Cin;
            const double* xrow = xd + b * Cin;
            for (int64_t i = 0; i < Cin; ++i) acc += wrow[i] * xrow[i];
            od[b * Cout + o] = acc;
        }
    }
    out.check_finite("linear");
    if (tape) {
        Tensor bt = bias ? *bias : Tensor();
        tape->record(
            [x, w, bt, out, B, Cin, Cout]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                double* gw = w.ensure_grad();
                double* gb = bt.defined() ? bt.ensure_grad() : nullptr;
                const double* xd = x.data();
                const double* wd = w.data();
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t o = 0; o < Cout; ++o) {
                        const double gv = g[b * Cout + o];
                        if (gb) gb[o] += gv;
                        const double* wrow = wd + o * Cin;
                        const double* xrow = xd + b * Cin;
                        double* gxrow = gx + b * Cin;
                        double* gwrow = gw + o * Cin;
                        for (int64_t i = 0; i < Cin; ++i) {
                            gxrow[i] += gv * wrow[i];
                            gwrow[i] += gv * xrow[i];
                        }
                    }
                }
            },
            bias ? std::initializer_list<Tensor>{x, w, *bias, out}
                 : std::initializer_list<Tensor>{x, w, out});
    }
    return out;
}

// Applies a [d,C] matrix over the channel axis of [B,C,T]: y[b] = w * x[b].
inline Tensor channel_project(const Tensor& x, const Tensor& w, Tape* tape = nullptr) {
    if (x.shape().rank() != 3 || w.shape().rank() != 2 || w.shape()[1] != x.shape()[1]) {
        throw ShapeError("channel_project: " + x.shape().str() + " with " + w.shape().str());
    }
    const int64_t B = x.shape()[0], C = x.shape()[1], T = x.shape()[2], d = w.shape()[0];
    Tensor out(Shape{B, d, T});
    const double* xd = x.data();
    const double* wd = w.data();
    double* od = out.data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t j = 0; j < d; ++j) {
            double* orow = od + (b * d + j) * T;
            std::fill(orow, orow + T, 0.0);
            for (int64_t c = 0; c < C; ++c) {
                const double wv = wd[j * C + c];
                if (wv == 0.0) continue;
                const double* xrow = xd + (b * C + c) * T;
                for (int64_t t = 0; t < T; ++t) orow[t] += wv * xrow[t];
            }
        }
    }
    out.check_finite("channel_project");
    if (tape) {
        tape->record(
            [x, w, out, B, C, T, d]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                double* gw = w.ensure_grad();
                const double* xd = x.data();
                const double* wd = w.data();
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t j = 0; j < d; ++j) {
                        const double* grow = g + (b * d + j) * T;
                        for (int64_t c = 0; c < C; ++c) {
                            const double wv = wd[j * C + c];
                            double* gxrow = gx + (b * C + c) * T;
                            const double* xrow = xd + (b * C + c) * T;
                            double acc = 0.0;
                            for (int64_t t = 0; t < T; ++t) {
                                gxrow[t] += wv * grow[t];
                                acc += xrow[t] * grow[t];
                            }
                            gw[j * C + c] += acc;
                        }
                    }
                }
            },
            {x, w, out});
    }
    return out;
}

// Corner-aligned trilinear resize of the spatial axes of [B,C,D,H,W].
// Nested lerp keeps constants and identity resizes exact.
inline Tensor interpolate_trilinear(const Tensor& x, const Shape& target, Tape* tape = nullptr) {
    if (x.shape().rank() != 5) throw ShapeError("interpolate_trilinear: rank-5 input required");
    if (target.rank() != 3) throw ShapeError("interpolate_trilinear: target must be [D,H,W]");
    const int64_t B = x.shape()[0], C = x.shape()[1];
    const int64_t D = x.shape()[2], H = x.shape()[3], W = x.shape()[4];
    const int64_t Dt = target[0], Ht = target[1], Wt = target[2];

    struct AxisMap {
        std::vector<int64_t> i0, i1;
        std::vector<double> f;
    };
    auto build = [](int64_t n, int64_t nt) {
        AxisMap m;
        m.i0.resize(nt);
        m.i1.resize(nt);
        m.f.resize(nt);
        for (int64_t o = 0; o < nt; ++o) {
            const double src = (nt == 1) ? 0.0
                                         : static_cast<double>(o) * static_cast<double>(n - 1) /
                                               static_cast<double>(nt - 1);
            int64_t lo = static_cast<int64_t>(std::floor(src));
            lo = std::clamp<int64_t>(lo, 0, n - 1);
            const int64_t hi = std::min<int64_t>(lo + 1, n - 1);
            m.i0[o] = lo;
            m.i1[o] = hi;
            m.f[o] = src - static_cast<double>(lo);
        }
        return m;
    };
    const AxisMap md = build(D, Dt), mh = build(H, Ht), mw = build(W, Wt);

    Tensor out(Shape{B, C, Dt, Ht, Wt});
    const double* xd = x.data();
    double* od = out.data();
    const int64_t xpl = D * H * W, opl = Dt * Ht * Wt;
    auto lerp = [](double a, double b, double f) { return a + f * (b - a); };
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* xp = xd + bc * xpl;
        double* op = od + bc * opl;
        for (int64_t dz = 0; dz < Dt; ++dz) {
            for (int64_t hy = 0; hy < Ht; ++hy) {
                for (int64_t wx = 0; wx < Wt; ++wx) {
                    auto at = [&](int64_t d0, int64_t h0, int64_t w0) {
                        return xp[(d0 * H + h0) * W + w0];
                    };
                    const double c00 = lerp(at(md.i0[dz], mh.i0[hy], mw.i0[wx]),
                                            at(md.i0[dz], mh.i0[hy], mw.i1[wx]), mw.f[wx]);
                    const double c01 = lerp(at(md.i0[dz], mh.i1[hy], mw.i0[wx]),
                                            at(md.i0[dz], mh.i1[hy], mw.i1[wx]), mw.f[wx]);
                    const double c10 = lerp(at(md.i1[dz], mh.i0[hy], mw.i0[wx]),
                                            at(md.i1[dz], mh.i0[hy], mw.i1[wx]), mw.f[wx]);
                    const double c11 = lerp(at(md.i1[dz], mh.i1[hy], mw.i0[wx]),
                                            at(md.i1[dz], mh.i1[hy], mw.i1[wx]), mw.f[wx]);
                    const double c0 = lerp(c00, c01, mh.f[hy]);
                    const double c1 = lerp(c10, c11, mh.f[hy]);
                    op[(dz * Ht + hy) * Wt + wx] = lerp(c0, c1, md.f[dz]);
                }
            }
        }
    }
    out.check_finite("interpolate_trilinear");
    if (tape) {
        tape->record(
            [x, out, md, mh, mw, B, C, D, H, W, Dt, Ht, Wt]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                const int64_t xpl = D * H * W, opl = Dt * Ht * Wt;
                for (int64_t bc = 0; bc < B * C; ++bc) {
                    double* gp = gx + bc * xpl;
                    const double* go = g + bc * opl;
                    for (int64_t dz = 0; dz < Dt; ++dz) {
                        const double fd = md.f[dz];
                        for (int64_t hy = 0; hy < Ht; ++hy) {
                            const double fh = mh.f[hy];
                            for (int64_t wx = 0; wx < Wt; ++wx) {
                                const double fw = mw.f[wx];
                                const double gv = go[(dz * Ht + hy) * Wt + wx];
                                if (gv == 0.0) continue;
                                auto add = [&](int64_t d0, int64_t h0, int64_t w0, double wgt) {
                                    gp[(d0 * H + h0) * W + w0] += gv * wgt;
                                };
                                add(md.i0[dz], mh.i0[hy], mw.i0[wx], (1 - fd) * (1 - fh) * (1 - fw));
                                add(md.i0[dz], mh.i0[hy], mw.i1[wx], (1 - fd) * (1 - fh) * fw);
                                add(md.i0[dz], mh.i1[hy], mw.i0[wx], (1 - fd) * fh * (1 - fw));
                                add(md.i0[dz], mh.i1[hy], mw.i1[wx], (1 - fd) * fh * fw);
                                add(md.i1[dz], mh.i0[hy], mw.i0[wx], fd * (1 - fh) * (1 - fw));
                                add(md.i1[dz], mh.i0[hy], mw.i1[wx], fd * (1 - fh) * fw);
                                add(md.i1[dz], mh.i1[hy], mw.i0[wx], fd * fh * (1 - fw));
                                add(md.i1[dz], mh.i1[hy], mw.i1[wx], fd * fh * fw);
                            }
                        }
                    }
                }
            },
            {x, out});
    }
    return out;
}

namespace detail {

enum class BroadcastKind { none, per_channel_bc, per_slice_bcd };

inline BroadcastKind broadcast_kind(const Shape& a, const Shape& b) {
    if (a == b) return BroadcastKind::none;
    if (a.rank() == 5 && b.rank() == 2 && b[0] == a[0] && b[1] == a[1]) {
        return BroadcastKind::per_channel_bc;
    }
    if (a.rank() == 5 && b.rank() == 3 && b[0] == a[0] && b[1] == a[1] && b[2] == a[2]) {
        return BroadcastKind::per_slice_bcd;
    }
    throw ShapeError("elementwise: incompatible shapes " + a.str() + " and " + b.str());
}

}  // namespace detail

// Element-wise add/mul. b may equal a's shape, or broadcast from [B,C] or
// [B,C,D] onto [B,C,D,H,W] (replicated over the trailing spatial axes).
inline Tensor elementwise(const Tensor& a, const Tensor& b, Elementwise kind,
                          Tape* tape = nullptr) {
    const auto bk = detail::broadcast_kind(a.shape(), b.shape());
    Tensor out(a.shape());
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    const int64_t n = a.size();
    const int64_t rep = (bk == detail::BroadcastKind::none) ? 1 : n / b.size();

    if (bk == detail::BroadcastKind::none) {
        if (kind == Elementwise::add) {
            for (int64_t i = 0; i < n; ++i) od[i] = ad[i] + bd[i];
        } else {
            for (int64_t i = 0; i < n; ++i) od[i] = ad[i] * bd[i];
        }
    } else {
        const int64_t groups = b.size();
        for (int64_t gidx = 0; gidx < groups; ++gidx) {
            const double bv = bd[gidx];
            const double* ap = ad + gidx * rep;
            double* op = od + gidx * rep;
            if (kind == Elementwise::add) {
                for (int64_t i = 0; i < rep; ++i) op[i] = ap[i] + bv;
            } else {
                for (int64_t i = 0; i < rep; ++i) op[i] = ap[i] * bv;
            }
        }
    }
    out.check_finite("elementwise");
    if (tape) {
        tape->record(
            [a, b, out, kind, bk, n, rep]() {
                const double* g = out.grad();
                if (!g) return;
                double* ga = a.ensure_grad();
                double* gb = b.ensure_grad();
                const double* ad = a.data();
                const double* bd = b.data();
                if (bk == detail::BroadcastKind::none) {
                    if (kind == Elementwise::add) {
                        for (int64_t i = 0; i < n; ++i) {
                            ga[i] += g[i];
                            gb[i] += g[i];
                        }
                    } else {
                        for (int64_t i = 0; i < n; ++i) {
                            ga[i] += g[i] * bd[i];
                            gb[i] += g[i] * ad[i];
                        }
                    }
                } else {
                    const int64_t groups = n / rep;
                    for (int64_t gidx = 0; gidx < groups; ++gidx) {
                        const double bv = bd[gidx];
                        const double* gp = g + gidx * rep;
                        const double* ap = ad + gidx * rep;
                        double* gap = ga + gidx * rep;
                        double acc = 0.0;
                        if (kind == Elementwise::add) {
                            for (int64_t i = 0; i < rep; ++i) {
                                gap[i] += gp[i];
                                acc += gp[i];
                            }
                        } else {
                            for (int64_t i = 0; i < rep; ++i) {
                                gap[i] += gp[i] * bv;
                                acc += gp[i] * ap[i];
                            }
                        }
                        gb[gidx] += acc;
                    }
                }
            },
            {a, b, out});
    }
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    return elementwise(a, b, Elementwise::add, tape);
}

inline Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    return elementwise(a, b, Elementwise::mul, tape);
}

// Concatenation along the channel axis (axis 1) of rank >= 2 tensors.
inline Tensor concat_channels(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    if (a.shape().rank() != b.shape().rank() || a.shape().rank() < 2) {
        throw ShapeError("concat_channels: " + a.shape().str() + " with " + b.shape().str());
    }
    for (int i = 0; i < a.shape().rank(); ++i) {
        if (i != 1 && a.shape()[i] != b.shape()[i]) {
            throw ShapeError("concat_channels: non-channel dims differ: " + a.shape().str() +
                             " vs " + b.shape().str());
        }
    }
    const int64_t B = a.shape()[0], Ca = a.shape()[1], Cb = b.shape()[1];
    const int64_t S = a.size() / (B * Ca);
    std::vector<int64_t> dims = a.shape().dims();
    dims[1] = Ca + Cb;
    Tensor out{Shape(dims)};
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int64_t bt = 0; bt < B; ++bt) {
        std::copy(ad + bt * Ca * S, ad + (bt + 1) * Ca * S, od + bt * (Ca + Cb) * S);
        std::copy(bd + bt * Cb * S, bd + (bt + 1) * Cb * S, od + (bt * (Ca + Cb) + Ca) * S);
    }
    if (tape) {
        tape->record(
            [a, b, out, B, Ca, Cb, S]() {
                const double* g = out.grad();
                if (!g) return;
                double* ga = a.ensure_grad();
                double* gb = b.ensure_grad();
                for (int64_t bt = 0; bt < B; ++bt) {
                    const double* gp = g + bt * (Ca + Cb) * S;
                    double* gap = ga + bt * Ca * S;
                    double* gbp = gb + bt * Cb * S;
                    for (int64_t i = 0; i < Ca * S; ++i) gap[i] += gp[i];
                    for (int64_t i = 0; i < Cb * S; ++i) gbp[i] += gp[Ca * S + i];
                }
            },
            {a, b, out});
    }
    return out;
}

// Copy into a new shape with identical element count and row-major order.
inline Tensor reshape(const Tensor& x, Shape target, Tape* tape = nullptr) {
    if (target.numel() != x.size()) {
        throw ShapeError("reshape: " + x.shape().str() + " -> " + target.str());
    }
    Tensor out(std::move(target));
    std::copy(x.data(), x.data() + x.size(), out.data());
    if (tape) {
        const int64_t n = x.size();
        tape->record(
            [x, out, n]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                for (int64_t i = 0; i < n; ++i) gx[i] += g[i];
            },
            {x, out});
    }
    return out;
}

// Copies row `row` of a [S,C] table; backward scatters into that row only.
inline Tensor row_select(const Tensor& table, int64_t row, Tape* tape = nullptr) {
    if (table.shape().rank() != 2) throw ShapeError("row_select: table must be rank 2");
    const int64_t S = table.shape()[0], C = table.shape()[1];
    if (row < 0 || row >= S) {
        throw ConfigError("row_select: row " + std::to_string(row) + " out of range [0," +
                          std::to_string(S) + ")");
    }
    Tensor out(Shape{C});
    std::copy(table.data() + row * C, table.data() + (row + 1) * C, out.data());
    if (tape) {
        tape->record(
            [table, out, row, C]() {
                const double* g = out.grad();
                if (!g) return;
                double* gt = table.ensure_grad();
                for (int64_t i = 0; i < C; ++i) gt[row * C + i] += g[i];
            },
            {table, out});
    }
    return out;
}

// out = c * x
inline Tensor scale(const Tensor& x, double c, Tape* tape = nullptr) {
    Tensor out(x.shape());
    const double* xd = x.data();
    double* od = out.data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) od[i] = c * xd[i];
    out.check_finite("scale");
    if (tape) {
        tape->record(
            [x, out, c, n]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                for (int64_t i = 0; i < n; ++i) gx[i] += c * g[i];
            },
            {x, out});
    }
    return out;
}

// out = ca * a + cb * b, shapes identical.
inline Tensor scale_add(const Tensor& a, const Tensor& b, double ca, double cb,
                        Tape* tape = nullptr) {
    if (a.shape() != b.shape()) {
        throw ShapeError("scale_add: " + a.shape().str() + " vs " + b.shape().str());
    }
    Tensor out(a.shape());
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    const int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) od[i] = ca * ad[i] + cb * bd[i];
    out.check_finite("scale_add");
    if (tape) {
        tape->record(
            [a, b, out, ca, cb, n]() {
                const double* g = out.grad();
                if (!g) return;
                double* ga = a.ensure_grad();
                double* gb = b.ensure_grad();
                for (int64_t i = 0; i < n; ++i) {
                    ga[i] += ca * g[i];
                    gb[i] += cb * g[i];
                }
            },
            {a, b, out});
    }
    return out;
}

// Sigmoid-gated blend: out = s*a + (1-s)*b with s = sigmoid(logit[0]).
// The gradient flows into a, b and the scalar logit.
inline Tensor blend(const Tensor& a, const Tensor& b, const Tensor& logit, Tape* tape = nullptr) {
    if (a.shape() != b.shape() || logit.size() != 1) {
        throw ShapeError("blend: operands " + a.shape().str() + "/" + b.shape().str() +
                         ", logit must be scalar");
    }
    const double s = detail::sigmoid_scalar(logit[0]);
    Tensor out(a.shape());
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    const int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) od[i] = s * ad[i] + (1.0 - s) * bd[i];
    out.check_finite("blend");
    if (tape) {
        tape->record(
            [a, b, logit, out, s, n]() {
                const double* g = out.grad();
                if (!g) return;
                double* ga = a.ensure_grad();
                double* gb = b.ensure_grad();
                double* gl = logit.ensure_grad();
                const double* ad = a.data();
                const double* bd = b.data();
                double acc = 0.0;
                for (int64_t i = 0; i < n; ++i) {
                    ga[i] += s * g[i];
                    gb[i] += (1.0 - s) * g[i];
                    acc += g[i] * (ad[i] - bd[i]);
                }
                gl[0] += s * (1.0 - s) * acc;
            },
            {a, b, logit, out});
    }
    return out;
}

// Sum of all elements; the reduction used to form scalar losses.
inline Tensor sum_all(const Tensor& x, Tape* tape = nullptr) {
    Tensor out(Shape{1});
    const double* xd = x.data();
    double acc = 0.0;
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) acc += xd[i];
    out[0] = acc;
    out.check_finite("sum_all");
    if (tape) {
        tape->record(
            [x, out, n]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                for (int64_t i = 0; i < n; ++i) gx[i] += g[0];
            },
            {x, out});
    }
    return out;
}

}  // namespace dalight::ops
