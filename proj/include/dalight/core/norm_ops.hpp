#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dalight/core/tape.hpp"
#include "dalight/core/tensor.hpp"

namespace dalight::ops {

// Group normalization without affine: within each (sample, group) the output
// has mean 0 and variance 1 up to eps. x: [B,C,spatial...].
inline Tensor group_norm_base(const Tensor& x, int groups, double eps, Tape* tape = nullptr) {
    if (x.shape().rank() < 3) throw ShapeError("group_norm_base: rank >= 3 required");
    const int64_t B = x.shape()[0], C = x.shape()[1];
    if (groups < 1 || C % groups != 0) {
        throw ShapeError("group_norm_base: groups " + std::to_string(groups) +
                         " does not divide C = " + std::to_string(C));
    }
    const int64_t S = x.size() / (B * C);
    const int64_t G = groups, gc = C / G;
    const int64_t m = gc * S;  // elements per (sample, group)

    Tensor out(x.shape());
    std::vector<double> inv_std(static_cast<size_t>(B * G));
    const double* xd = x.data();
    double* od = out.data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t g = 0; g < G; ++g) {
            const double* xp = xd + (b * C + g * gc) * S;
            double* op = od + (b * C + g * gc) * S;
            double mean = 0.0;
            for (int64_t i = 0; i < m; ++i) mean += xp[i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (int64_t i = 0; i < m; ++i) {
                const double dlt = xp[i] - mean;
                var += dlt * dlt;
            }
            var /= static_cast<double>(m);
            const double inv = 1.0 / std::sqrt(var + eps);
            inv_std[static_cast<size_t>(b * G + g)] = inv;
            for (int64_t i = 0; i < m; ++i) op[i] = (xp[i] - mean) * inv;
        }
    }
    out.check_finite("group_norm_base");
    if (tape) {
        tape->record(
            [x, out, inv_std, B, C, G, gc, S, m]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                const double* od = out.data();
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t gi = 0; gi < G; ++gi) {
                        const double* gp = g + (b * C + gi * gc) * S;
                        const double* xhat = od + (b * C + gi * gc) * S;
                        double* gxp = gx + (b * C + gi * gc) * S;
                        double mean_g = 0.0, mean_gx = 0.0;
                        for (int64_t i = 0; i < m; ++i) {
                            mean_g += gp[i];
                            mean_gx += gp[i] * xhat[i];
                        }
                        mean_g /= static_cast<double>(m);
                        mean_gx /= static_cast<double>(m);
                        const double inv = inv_std[static_cast<size_t>(b * G + gi)];
                        for (int64_t i = 0; i < m; ++i) {
                            gxp[i] += inv * (gp[i] - mean_g - xhat[i] * mean_gx);
                        }
                    }
                }
            },
            {x, out});
    }
    return out;
}

// Per-channel affine: y = gamma[c] * x + beta[c]. x: [B,C,spatial...].
inline Tensor channel_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                             Tape* tape = nullptr) {
    if (x.shape().rank() < 2) throw ShapeError("channel_affine: rank >= 2 required");
    const int64_t B = x.shape()[0], C = x.shape()[1];
    if (gamma.shape().rank() != 1 || gamma.shape()[0] != C || beta.shape() != gamma.shape()) {
        throw ShapeError("channel_affine: affine shapes " + gamma.shape().str() + "/" +
                         beta.shape().str() + " for C = " + std::to_string(C));
    }
    const int64_t S = x.size() / (B * C);
    Tensor out(x.shape());
    const double* xd = x.data();
    const double* gd = gamma.data();
    const double* bd = beta.data();
    double* od = out.data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t c = 0; c < C; ++c) {
            const double gv = gd[c], bv = bd[c];
            const double* xp = xd + (b * C + c) * S;
            double* op = od + (b * C + c) * S;
            for (int64_t i = 0; i < S; ++i) op[i] = gv * xp[i] + bv;
        }
    }
    out.check_finite("channel_affine");
    if (tape) {
        tape->record(
            [x, gamma, beta, out, B, C, S]() {
                const double* g = out.grad();
                if (!g) return;
                double* gx = x.ensure_grad();
                double* gg = gamma.ensure_grad();
                double* gb = beta.ensure_grad();
                const double* xd = x.data();
                const double* gd = gamma.data();
                for (int64_t b = 0; b < B; ++b) {
                    for (int64_t c = 0; c < C; ++c) {
                        const double gv = gd[c];
                        const double* gp = g + (b * C + c) * S;
                        const double* xp = xd + (b * C + c) * S;
                        double* gxp = gx + (b * C + c) * S;
                        double acc_g = 0.0, acc_b = 0.0;
                        for (int64_t i = 0; i < S; ++i) {
                            gxp[i] += gv * gp[i];
                            acc_g += gp[i] * xp[i];
                            acc_b += gp[i];
                        }
                        gg[c] += acc_g;
                        gb[c] += acc_b;
                    }
                }
            },
            {x, gamma, beta, out});
    }
    return out;
}

// Group normalization with per-channel affine.
inline Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                         double eps, Tape* tape = nullptr) {
    return channel_affine(group_norm_base(x, groups, eps, tape), gamma, beta, tape);
}

}  // namespace dalight::ops
