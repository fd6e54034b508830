#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dalight/core/ops.hpp"

namespace dalight::train {

// Loss weights and the Dice smoothing epsilon. The Dice term averages over the
// tumor classes only (channels 1..K-1); background is always excluded.
struct LossConfig {
    double lambda_dice = 1.0;
    double lambda_ce = 0.5;
    double epsilon = 1e-5;
};

// Soft Dice loss: 1 - mean over tumor classes of
// (2*sum(p*y) + eps) / (sum(p) + sum(y) + eps). Value lies in [0,1); an empty
// class with an empty prediction contributes a perfect term through the
// smoothing. Gradients flow into p only.
inline Tensor dice_loss(const Tensor& probs, const Tensor& one_hot, const LossConfig& cfg,
                        Tape* tape = nullptr) {
    if (probs.shape() != one_hot.shape() || probs.shape().rank() < 2) {
        throw ShapeError("dice_loss: probs " + probs.shape().str() + " vs one-hot " +
                         (one_hot.defined() ? one_hot.shape().str() : "?"));
    }
    const int64_t B = probs.shape()[0], K = probs.shape()[1];
    if (K < 2) throw ShapeError("dice_loss: need at least one tumor class");
    const int64_t S = probs.size() / (B * K);
    const int64_t tumor_classes = K - 1;
    const double eps = cfg.epsilon;

    std::vector<double> num(static_cast<size_t>(tumor_classes), eps);
    std::vector<double> den(static_cast<size_t>(tumor_classes), eps);
    for (int64_t c = 1; c < K; ++c) {
        double inter = 0.0, psum = 0.0, ysum = 0.0;
        for (int64_t b = 0; b < B; ++b) {
            const double* p = probs.data() + (b * K + c) * S;
            const double* y = one_hot.data() + (b * K + c) * S;
            for (int64_t v = 0; v < S; ++v) {
                inter += p[v] * y[v];
                psum += p[v];
                ysum += y[v];
            }
        }
        num[static_cast<size_t>(c - 1)] += 2.0 * inter;
        den[static_cast<size_t>(c - 1)] += psum + ysum;
    }
    double mean_term = 0.0;
    for (int64_t c = 0; c < tumor_classes; ++c) {
        mean_term += num[static_cast<size_t>(c)] / den[static_cast<size_t>(c)];
    }
    mean_term /= static_cast<double>(tumor_classes);

    Tensor loss(Shape{1});
    loss[0] = 1.0 - mean_term;
    loss.check_finite("dice_loss");

    if (tape) {
        tape->record(
            [probs, one_hot, loss, num, den, B, K, S, tumor_classes]() {
                const double* g = loss.grad();
                if (!g) return;
                double* gp = probs.ensure_grad();
                const double scale = g[0] / static_cast<double>(tumor_classes);
                for (int64_t c = 1; c < K; ++c) {
                    const double n = num[static_cast<size_t>(c - 1)];
                    const double d = den[static_cast<size_t>(c - 1)];
                    for (int64_t b = 0; b < B; ++b) {
                        const double* y = one_hot.data() + (b * K + c) * S;
                        double* gpp = gp + (b * K + c) * S;
                        for (int64_t v = 0; v < S; ++v) {
                            // d(1 - term)/dp = -(2y*den - num)/den^2
                            gpp[v] -= scale * (2.0 * y[v] * d - n) / (d * d);
                        }
                    }
                }
            },
            {probs, one_hot, loss});
    }
    return loss;
}

// Mean voxel-wise cross entropy, -log p_true, with probabilities clamped at
// 1e-12 before the logarithm.
inline Tensor ce_loss(const Tensor& probs, const Tensor& one_hot, Tape* tape = nullptr) {
    if (probs.shape() != one_hot.shape() || probs.shape().rank() < 2) {
        throw ShapeError("ce_loss: probs " + probs.shape().str() + " vs one-hot " +
                         (one_hot.defined() ? one_hot.shape().str() : "?"));
    }
    constexpr double clamp = 1e-12;
    const int64_t B = probs.shape()[0], K = probs.shape()[1];
    const int64_t S = probs.size() / (B * K);
    const double inv_voxels = 1.0 / static_cast<double>(B * S);

    double acc = 0.0;
    for (int64_t i = 0; i < probs.size(); ++i) {
        if (one_hot[i] != 0.0) {
            acc -= one_hot[i] * std::log(std::max(probs[i], clamp));
        }
    }
    Tensor loss(Shape{1});
    loss[0] = acc * inv_voxels;
    loss.check_finite("ce_loss");

    if (tape) {
        const int64_t n = probs.size();
        tape->record(
            [probs, one_hot, loss, inv_voxels, n]() {
                const double* g = loss.grad();
                if (!g) return;
                double* gp = probs.ensure_grad();
                for (int64_t i = 0; i < n; ++i) {
                    if (one_hot[i] != 0.0 && probs[i] > clamp) {
                        gp[i] -= g[0] * one_hot[i] * inv_voxels / probs[i];
                    }
                }
            },
            {probs, one_hot, loss});
    }
    return loss;
}

// lambda_dice * dice + lambda_ce * ce, exactly.
inline Tensor total_loss(const Tensor& probs, const Tensor& one_hot, const LossConfig& cfg,
                         Tape* tape = nullptr) {
    Tensor dice = dice_loss(probs, one_hot, cfg, tape);
    Tensor ce = ce_loss(probs, one_hot, tape);
    return ops::scale_add(dice, ce, cfg.lambda_dice, cfg.lambda_ce, tape);
}

// One-hot encoding of a label volume as [1,K,D,H,W].
inline Tensor one_hot_volume(std::span<const uint8_t> labels, int64_t k, const Shape& spatial) {
    if (spatial.numel() != static_cast<int64_t>(labels.size())) {
        throw ShapeError("one_hot_volume: label count does not match extents");
    }
    Tensor out(Shape{1, k, spatial[0], spatial[1], spatial[2]});
    const int64_t S = spatial.numel();
    for (int64_t v = 0; v < S; ++v) {
        const uint8_t label = labels[static_cast<size_t>(v)];
        if (label >= k) throw ConfigError("one_hot_volume: label out of range");
        out[label * S + v] = 1.0;
    }
    return out;
}

}  // namespace dalight::train
