#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "dalight/data/case_record.hpp"

namespace dalight::data {

// Per-class mean intensities for (T1, T1ce, T2, FLAIR). Healthy tissue sits at
// 0.4 everywhere; edema is FLAIR-bright, enhancing tumor is T1ce-bright.
inline constexpr double kTissueMean = 0.4;
inline constexpr std::array<std::array<double, 4>, 4> kClassContrast = {{
    {0.4, 0.4, 0.4, 0.4},      // BG tissue inside the brain mask
    {0.2, 0.15, 0.6, 0.5},     // NCR
    {0.45, 0.4, 0.7, 0.9},     // ED
    {0.5, 0.9, 0.55, 0.6},     // ET
}};
inline constexpr double kPhantomNoiseSd = 0.05;

// Synthetic brain-like case: an ellipsoidal foreground over exact-zero
// background, holding an edema ellipsoid with a concentric enhancing shell and
// a necrotic core. Intensities are quantized to 32-bit float values so a
// stored case round-trips bit-identically. Deterministic under
// (seed, case_id).
inline CaseRecord generate_phantom(uint64_t seed, const std::array<int64_t, 3>& extents,
                                   const std::string& case_id, int num_buckets = 8) {
    for (int64_t e : extents) {
        if (e < 16) {
            throw ConfigError("generate_phantom: extents must be >= 16, got " +
                              std::to_string(e));
        }
    }
    Rng rng(derive_seed(seed, case_id));
    const int64_t D = extents[0], H = extents[1], W = extents[2];

    const std::array<double, 3> brain_center = {D / 2.0, H / 2.0, W / 2.0};
    const std::array<double, 3> brain_axes = {0.42 * D, 0.42 * H, 0.42 * W};
    std::array<double, 3> tumor_center{}, tumor_axes{};
    for (int i = 0; i < 3; ++i) {
        tumor_center[i] = brain_center[i] + rng.uniform(-0.08, 0.08) * extents[i];
    }
    for (int i = 0; i < 3; ++i) {
        tumor_axes[i] = rng.uniform(0.18, 0.24) * extents[i];
    }

    CaseRecord rec;
    rec.case_id = case_id;
    rec.bucket = scanner_bucket(case_id, num_buckets);
    rec.image = Tensor(Shape{4, D, H, W});
    rec.labels.assign(static_cast<size_t>(D * H * W), kBG);

    const int64_t N = D * H * W;
    std::vector<uint8_t> inside(static_cast<size_t>(N), 0);
    for (int64_t d = 0; d < D; ++d) {
        for (int64_t h = 0; h < H; ++h) {
            for (int64_t w = 0; w < W; ++w) {
                const int64_t v = (d * H + h) * W + w;
                auto sq = [](double x) { return x * x; };
                const double brain_rho = sq((d - brain_center[0]) / brain_axes[0]) +
                                         sq((h - brain_center[1]) / brain_axes[1]) +
                                         sq((w - brain_center[2]) / brain_axes[2]);
                if (brain_rho > 1.0) continue;
                inside[static_cast<size_t>(v)] = 1;
                const double rho = std::sqrt(sq((d - tumor_center[0]) / tumor_axes[0]) +
                                             sq((h - tumor_center[1]) / tumor_axes[1]) +
                                             sq((w - tumor_center[2]) / tumor_axes[2]));
                if (rho <= 0.45) {
                    rec.labels[static_cast<size_t>(v)] = kNCR;
                } else if (rho <= 0.7) {
                    rec.labels[static_cast<size_t>(v)] = kET;
                } else if (rho <= 1.0) {
                    rec.labels[static_cast<size_t>(v)] = kED;
                }
            }
        }
    }

    for (int m = 0; m < 4; ++m) {
        double* plane = rec.image.data() + m * N;
        for (int64_t v = 0; v < N; ++v) {
            if (!inside[static_cast<size_t>(v)]) continue;  // background stays exactly 0
            const uint8_t label = rec.labels[static_cast<size_t>(v)];
            const double mean = kClassContrast[label][static_cast<size_t>(m)];
            const double value =
                std::max(0.01, mean + rng.normal(0.0, kPhantomNoiseSd));
            plane[v] = static_cast<double>(static_cast<float>(value));
        }
    }
    return rec;
}

}  // namespace dalight::data
