#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "dalight/data/case_record.hpp"

namespace dalight::data {

// Cuts a p-cube patch. With probability tumor_bias the patch is centered on a
// uniformly drawn tumor voxel (clamped so the patch fits); otherwise the
// origin is uniform over all valid origins. A case without tumor voxels
// always takes the uniform branch. Image and labels are co-registered.
inline PatchSample sample_patch(const CaseRecord& rec, int64_t p, Rng& rng,
                                double tumor_bias = 0.8) {
    const int64_t D = rec.depth(), H = rec.height(), W = rec.width();
    if (p < 1 || p > D || p > H || p > W) {
        throw ShapeError("sample_patch: patch " + std::to_string(p) +
                         " exceeds volume extents " + rec.image.shape().str());
    }

    const bool want_tumor = rng.bernoulli(tumor_bias);
    std::array<int64_t, 3> origin{0, 0, 0};
    std::vector<int64_t> tumor;
    if (want_tumor) {
        tumor.reserve(1024);
        for (int64_t v = 0; v < rec.voxels(); ++v) {
            if (rec.labels[static_cast<size_t>(v)] != kBG) tumor.push_back(v);
        }
    }
    if (want_tumor && !tumor.empty()) {
        const int64_t v = tumor[static_cast<size_t>(rng.uniform_int(
            static_cast<int64_t>(tumor.size())))];
        const std::array<int64_t, 3> center = {v / (H * W), (v / W) % H, v % W};
        const std::array<int64_t, 3> extents = {D, H, W};
        for (int i = 0; i < 3; ++i) {
            origin[static_cast<size_t>(i)] = std::clamp<int64_t>(
                center[static_cast<size_t>(i)] - p / 2, 0, extents[static_cast<size_t>(i)] - p);
        }
    } else {
        origin[0] = rng.uniform_int(D - p + 1);
        origin[1] = rng.uniform_int(H - p + 1);
        origin[2] = rng.uniform_int(W - p + 1);
    }

    PatchSample sample;
    sample.case_id = rec.case_id;
    sample.bucket = rec.bucket;
    sample.origin = origin;
    sample.image = Tensor(Shape{4, p, p, p});
    sample.labels.assign(static_cast<size_t>(p * p * p), 0);
    const int64_t N = D * H * W;
    for (int m = 0; m < 4; ++m) {
        const double* src = rec.image.data() + m * N;
        double* dst = sample.image.data() + m * p * p * p;
        for (int64_t d = 0; d < p; ++d) {
            for (int64_t h = 0; h < p; ++h) {
                const int64_t src_row = ((origin[0] + d) * H + origin[1] + h) * W + origin[2];
                const int64_t dst_row = (d * p + h) * p;
                for (int64_t w = 0; w < p; ++w) dst[dst_row + w] = src[src_row + w];
            }
        }
    }
    for (int64_t d = 0; d < p; ++d) {
        for (int64_t h = 0; h < p; ++h) {
            const int64_t src_row = ((origin[0] + d) * H + origin[1] + h) * W + origin[2];
            const int64_t dst_row = (d * p + h) * p;
            for (int64_t w = 0; w < p; ++w) {
                sample.labels[static_cast<size_t>(dst_row + w)] =
                    rec.labels[static_cast<size_t>(src_row + w)];
            }
        }
    }
    return sample;
}

// Random flips on each spatial axis (applied to image and labels together)
// plus a per-modality intensity map a*x + b on the image only, with
// a ~ U(0.9, 1.1) and b ~ U(-0.1, 0.1).
inline PatchSample augment(const PatchSample& sample, Rng& rng) {
    std::array<bool, 3> flip{};
    for (int i = 0; i < 3; ++i) flip[static_cast<size_t>(i)] = rng.bernoulli(0.5);
    std::array<double, 4> gain{}, shift{};
    for (int m = 0; m < 4; ++m) {
        gain[static_cast<size_t>(m)] = rng.uniform(0.9, 1.1);
        shift[static_cast<size_t>(m)] = rng.uniform(-0.1, 0.1);
    }

    const int64_t p = sample.image.shape()[1];
    PatchSample out;
    out.case_id = sample.case_id;
    out.bucket = sample.bucket;
    out.origin = sample.origin;
    out.image = Tensor(sample.image.shape());
    out.labels.assign(sample.labels.size(), 0);

    auto mapped = [&](int64_t d, int64_t h, int64_t w) {
        const int64_t sd = flip[0] ? p - 1 - d : d;
        const int64_t sh = flip[1] ? p - 1 - h : h;
        const int64_t sw = flip[2] ? p - 1 - w : w;
        return (sd * p + sh) * p + sw;
    };
    const int64_t N = p * p * p;
    for (int m = 0; m < 4; ++m) {
        const double* src = sample.image.data() + m * N;
        double* dst = out.image.data() + m * N;
        const double a = gain[static_cast<size_t>(m)], b = shift[static_cast<size_t>(m)];
        for (int64_t d = 0; d < p; ++d)
            for (int64_t h = 0; h < p; ++h)
                for (int64_t w = 0; w < p; ++w) {
                    dst[(d * p + h) * p + w] = a * src[mapped(d, h, w)] + b;
                }
    }
    for (int64_t d = 0; d < p; ++d)
        for (int64_t h = 0; h < p; ++h)
            for (int64_t w = 0; w < p; ++w) {
                out.labels[static_cast<size_t>((d * p + h) * p + w)] =
                    sample.labels[static_cast<size_t>(mapped(d, h, w))];
            }
    return out;
}

}  // namespace dalight::data
