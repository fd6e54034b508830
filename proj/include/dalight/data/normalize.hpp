#pragma once

#include <cmath>
#include <cstdint>

#include "dalight/data/case_record.hpp"

namespace dalight::data {

// Per-modality z-score over strictly positive voxels: those become
// (x - mu) / (sigma + eps), everything at or below zero stays exactly 0.
// A channel with no positive voxels is returned all-zero.
inline Tensor zscore_normalize(const Tensor& image, double eps = 1e-6) {
    if (image.shape().rank() != 4) {
        throw ShapeError("zscore_normalize: expected [M,D,H,W], got " + image.shape().str());
    }
    const int64_t M = image.shape()[0];
    const int64_t N = image.size() / M;
    Tensor out(image.shape());
    for (int64_t m = 0; m < M; ++m) {
        const double* src = image.data() + m * N;
        double* dst = out.data() + m * N;
        double sum = 0.0;
        int64_t count = 0;
        for (int64_t v = 0; v < N; ++v) {
            if (src[v] > 0.0) {
                sum += src[v];
                ++count;
            }
        }
        if (count == 0) continue;  // all-zero channel stays all-zero
        const double mean = sum / static_cast<double>(count);
        double var = 0.0;
        for (int64_t v = 0; v < N; ++v) {
            if (src[v] > 0.0) {
                const double d = src[v] - mean;
                var += d * d;
            }
        }
        var /= static_cast<double>(count);
        const double inv = 1.0 / (std::sqrt(var) + eps);
        for (int64_t v = 0; v < N; ++v) {
            dst[v] = src[v] > 0.0 ? (src[v] - mean) * inv : 0.0;
        }
    }
    return out;
}

inline CaseRecord normalized(const CaseRecord& rec, double eps = 1e-6) {
    CaseRecord out = rec;
    out.image = zscore_normalize(rec.image, eps);
    return out;
}

}  // namespace dalight::data
