#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dalight/core/rng.hpp"
#include "dalight/core/tensor.hpp"

namespace dalight::data {

// Voxel classes. Label volumes hold these as bytes.
enum : uint8_t { kBG = 0, kNCR = 1, kED = 2, kET = 3 };
inline constexpr int kNumClasses = 4;
inline constexpr const char* kClassNames[kNumClasses] = {"BG", "NCR", "ED", "ET"};

// Modality order is T1, T1ce, T2, FLAIR by convention.
inline constexpr int kNumModalities = 4;

// Deterministic proxy scanner bucket: 64-bit FNV-1a of the identifier bytes,
// reduced modulo the bucket count. Stable across runs and platforms.
inline int scanner_bucket(const std::string& case_id, int num_buckets) {
    if (num_buckets < 1) throw ConfigError("scanner_bucket: bucket count must be >= 1");
    return static_cast<int>(fnv1a64(case_id) % static_cast<uint64_t>(num_buckets));
}

// One multi-modal volume with voxel labels; the unit of the data pipeline.
struct CaseRecord {
    std::string case_id;
    Tensor image;                 // [4,D,H,W]
    std::vector<uint8_t> labels;  // D*H*W voxels, values in {0,1,2,3}
    int bucket = 0;

    int64_t depth() const { return image.shape()[1]; }
    int64_t height() const { return image.shape()[2]; }
    int64_t width() const { return image.shape()[3]; }
    int64_t voxels() const { return depth() * height() * width(); }
};

// Fixed-size crop of a case, already normalized, with its provenance.
struct PatchSample {
    Tensor image;                 // [4,p,p,p]
    std::vector<uint8_t> labels;  // p^3
    int bucket = 0;
    std::string case_id;
    std::array<int64_t, 3> origin{0, 0, 0};
};

}  // namespace dalight::data
