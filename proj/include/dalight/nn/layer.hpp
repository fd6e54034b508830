#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dalight/core/ops.hpp"
#include "dalight/core/rng.hpp"
#include "dalight/core/tensor.hpp"

namespace dalight::nn {

// Per-call forward context: a tape when gradients are wanted, and the optional
// scanner bucket id that conditions ScannerAwareNorm.
struct FwdCtx {
    Tape* tape = nullptr;
    std::optional<int> bucket;
};

struct ParamEntry {
    std::string name;
    Tensor tensor;
    bool learnable = true;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual void collect_params(std::vector<ParamEntry>& out) const = 0;

    int64_t param_count() const {
        std::vector<ParamEntry> entries;
        collect_params(entries);
        int64_t n = 0;
        for (const auto& e : entries) {
            if (e.learnable) n += e.tensor.size();
        }
        return n;
    }
};

inline std::vector<ParamEntry> collect(const Layer& layer) {
    std::vector<ParamEntry> out;
    layer.collect_params(out);
    return out;
}

// Construction context. Weights are seeded from (seed, absolute path), so two
// models built from the same seed share identical values for every layer with
// the same path regardless of which other layers exist around them.
struct InitCtx {
    uint64_t seed = 0;
    std::string path;

    InitCtx child(std::string_view name) const {
        return {seed, path.empty() ? std::string(name) : path + "/" + std::string(name)};
    }
};

namespace init {

// Zero-mean normal with sd = sqrt(2 / fan_in).
inline Tensor he_normal(const InitCtx& ctx, std::string_view name, Shape shape, int64_t fan_in) {
    Rng rng(derive_seed(ctx.seed, ctx.path + "/" + std::string(name)));
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, sd);
    return t;
}

}  // namespace init

// 8 when 8 divides C, else the largest divisor of C not exceeding 8.
inline int default_groups(int64_t channels) {
    for (int g = 8; g > 1; --g) {
        if (channels % g == 0) return g;
    }
    return 1;
}

inline int64_t csa_default_rank(int64_t channels) { return std::max<int64_t>(8, channels / 4); }

}  // namespace dalight::nn
