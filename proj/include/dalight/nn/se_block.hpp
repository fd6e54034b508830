#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "dalight/nn/basic_layers.hpp"
#include "dalight/nn/layer.hpp"

namespace dalight::nn {

// Squeeze-and-excitation channel recalibration: global average pool, a
// C -> C/r -> C bottleneck with GELU between and sigmoid after, then a
// per-channel gate on the input.
class SEBlock : public Layer {
public:
    SEBlock(const InitCtx& ctx, int64_t channels, int reduction = 4)
        : hidden_(std::max<int64_t>(1, channels / reduction)),
          fc1_(ctx.child("fc1"), channels, hidden_),
          fc2_(ctx.child("fc2"), hidden_, channels) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        Tensor squeezed = ops::pool(x, ops::PoolMode::global_mean, tape);
        Tensor gate = ops::sigmoid(
            fc2_.forward(ops::gelu(fc1_.forward(squeezed, tape), tape), tape), tape);
        return ops::mul(x, gate, tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        fc1_.collect_params(out);
        fc2_.collect_params(out);
    }

    int64_t hidden_width() const { return hidden_; }
    LinearLayer& fc2() { return fc2_; }

private:
    int64_t hidden_;
    LinearLayer fc1_, fc2_;
};

}  // namespace dalight::nn
