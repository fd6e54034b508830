#pragma once

#include <string>
#include <vector>

#include "dalight/nn/basic_layers.hpp"
#include "dalight/nn/layer.hpp"

namespace dalight::nn {

// Depthwise 3x3x3 spatial filter (no bias) followed by 1x1x1 channel mixing
// (with bias). Learnable count: c_in*27 + c_in*c_out + c_out.
class SepConv : public Layer {
public:
    SepConv(const InitCtx& ctx, int64_t c_in, int64_t c_out)
        : path_(ctx.path),
          dw_(init::he_normal(ctx, "dw", Shape{c_in, 3, 3, 3}, 27)),
          pw_(ctx.child("pw"), c_in, c_out) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        return pw_.forward(ops::depthwise_conv3d(x, dw_, 1, 1, tape), tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        out.push_back({path_ + "/dw", dw_, true});
        pw_.collect_params(out);
    }

    Tensor& depthwise_weight() { return dw_; }
    PointwiseConvLayer& pointwise() { return pw_; }

    static int64_t expected_param_count(int64_t c_in, int64_t c_out) {
        return c_in * 27 + c_in * c_out + c_out;
    }

    static int64_t dense_equivalent_param_count(int64_t c_in, int64_t c_out) {
        return c_in * c_out * 27 + c_out;
    }

private:
    std::string path_;
    Tensor dw_;
    PointwiseConvLayer pw_;
};

}  // namespace dalight::nn
