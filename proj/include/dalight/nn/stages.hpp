#pragma once

#include <string>
#include <vector>

#include "dalight/nn/basic_layers.hpp"
#include "dalight/nn/layer.hpp"

namespace dalight::nn {

// Maps the input modalities to the base width: GELU(GN(Conv3x3x3(x))).
class InitProjection : public Layer {
public:
    InitProjection(const InitCtx& ctx, int64_t modalities, int64_t c_out)
        : conv_(ctx.child("conv"), modalities, c_out, 3, 1, 1), gn_(ctx.child("gn"), c_out) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        return ops::gelu(gn_.forward(conv_.forward(x, tape), tape), tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        conv_.collect_params(out);
        gn_.collect_params(out);
    }

private:
    Conv3dLayer conv_;
    GroupNormLayer gn_;
};

// Strided 3x3x3 dense convolution; every spatial extent halves exactly.
class Downsample : public Layer {
public:
    Downsample(const InitCtx& ctx, int64_t c_in, int64_t c_out)
        : conv_(ctx.child("conv"), c_in, c_out, 3, 2, 1) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        for (int axis = 2; axis < 5; ++axis) {
            if (x.shape()[axis] % 2 != 0) {
                throw ShapeError("Downsample: odd spatial extent in " + x.shape().str());
            }
        }
        return conv_.forward(x, tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        conv_.collect_params(out);
    }

private:
    Conv3dLayer conv_;
};

// Concatenate decoder and encoder maps, mix down to the skip width with a
// 1x1x1 convolution, normalize, GELU.
class SimpleFusion : public Layer {
public:
    SimpleFusion(const InitCtx& ctx, int64_t c_dec, int64_t c_enc)
        : mix_(ctx.child("mix"), c_dec + c_enc, c_enc), gn_(ctx.child("gn"), c_enc) {}

    Tensor forward(const Tensor& f_dec, const Tensor& f_enc, Tape* tape) const {
        Tensor mixed = mix_.forward(ops::concat_channels(f_dec, f_enc, tape), tape);
        return ops::gelu(gn_.forward(mixed, tape), tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        mix_.collect_params(out);
        gn_.collect_params(out);
    }

private:
    PointwiseConvLayer mix_;
    GroupNormLayer gn_;
};

// Conv3x3x3 (C->C) -> GN -> GELU -> pointwise C->K; logits carry no activation.
class SegmentationHead : public Layer {
public:
    SegmentationHead(const InitCtx& ctx, int64_t channels, int64_t num_classes)
        : conv_(ctx.child("conv"), channels, channels, 3, 1, 1),
          gn_(ctx.child("gn"), channels),
          out_(ctx.child("out"), channels, num_classes) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        return out_.forward(ops::gelu(gn_.forward(conv_.forward(x, tape), tape), tape), tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        conv_.collect_params(out);
        gn_.collect_params(out);
        out_.collect_params(out);
    }

    PointwiseConvLayer& logits_layer() { return out_; }

private:
    Conv3dLayer conv_;
    GroupNormLayer gn_;
    PointwiseConvLayer out_;
};

}  // namespace dalight::nn
