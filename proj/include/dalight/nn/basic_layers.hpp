#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dalight/nn/layer.hpp"

namespace dalight::nn {

// Dense 3D convolution layer. Depthwise kernels carry no bias; dense and
// pointwise ones do.
class Conv3dLayer : public Layer {
public:
    Conv3dLayer(const InitCtx& ctx, int64_t c_in, int64_t c_out, int k, int stride, int padding)
        : path_(ctx.path),
          stride_(stride),
          padding_(padding),
          w_(init::he_normal(ctx, "w", Shape{c_out, c_in, k, k, k}, c_in * k * k * k)),
          b_(Shape{c_out}) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        return ops::conv3d(x, w_, &b_, stride_, padding_, tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        out.push_back({path_ + "/w", w_, true});
        out.push_back({path_ + "/b", b_, true});
    }

    Tensor& weight() { return w_; }
    Tensor& bias() { return b_; }
    const Tensor& weight() const { return w_; }

private:
    std::string path_;
    int stride_, padding_;
    Tensor w_, b_;
};

class PointwiseConvLayer : public Layer {
public:
    PointwiseConvLayer(const InitCtx& ctx, int64_t c_in, int64_t c_out, bool zero_init = false)
        : path_(ctx.path), b_(Shape{c_out}) {
        w_ = zero_init ? Tensor(Shape{c_out, c_in})
                       : init::he_normal(ctx, "w", Shape{c_out, c_in}, c_in);
    }

    Tensor forward(const Tensor& x, Tape* tape) const {
        return ops::pointwise_conv3d(x, w_, &b_, tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        out.push_back({path_ + "/w", w_, true});
        out.push_back({path_ + "/b", b_, true});
    }

    Tensor& weight() { return w_; }
    Tensor& bias() { return b_; }

private:
    std::string path_;
    Tensor w_, b_;
};

// Kernel 2, stride 2: doubles every spatial extent.
class TransposedConvLayer : public Layer {
public:
    TransposedConvLayer(const InitCtx& ctx, int64_t c_in, int64_t c_out)
        : path_(ctx.path),
          w_(init::he_normal(ctx, "w", Shape{c_in, c_out, 2, 2, 2}, c_in)),
          b_(Shape{c_out}) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        return ops::transposed_conv3d(x, w_, &b_, tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        out.push_back({path_ + "/w", w_, true});
        out.push_back({path_ + "/b", b_, true});
    }

private:
    std::string path_;
    Tensor w_, b_;
};

class GroupNormLayer : public Layer {
public:
    GroupNormLayer(const InitCtx& ctx, int64_t channels, int groups, double eps = 1e-5)
        : path_(ctx.path),
          groups_(groups),
          eps_(eps),
          gamma_(Tensor::full(Shape{channels}, 1.0)),
          beta_(Shape{channels}) {}

    GroupNormLayer(const InitCtx& ctx, int64_t channels)
        : GroupNormLayer(ctx, channels, default_groups(channels)) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        return ops::group_norm(x, groups_, gamma_, beta_, eps_, tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        out.push_back({path_ + "/gamma", gamma_, true});
        out.push_back({path_ + "/beta", beta_, true});
    }

    int groups() const { return groups_; }

private:
    std::string path_;
    int groups_;
    double eps_;
    Tensor gamma_, beta_;
};

class LinearLayer : public Layer {
public:
    LinearLayer(const InitCtx& ctx, int64_t c_in, int64_t c_out, bool zero_init = false)
        : path_(ctx.path), b_(Shape{c_out}) {
        w_ = zero_init ? Tensor(Shape{c_out, c_in})
                       : init::he_normal(ctx, "w", Shape{c_out, c_in}, c_in);
    }

    Tensor forward(const Tensor& x, Tape* tape) const { return ops::linear(x, w_, &b_, tape); }

    void collect_params(std::vector<ParamEntry>& out) const override {
        out.push_back({path_ + "/w", w_, true});
        out.push_back({path_ + "/b", b_, true});
    }

    Tensor& weight() { return w_; }
    Tensor& bias() { return b_; }

private:
    std::string path_;
    Tensor w_, b_;
};

}  // namespace dalight::nn
