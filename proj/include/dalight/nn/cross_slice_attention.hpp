#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dalight/nn/layer.hpp"

namespace dalight::nn {

// Cross-slice attention: pool over the in-plane axes, attend along the slice
// axis with rank-d projections, and add the broadcast correction back onto the
// input. The output projection starts at zero, so a freshly built module is
// the identity map. Cost of the attention products is quadratic in the slice
// count only; the module counts those operations as it executes them.
class CrossSliceAttention : public Layer {
public:
    CrossSliceAttention(const InitCtx& ctx, int64_t channels, int64_t rank)
        : path_(ctx.path),
          rank_(rank),
          wq_(init::he_normal(ctx, "wq", Shape{rank, channels}, channels)),
          wk_(init::he_normal(ctx, "wk", Shape{rank, channels}, channels)),
          wv_(init::he_normal(ctx, "wv", Shape{rank, channels}, channels)),
          wo_(Shape{channels, rank}) {}

    Tensor forward(const Tensor& x, Tape* tape) const {
        const int64_t B = x.shape()[0], D = x.shape()[2];
        Tensor pooled = ops::pool(x, ops::PoolMode::mean_over_hw, tape);  // [B,C,D]
        Tensor q = ops::channel_project(pooled, wq_, tape);               // [B,d,D]
        Tensor k = ops::channel_project(pooled, wk_, tape);
        Tensor v = ops::channel_project(pooled, wv_, tape);
        Tensor scores = ops::scale(ops::bmm(q, k, true, false, tape),
                                   1.0 / std::sqrt(static_cast<double>(rank_)), tape);
        Tensor attn = ops::softmax_lastdim(scores, tape);       // [B,D,D], rows sum to 1
        Tensor mixed = ops::bmm(v, attn, false, false, tape);   // [B,d,D]
        Tensor correction = ops::channel_project(mixed, wo_, tape);
        // attention products: Q^T K, the scale, softmax passes, V A
        attn_flops_ += static_cast<uint64_t>(B) *
                       static_cast<uint64_t>(2 * rank_ * D * D + D * D + 4 * D * D +
                                             2 * rank_ * D * D);
        return ops::add(x, correction, tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        out.push_back({path_ + "/wq", wq_, true});
        out.push_back({path_ + "/wk", wk_, true});
        out.push_back({path_ + "/wv", wv_, true});
        out.push_back({path_ + "/wo", wo_, true});
    }

    // Recomputes the [B,D,D] slice-attention matrix for inspection.
    Tensor attention_matrix(const Tensor& x) const {
        Tensor pooled = ops::pool(x, ops::PoolMode::mean_over_hw);
        Tensor q = ops::channel_project(pooled, wq_);
        Tensor k = ops::channel_project(pooled, wk_);
        return ops::softmax_lastdim(ops::scale(ops::bmm(q, k, true, false),
                                               1.0 / std::sqrt(static_cast<double>(rank_))));
    }

    int64_t rank() const { return rank_; }
    uint64_t attention_flops() const { return attn_flops_; }
    void reset_flops() const { attn_flops_ = 0; }
    Tensor& output_projection() { return wo_; }

private:
    std::string path_;
    int64_t rank_;
    Tensor wq_, wk_, wv_, wo_;
    mutable uint64_t attn_flops_ = 0;
};

}  // namespace dalight::nn
