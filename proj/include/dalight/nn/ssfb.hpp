#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dalight/nn/basic_layers.hpp"
#include "dalight/nn/layer.hpp"

namespace dalight::nn {

// Skip and Spatial Feature Blend. Two pathways over spatially aligned decoder
// and encoder maps:
//   attention: rank-r projections of both maps, keys softmax-normalized over
//     positions, an r x r context matrix, output projected back to C_enc
//     channels (linear in N = D*H*W, quadratic only in r);
//   gating: per-channel sigmoid gate from pooled decoder+encoder features.
// A learnable scalar (stored as a logit) blends the two, and a 3x3x3 fusing
// convolution over [f_dec; m] produces the C_enc-channel output. The attention
// output projection and the gate MLP output layer start at zero.
class SSFB : public Layer {
public:
    SSFB(const InitCtx& ctx, int64_t c_dec, int64_t c_enc, int64_t rank)
        : path_(ctx.path),
          c_dec_(c_dec),
          c_enc_(c_enc),
          rank_(rank),
          hidden_(std::max<int64_t>(8, (c_dec + c_enc) / 4)),
          q_proj_(ctx.child("q_proj"), c_dec, rank),
          k_proj_(ctx.child("k_proj"), c_enc, rank),
          v_proj_(ctx.child("v_proj"), c_enc, rank),
          out_proj_(ctx.child("out_proj"), rank, c_enc, /*zero_init=*/true),
          gate_fc1_(ctx.child("gate_fc1"), c_dec + c_enc, hidden_),
          gate_fc2_(ctx.child("gate_fc2"), hidden_, c_enc, /*zero_init=*/true),
          alpha_logit_(Shape{1}),
          fuse_(ctx.child("fuse"), c_dec + c_enc, c_enc, 3, 1, 1),
          gn_(ctx.child("gn"), c_enc) {}

    Tensor forward(const Tensor& f_dec, const Tensor& f_enc, const FwdCtx& ctx) const {
        if (f_dec.shape().rank() != 5 || f_enc.shape().rank() != 5 ||
            f_dec.shape()[0] != f_enc.shape()[0] || f_dec.shape()[2] != f_enc.shape()[2] ||
            f_dec.shape()[3] != f_enc.shape()[3] || f_dec.shape()[4] != f_enc.shape()[4]) {
            throw ShapeError("SSFB: decoder " + f_dec.shape().str() + " and encoder " +
                             f_enc.shape().str() + " must be spatially aligned");
        }
        Tape* tape = ctx.tape;
        const int64_t B = f_dec.shape()[0];
        const int64_t D = f_dec.shape()[2], H = f_dec.shape()[3], W = f_dec.shape()[4];
        const int64_t N = D * H * W;

        // attention pathway
        Tensor q = ops::reshape(q_proj_.forward(f_dec, tape), Shape{B, rank_, N}, tape);
        Tensor k = ops::reshape(k_proj_.forward(f_enc, tape), Shape{B, rank_, N}, tape);
        Tensor v = ops::reshape(v_proj_.forward(f_enc, tape), Shape{B, rank_, N}, tape);
        Tensor k_norm = ops::softmax_lastdim(k, tape);            // per rank row over positions
        Tensor context = ops::bmm(v, k_norm, false, true, tape);  // [B,r,r]
        Tensor attended = ops::bmm(context, q, false, false, tape);
        Tensor o_attn = out_proj_.forward(
            ops::reshape(attended, Shape{B, rank_, D, H, W}, tape), tape);

        // channel-gating pathway
        Tensor pooled = ops::concat_channels(ops::pool(f_dec, ops::PoolMode::global_mean, tape),
                                             ops::pool(f_enc, ops::PoolMode::global_mean, tape),
                                             tape);
        Tensor gate = ops::sigmoid(
            gate_fc2_.forward(ops::gelu(gate_fc1_.forward(pooled, tape), tape), tape), tape);
        Tensor o_gate = ops::mul(f_enc, gate, tape);

        Tensor blended = ops::blend(o_attn, o_gate, alpha_logit_, tape);

        attn_flops_ += static_cast<uint64_t>(B) *
                       static_cast<uint64_t>(2 * rank_ * c_dec_ * N + 4 * rank_ * c_enc_ * N +
                                             4 * rank_ * N + 4 * rank_ * rank_ * N +
                                             2 * c_enc_ * rank_ * N);

        Tensor fused = fuse_.forward(ops::concat_channels(f_dec, blended, tape), tape);
        return ops::gelu(gn_.forward(fused, tape), tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        q_proj_.collect_params(out);
        k_proj_.collect_params(out);
        v_proj_.collect_params(out);
        out_proj_.collect_params(out);
        gate_fc1_.collect_params(out);
        gate_fc2_.collect_params(out);
        out.push_back({path_ + "/alpha_logit", alpha_logit_, true});
        fuse_.collect_params(out);
        gn_.collect_params(out);
    }

    // Recomputes the blended map m (before the fusing convolution) for
    // inspection.
    Tensor blend_pathway(const Tensor& f_dec, const Tensor& f_enc) const {
        const int64_t B = f_dec.shape()[0];
        const int64_t D = f_dec.shape()[2], H = f_dec.shape()[3], W = f_dec.shape()[4];
        const int64_t N = D * H * W;
        Tensor q = ops::reshape(q_proj_.forward(f_dec, nullptr), Shape{B, rank_, N});
        Tensor k = ops::reshape(k_proj_.forward(f_enc, nullptr), Shape{B, rank_, N});
        Tensor v = ops::reshape(v_proj_.forward(f_enc, nullptr), Shape{B, rank_, N});
        Tensor context = ops::bmm(v, ops::softmax_lastdim(k), false, true);
        Tensor o_attn = out_proj_.forward(
            ops::reshape(ops::bmm(context, q, false, false), Shape{B, rank_, D, H, W}), nullptr);
        Tensor pooled = ops::concat_channels(ops::pool(f_dec, ops::PoolMode::global_mean),
                                             ops::pool(f_enc, ops::PoolMode::global_mean));
        Tensor gate = ops::sigmoid(
            gate_fc2_.forward(ops::gelu(gate_fc1_.forward(pooled, nullptr)), nullptr));
        return ops::blend(o_attn, ops::mul(f_enc, gate), alpha_logit_);
    }

    double alpha() const { return ops::detail::sigmoid_scalar(alpha_logit_[0]); }
    int64_t rank() const { return rank_; }
    uint64_t attention_flops() const { return attn_flops_; }
    void reset_flops() const { attn_flops_ = 0; }
    PointwiseConvLayer& out_proj() { return out_proj_; }
    LinearLayer& gate_fc2() { return gate_fc2_; }
    Tensor& alpha_logit() { return alpha_logit_; }

private:
    std::string path_;
    int64_t c_dec_, c_enc_, rank_, hidden_;
    PointwiseConvLayer q_proj_, k_proj_, v_proj_, out_proj_;
    LinearLayer gate_fc1_, gate_fc2_;
    Tensor alpha_logit_;
    Conv3dLayer fuse_;
    GroupNormLayer gn_;
    mutable uint64_t attn_flops_ = 0;
};

}  // namespace dalight::nn
