#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dalight/nn/basic_layers.hpp"
#include "dalight/nn/cross_slice_attention.hpp"
#include "dalight/nn/layer.hpp"
#include "dalight/nn/scanner_norm.hpp"
#include "dalight/nn/se_block.hpp"
#include "dalight/nn/sep_conv.hpp"

namespace dalight::nn {

enum class ConvKind { dense, separable };

struct BlockConfig {
    int64_t c_in = 0;
    int64_t c_out = 0;
    ConvKind conv_kind = ConvKind::dense;
    NormKind norm_kind = NormKind::scanner_aware;
    bool use_csa = false;
    int se_reduction = 4;
    int64_t csa_rank = 0;  // 0: max(8, c_out/4)
    int groups = 0;        // 0: default rule
    int num_buckets = 8;
    double eps = 1e-5;
};

// Residual unit: conv -> norm -> GELU -> conv -> norm -> SE, optional
// cross-slice refinement, then GELU(z + Proj(h)) where Proj is the identity
// when channel counts match and a 1x1x1 projection otherwise.
class LightweightBlock : public Layer {
public:
    LightweightBlock(const InitCtx& ctx, BlockConfig cfg) : cfg_(cfg) {
        const int groups = cfg.groups > 0 ? cfg.groups : default_groups(cfg.c_out);
        const int64_t rank = cfg.csa_rank > 0 ? cfg.csa_rank : csa_default_rank(cfg.c_out);
        if (cfg.conv_kind == ConvKind::separable) {
            sep1_.emplace(ctx.child("conv1"), cfg.c_in, cfg.c_out);
            sep2_.emplace(ctx.child("conv2"), cfg.c_out, cfg.c_out);
        } else {
            dense1_.emplace(ctx.child("conv1"), cfg.c_in, cfg.c_out, 3, 1, 1);
            dense2_.emplace(ctx.child("conv2"), cfg.c_out, cfg.c_out, 3, 1, 1);
        }
        norm1_.emplace(ctx.child("norm1"), cfg.norm_kind, cfg.c_out, cfg.num_buckets, groups,
                       cfg.eps);
        norm2_.emplace(ctx.child("norm2"), cfg.norm_kind, cfg.c_out, cfg.num_buckets, groups,
                       cfg.eps);
        se_.emplace(ctx.child("se"), cfg.c_out, cfg.se_reduction);
        if (cfg.use_csa) csa_.emplace(ctx.child("csa"), cfg.c_out, rank);
        if (cfg.c_in != cfg.c_out) proj_.emplace(ctx.child("proj"), cfg.c_in, cfg.c_out);
    }

    Tensor forward(const Tensor& h, const FwdCtx& ctx) const {
        Tape* tape = ctx.tape;
        Tensor a = conv1(h, tape);
        a = norm1_->forward(a, ctx);
        a = ops::gelu(a, tape);
        a = conv2(a, tape);
        a = norm2_->forward(a, ctx);
        Tensor z = se_->forward(a, tape);
        if (csa_) z = csa_->forward(z, tape);  // residual form: z + broadcast correction
        Tensor residual = proj_ ? proj_->forward(h, tape) : h;
        return ops::gelu(ops::add(z, residual, tape), tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        if (sep1_) {
            sep1_->collect_params(out);
        } else {
            dense1_->collect_params(out);
        }
        norm1_->collect_params(out);
        if (sep2_) {
            sep2_->collect_params(out);
        } else {
            dense2_->collect_params(out);
        }
        norm2_->collect_params(out);
        se_->collect_params(out);
        if (csa_) csa_->collect_params(out);
        if (proj_) proj_->collect_params(out);
    }

    const BlockConfig& config() const { return cfg_; }
    bool has_csa() const { return csa_.has_value(); }
    CrossSliceAttention* csa() { return csa_ ? &*csa_ : nullptr; }
    const CrossSliceAttention* csa() const { return csa_ ? &*csa_ : nullptr; }
    SEBlock& se() { return *se_; }
    PointwiseConvLayer* projection() { return proj_ ? &*proj_ : nullptr; }

private:
    Tensor conv1(const Tensor& x, Tape* tape) const {
        return sep1_ ? sep1_->forward(x, tape) : dense1_->forward(x, tape);
    }
    Tensor conv2(const Tensor& x, Tape* tape) const {
        return sep2_ ? sep2_->forward(x, tape) : dense2_->forward(x, tape);
    }

    BlockConfig cfg_;
    std::optional<SepConv> sep1_, sep2_;
    std::optional<Conv3dLayer> dense1_, dense2_;
    std::optional<NormModule> norm1_, norm2_;
    std::optional<SEBlock> se_;
    std::optional<CrossSliceAttention> csa_;
    std::optional<PointwiseConvLayer> proj_;
};

}  // namespace dalight::nn
