#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dalight/model/config.hpp"
#include "dalight/nn/lightweight_block.hpp"
#include "dalight/nn/ssfb.hpp"
#include "dalight/nn/stages.hpp"

namespace dalight {

// Stage-name/shape pairs recorded during a traced forward pass.
using StageTrace = std::vector<std::pair<std::string, Shape>>;

namespace detail {

// Skip fusion slot: SSFB where the architecture calls for it, simple
// concatenate-project fusion otherwise.
class FusionModule : public nn::Layer {
public:
    FusionModule(const nn::InitCtx& ctx, bool use_ssfb, int64_t c_dec, int64_t c_enc,
                 int64_t rank) {
        if (use_ssfb) {
            ssfb_.emplace(ctx, c_dec, c_enc, rank);
        } else {
            simple_.emplace(ctx, c_dec, c_enc);
        }
    }

    Tensor forward(const Tensor& f_dec, const Tensor& f_enc, const nn::FwdCtx& ctx) const {
        return ssfb_ ? ssfb_->forward(f_dec, f_enc, ctx)
                     : simple_->forward(f_dec, f_enc, ctx.tape);
    }

    void collect_params(std::vector<nn::ParamEntry>& out) const override {
        if (ssfb_) {
            ssfb_->collect_params(out);
        } else {
            simple_->collect_params(out);
        }
    }

    bool is_ssfb() const { return ssfb_.has_value(); }
    nn::SSFB* ssfb() { return ssfb_ ? &*ssfb_ : nullptr; }

private:
    std::optional<nn::SSFB> ssfb_;
    std::optional<nn::SimpleFusion> simple_;
};

}  // namespace detail

// DALight-3D: four-stage encoder/decoder over [B,M,D,H,W] volumes.
// Encoder widths follow the channel plan; E0 convolves densely, E1-E3
// separably; cross-slice attention sits in E2 and E3 only. The decoder
// upsamples with transposed convolutions; the first (deepest) skip uses simple
// fusion and the two shallower skips use SSFB. Ablation flags swap these
// choices one at a time.
class DALightModel : public nn::Layer {
public:
    explicit DALightModel(const ModelConfig& cfg, uint64_t seed = 0) : cfg_(cfg) {
        cfg.validate();
        const auto plan = channel_plan(cfg.base_width, cfg.channel_cap, cfg.bottleneck_width);
        const bool sep = cfg.ablation != Ablation::no_sepconv;
        const nn::NormKind norm = cfg.ablation == Ablation::no_scanner_norm
                                      ? nn::NormKind::group
                                      : nn::NormKind::scanner_aware;
        const bool csa = cfg.ablation != Ablation::no_csa;
        const bool ssfb = cfg.ablation != Ablation::no_ssfb;
        const nn::InitCtx root{seed, ""};

        auto block_cfg = [&](int64_t c_in, int64_t c_out, bool separable, bool use_csa) {
            nn::BlockConfig bc;
            bc.c_in = c_in;
            bc.c_out = c_out;
            bc.conv_kind = (separable && sep) ? nn::ConvKind::separable : nn::ConvKind::dense;
            bc.norm_kind = norm;
            bc.use_csa = use_csa && csa;
            bc.num_buckets = cfg.num_buckets;
            return bc;
        };

        init_.emplace(root.child("init"), cfg.num_modalities, plan[0]);
        enc0_.emplace(root.child("enc0"), block_cfg(plan[0], plan[0], false, false));
        down1_.emplace(root.child("down1"), plan[0], plan[1]);
        enc1_.emplace(root.child("enc1"), block_cfg(plan[1], plan[1], true, false));
        down2_.emplace(root.child("down2"), plan[1], plan[2]);
        enc2_.emplace(root.child("enc2"), block_cfg(plan[2], plan[2], true, true));
        down3_.emplace(root.child("down3"), plan[2], plan[3]);
        enc3_.emplace(root.child("enc3"), block_cfg(plan[3], plan[3], true, true));

        up1_.emplace(root.child("up1"), plan[3], plan[2]);
        fuse1_.emplace(root.child("fuse1"), /*use_ssfb=*/false, plan[2], plan[2], cfg.ssfb_rank);
        dec1_.emplace(root.child("dec1"), block_cfg(plan[2], plan[2], true, false));
        up2_.emplace(root.child("up2"), plan[2], plan[1]);
        fuse2_.emplace(root.child("fuse2"), ssfb, plan[1], plan[1], cfg.ssfb_rank);
        dec2_.emplace(root.child("dec2"), block_cfg(plan[1], plan[1], true, false));
        up3_.emplace(root.child("up3"), plan[1], plan[0]);
        fuse3_.emplace(root.child("fuse3"), ssfb, plan[0], plan[0], cfg.ssfb_rank);
        dec3_.emplace(root.child("dec3"), block_cfg(plan[0], plan[0], false, false));
        head_.emplace(root.child("head"), plan[0], cfg.num_classes);
    }

    // Class-probability volume [B,K,D,H,W]; per-voxel channel sums are 1.
    Tensor forward(const Tensor& x, const nn::FwdCtx& ctx, StageTrace* trace = nullptr) const {
        return ops::softmax_channel(forward_logits(x, ctx, trace), ctx.tape);
    }

    Tensor forward_logits(const Tensor& x, const nn::FwdCtx& ctx,
                          StageTrace* trace = nullptr) const {
        validate_input(x, ctx);
        Tape* tape = ctx.tape;
        auto record = [&](const char* name, const Tensor& t) {
            if (trace) trace->emplace_back(name, t.shape());
            return t;
        };
        Tensor projected = record("init", init_->forward(x, tape));
        Tensor e0 = record("enc0", enc0_->forward(projected, ctx));
        Tensor e1 = record("enc1", enc1_->forward(down1_->forward(e0, tape), ctx));
        Tensor e2 = record("enc2", enc2_->forward(down2_->forward(e1, tape), ctx));
        Tensor e3 = record("enc3", enc3_->forward(down3_->forward(e2, tape), ctx));

        Tensor d1 = record(
            "dec1", dec1_->forward(fuse1_->forward(up1_->forward(e3, tape), e2, ctx), ctx));
        Tensor d2 = record(
            "dec2", dec2_->forward(fuse2_->forward(up2_->forward(d1, tape), e1, ctx), ctx));
        Tensor d3 = record(
            "dec3", dec3_->forward(fuse3_->forward(up3_->forward(d2, tape), e0, ctx), ctx));
        return record("head", head_->forward(d3, tape));
    }

    void collect_params(std::vector<nn::ParamEntry>& out) const override {
        init_->collect_params(out);
        enc0_->collect_params(out);
        down1_->collect_params(out);
        enc1_->collect_params(out);
        down2_->collect_params(out);
        enc2_->collect_params(out);
        down3_->collect_params(out);
        enc3_->collect_params(out);
        up1_->collect_params(out);
        fuse1_->collect_params(out);
        dec1_->collect_params(out);
        up2_->collect_params(out);
        fuse2_->collect_params(out);
        dec2_->collect_params(out);
        up3_->collect_params(out);
        fuse3_->collect_params(out);
        dec3_->collect_params(out);
        head_->collect_params(out);
    }

    const ModelConfig& config() const { return cfg_; }

    int csa_module_count() const {
        return (enc2_->has_csa() ? 1 : 0) + (enc3_->has_csa() ? 1 : 0);
    }

    int ssfb_module_count() const {
        return (fuse1_->is_ssfb() ? 1 : 0) + (fuse2_->is_ssfb() ? 1 : 0) +
               (fuse3_->is_ssfb() ? 1 : 0);
    }

    nn::LightweightBlock& enc2() { return *enc2_; }
    nn::LightweightBlock& enc3() { return *enc3_; }
    detail::FusionModule& fuse2() { return *fuse2_; }
    detail::FusionModule& fuse3() { return *fuse3_; }
    nn::SegmentationHead& head() { return *head_; }

private:
    void validate_input(const Tensor& x, const nn::FwdCtx& ctx) const {
        if (!x.defined() || x.shape().rank() != 5 || x.shape()[1] != cfg_.num_modalities) {
            throw ShapeError("DALightModel: expected [B," + std::to_string(cfg_.num_modalities) +
                             ",D,H,W] input" + (x.defined() ? ", got " + x.shape().str() : ""));
        }
        for (int axis = 2; axis < 5; ++axis) {
            if (x.shape()[axis] % 8 != 0) {
                throw ShapeError("DALightModel: spatial extents must be divisible by 8, got " +
                                 x.shape().str());
            }
        }
        if (ctx.bucket && (*ctx.bucket < 0 || *ctx.bucket >= cfg_.num_buckets)) {
            throw ConfigError("DALightModel: bucket " + std::to_string(*ctx.bucket) +
                              " out of range [0," + std::to_string(cfg_.num_buckets) + ")");
        }
    }

    ModelConfig cfg_;
    std::optional<nn::InitProjection> init_;
    std::optional<nn::LightweightBlock> enc0_;
    std::optional<nn::Downsample> down1_;
    std::optional<nn::LightweightBlock> enc1_;
    std::optional<nn::Downsample> down2_;
    std::optional<nn::LightweightBlock> enc2_;
    std::optional<nn::Downsample> down3_;
    std::optional<nn::LightweightBlock> enc3_;
    std::optional<nn::TransposedConvLayer> up1_;
    std::optional<detail::FusionModule> fuse1_;
    std::optional<nn::LightweightBlock> dec1_;
    std::optional<nn::TransposedConvLayer> up2_;
    std::optional<detail::FusionModule> fuse2_;
    std::optional<nn::LightweightBlock> dec2_;
    std::optional<nn::TransposedConvLayer> up3_;
    std::optional<detail::FusionModule> fuse3_;
    std::optional<nn::LightweightBlock> dec3_;
    std::optional<nn::SegmentationHead> head_;
};

struct ParamReport {
    int64_t total = 0;
    std::vector<std::pair<std::string, int64_t>> per_stage;  // in collection order
};

// Exact learnable-element totals via parameter introspection, broken down by
// the leading path segment (stage name).
inline ParamReport count_params(const DALightModel& model) {
    ParamReport report;
    std::vector<std::pair<std::string, int64_t>>& stages = report.per_stage;
    for (const auto& entry : nn::collect(model)) {
        if (!entry.learnable) continue;
        const auto slash = entry.name.find('/');
        const std::string stage = entry.name.substr(0, slash);
        report.total += entry.tensor.size();
        if (!stages.empty() && stages.back().first == stage) {
            stages.back().second += entry.tensor.size();
        } else {
            stages.emplace_back(stage, entry.tensor.size());
        }
    }
    return report;
}

}  // namespace dalight
