#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dalight/nn/basic_layers.hpp"
#include "dalight/nn/layer.hpp"

namespace dalight::nn {

// Group normalization whose affine scale/shift are looked up from per-bucket
// embedding tables (gamma rows start at 1, beta rows at 0). Without a bucket
// id the learned default affine pair applies. At initialization every bucket
// is extensionally identical to plain GroupNorm.
class ScannerAwareNorm : public Layer {
public:
    ScannerAwareNorm(const InitCtx& ctx, int64_t channels, int num_buckets, int groups,
                     double eps = 1e-5)
        : path_(ctx.path),
          groups_(groups),
          eps_(eps),
          num_buckets_(num_buckets),
          e_gamma_(Tensor::full(Shape{num_buckets, channels}, 1.0)),
          e_beta_(Shape{num_buckets, channels}),
          default_gamma_(Tensor::full(Shape{channels}, 1.0)),
          default_beta_(Shape{channels}) {}

    Tensor forward(const Tensor& x, const FwdCtx& ctx) const {
        Tensor normalized = ops::group_norm_base(x, groups_, eps_, ctx.tape);
        if (ctx.bucket) {
            Tensor gamma = ops::row_select(e_gamma_, *ctx.bucket, ctx.tape);
            Tensor beta = ops::row_select(e_beta_, *ctx.bucket, ctx.tape);
            return ops::channel_affine(normalized, gamma, beta, ctx.tape);
        }
        return ops::channel_affine(normalized, default_gamma_, default_beta_, ctx.tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        out.push_back({path_ + "/e_gamma", e_gamma_, true});
        out.push_back({path_ + "/e_beta", e_beta_, true});
        out.push_back({path_ + "/default_gamma", default_gamma_, true});
        out.push_back({path_ + "/default_beta", default_beta_, true});
    }

    int num_buckets() const { return num_buckets_; }
    Tensor& gamma_table() { return e_gamma_; }
    Tensor& beta_table() { return e_beta_; }

private:
    std::string path_;
    int groups_;
    double eps_;
    int num_buckets_;
    Tensor e_gamma_, e_beta_, default_gamma_, default_beta_;
};

enum class NormKind { group, scanner_aware };

// Either ScannerAwareNorm or plain GroupNorm behind one forward signature;
// the latter is what the normalization ablation swaps in.
class NormModule : public Layer {
public:
    NormModule(const InitCtx& ctx, NormKind kind, int64_t channels, int num_buckets, int groups,
               double eps = 1e-5)
        : kind_(kind) {
        if (kind_ == NormKind::scanner_aware) {
            san_.emplace(ctx, channels, num_buckets, groups, eps);
        } else {
            gn_.emplace(ctx, channels, groups, eps);
        }
    }

    Tensor forward(const Tensor& x, const FwdCtx& ctx) const {
        return kind_ == NormKind::scanner_aware ? san_->forward(x, ctx)
                                                : gn_->forward(x, ctx.tape);
    }

    void collect_params(std::vector<ParamEntry>& out) const override {
        if (kind_ == NormKind::scanner_aware) {
            san_->collect_params(out);
        } else {
            gn_->collect_params(out);
        }
    }

    NormKind kind() const { return kind_; }

private:
    NormKind kind_;
    std::optional<ScannerAwareNorm> san_;
    std::optional<GroupNormLayer> gn_;
};

}  // namespace dalight::nn
