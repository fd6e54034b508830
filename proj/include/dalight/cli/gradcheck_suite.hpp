#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dalight/core/gradcheck.hpp"
#include "dalight/nn/cross_slice_attention.hpp"
#include "dalight/nn/lightweight_block.hpp"
#include "dalight/nn/scanner_norm.hpp"
#include "dalight/nn/se_block.hpp"
#include "dalight/nn/sep_conv.hpp"
#include "dalight/nn/ssfb.hpp"
#include "dalight/nn/stages.hpp"
#include "dalight/train/loss.hpp"

namespace dalight::cli {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    bool pass = false;
};

inline constexpr double kGradTolerance = 1e-4;

namespace detail {

inline Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// weighted mean keeps closure magnitudes small so finite-difference noise
// stays far below the relative-error floor
inline Tensor scalarize(const Tensor& y, const Tensor& weights, Tape* tape) {
    return ops::scale(ops::sum_all(ops::mul(y, weights, tape), tape),
                      1.0 / static_cast<double>(y.size()), tape);
}

}  // namespace detail

// Central-difference checks for every differentiable primitive and every
// composite block, `instances` random instances each. Deterministic per seed.
inline std::vector<GradCheckEntry> gradcheck_suite(int instances = 5, uint64_t seed = 0) {
    using detail::rand_tensor;
    using detail::scalarize;
    std::vector<GradCheckEntry> results;
    Rng rng(derive_seed(seed, "gradcheck_suite"));

    auto run = [&](const std::string& name,
                   const std::function<double(Rng&)>& one_instance) {
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            worst = std::max(worst, one_instance(rng));
        }
        results.push_back({name, worst, worst <= kGradTolerance});
    };

    run("conv3d", [](Rng& r) {
        const int64_t ci = 1 + r.uniform_int(3), co = 1 + r.uniform_int(3);
        Tensor x = rand_tensor(Shape{1, ci, 4, 4, 4}, r);
        Tensor w = rand_tensor(Shape{co, ci, 3, 3, 3}, r);
        Tensor b = rand_tensor(Shape{co}, r);
        Tensor weights = rand_tensor(Shape{1, co, 4, 4, 4}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::conv3d(x, w, &b, 1, 1, t), weights, t); },
            {x, w, b}, 1e-4);
    });
    run("depthwise_conv3d", [](Rng& r) {
        const int64_t c = 1 + r.uniform_int(4);
        Tensor x = rand_tensor(Shape{1, c, 4, 4, 4}, r);
        Tensor w = rand_tensor(Shape{c, 3, 3, 3}, r);
        Tensor weights = rand_tensor(Shape{1, c, 4, 4, 4}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::depthwise_conv3d(x, w, 1, 1, t), weights, t); },
            {x, w}, 1e-4);
    });
    run("pointwise_conv3d", [](Rng& r) {
        const int64_t ci = 1 + r.uniform_int(4), co = 1 + r.uniform_int(4);
        Tensor x = rand_tensor(Shape{1, ci, 3, 3, 3}, r);
        Tensor w = rand_tensor(Shape{co, ci}, r);
        Tensor b = rand_tensor(Shape{co}, r);
        Tensor weights = rand_tensor(Shape{1, co, 3, 3, 3}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::pointwise_conv3d(x, w, &b, t), weights, t); },
            {x, w, b}, 1e-4);
    });
    run("transposed_conv3d", [](Rng& r) {
        const int64_t ci = 1 + r.uniform_int(3), co = 1 + r.uniform_int(3);
        Tensor x = rand_tensor(Shape{1, ci, 2, 3, 2}, r);
        Tensor w = rand_tensor(Shape{ci, co, 2, 2, 2}, r);
        Tensor b = rand_tensor(Shape{co}, r);
        Tensor weights = rand_tensor(Shape{1, co, 4, 6, 4}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::transposed_conv3d(x, w, &b, t), weights, t); },
            {x, w, b}, 1e-4);
    });
    run("group_norm", [](Rng& r) {
        Tensor x = rand_tensor(Shape{1, 4, 3, 3, 3}, r, -2.0, 2.0);
        Tensor gamma = rand_tensor(Shape{4}, r, 0.5, 1.5);
        Tensor beta = rand_tensor(Shape{4}, r, -0.5, 0.5);
        Tensor weights = rand_tensor(Shape{1, 4, 3, 3, 3}, r);
        return grad_check(
            [&](Tape* t) {
                return scalarize(ops::group_norm(x, 2, gamma, beta, 1e-5, t), weights, t);
            },
            {x, gamma, beta}, 1e-4);
    });
    run("gelu", [](Rng& r) {
        Tensor x = rand_tensor(Shape{3, 5}, r, -2.0, 2.0);
        Tensor weights = rand_tensor(Shape{3, 5}, r);
        return grad_check([&](Tape* t) { return scalarize(ops::gelu(x, t), weights, t); }, {x},
                          1e-4);
    });
    run("sigmoid", [](Rng& r) {
        Tensor x = rand_tensor(Shape{3, 5}, r, -2.0, 2.0);
        Tensor weights = rand_tensor(Shape{3, 5}, r);
        return grad_check([&](Tape* t) { return scalarize(ops::sigmoid(x, t), weights, t); },
                          {x}, 1e-4);
    });
    run("softmax_channel", [](Rng& r) {
        Tensor z = rand_tensor(Shape{1, 4, 2, 2, 2}, r, -2.0, 2.0);
        Tensor weights = rand_tensor(Shape{1, 4, 2, 2, 2}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::softmax_channel(z, t), weights, t); }, {z},
            1e-4);
    });
    run("softmax_lastdim", [](Rng& r) {
        Tensor z = rand_tensor(Shape{2, 3, 5}, r, -2.0, 2.0);
        Tensor weights = rand_tensor(Shape{2, 3, 5}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::softmax_lastdim(z, t), weights, t); }, {z},
            1e-4);
    });
    run("pool_mean_over_hw", [](Rng& r) {
        Tensor x = rand_tensor(Shape{1, 3, 2, 3, 3}, r);
        Tensor weights = rand_tensor(Shape{1, 3, 2}, r);
        return grad_check(
            [&](Tape* t) {
                return scalarize(ops::pool(x, ops::PoolMode::mean_over_hw, t), weights, t);
            },
            {x}, 1e-4);
    });
    run("pool_global_mean", [](Rng& r) {
        Tensor x = rand_tensor(Shape{1, 3, 2, 3, 3}, r);
        Tensor weights = rand_tensor(Shape{1, 3}, r);
        return grad_check(
            [&](Tape* t) {
                return scalarize(ops::pool(x, ops::PoolMode::global_mean, t), weights, t);
            },
            {x}, 1e-4);
    });
    run("matmul", [](Rng& r) {
        Tensor a = rand_tensor(Shape{3, 4}, r);
        Tensor b = rand_tensor(Shape{4, 2}, r);
        Tensor weights = rand_tensor(Shape{3, 2}, r);
        return grad_check([&](Tape* t) { return scalarize(ops::matmul(a, b, t), weights, t); },
                          {a, b}, 1e-4);
    });
    run("bmm", [](Rng& r) {
        Tensor a = rand_tensor(Shape{2, 3, 4}, r);
        Tensor b = rand_tensor(Shape{2, 3, 5}, r);
        Tensor weights = rand_tensor(Shape{2, 4, 5}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::bmm(a, b, true, false, t), weights, t); },
            {a, b}, 1e-4);
    });
    run("linear", [](Rng& r) {
        Tensor x = rand_tensor(Shape{3, 4}, r);
        Tensor w = rand_tensor(Shape{2, 4}, r);
        Tensor b = rand_tensor(Shape{2}, r);
        Tensor weights = rand_tensor(Shape{3, 2}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::linear(x, w, &b, t), weights, t); }, {x, w, b},
            1e-4);
    });
    run("channel_project", [](Rng& r) {
        Tensor x = rand_tensor(Shape{2, 3, 5}, r);
        Tensor w = rand_tensor(Shape{4, 3}, r);
        Tensor weights = rand_tensor(Shape{2, 4, 5}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::channel_project(x, w, t), weights, t); },
            {x, w}, 1e-4);
    });
    run("interpolate_trilinear", [](Rng& r) {
        Tensor x = rand_tensor(Shape{1, 2, 2, 3, 3}, r);
        Tensor weights = rand_tensor(Shape{1, 2, 4, 5, 5}, r);
        return grad_check(
            [&](Tape* t) {
                return scalarize(ops::interpolate_trilinear(x, Shape{4, 5, 5}, t), weights, t);
            },
            {x}, 1e-4);
    });
    run("elementwise_broadcast", [](Rng& r) {
        Tensor a = rand_tensor(Shape{2, 3, 2, 2, 2}, r);
        Tensor gate = rand_tensor(Shape{2, 3}, r);
        Tensor slice = rand_tensor(Shape{2, 3, 2}, r);
        Tensor weights = rand_tensor(Shape{2, 3, 2, 2, 2}, r);
        const double e1 = grad_check(
            [&](Tape* t) { return scalarize(ops::mul(a, gate, t), weights, t); }, {a, gate},
            1e-4);
        const double e2 = grad_check(
            [&](Tape* t) { return scalarize(ops::add(a, slice, t), weights, t); }, {a, slice},
            1e-4);
        return std::max(e1, e2);
    });
    run("concat_channels", [](Rng& r) {
        Tensor a = rand_tensor(Shape{1, 2, 2, 2, 2}, r);
        Tensor b = rand_tensor(Shape{1, 3, 2, 2, 2}, r);
        Tensor weights = rand_tensor(Shape{1, 5, 2, 2, 2}, r);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::concat_channels(a, b, t), weights, t); },
            {a, b}, 1e-4);
    });
    run("blend", [](Rng& r) {
        Tensor a = rand_tensor(Shape{2, 4}, r);
        Tensor b = rand_tensor(Shape{2, 4}, r);
        Tensor logit(Shape{1}, {r.uniform(-1.0, 1.0)});
        Tensor weights = rand_tensor(Shape{2, 4}, r);
        return grad_check([&](Tape* t) { return scalarize(ops::blend(a, b, logit, t), weights, t); },
                          {a, b, logit}, 1e-4);
    });
    run("row_select", [](Rng& r) {
        Tensor table = rand_tensor(Shape{5, 3}, r);
        Tensor weights = rand_tensor(Shape{3}, r);
        const int64_t row = r.uniform_int(5);
        return grad_check(
            [&](Tape* t) { return scalarize(ops::row_select(table, row, t), weights, t); },
            {table}, 1e-4);
    });
    run("scale_add", [](Rng& r) {
        Tensor a = rand_tensor(Shape{6}, r);
        Tensor b = rand_tensor(Shape{6}, r);
        return grad_check(
            [&](Tape* t) { return ops::scale(ops::sum_all(ops::scale_add(a, b, 0.7, -0.4, t), t),
                                             1.0 / 6.0, t); },
            {a, b}, 1e-4);
    });
    run("dice_loss", [](Rng& r) {
        Tensor logits = rand_tensor(Shape{1, 4, 2, 2, 2}, r, -2.0, 2.0);
        Tensor p = ops::softmax_channel(logits);
        Tensor y(p.shape());
        for (int64_t v = 0; v < 8; ++v) y[r.uniform_int(4) * 8 + v] = 1.0;
        train::LossConfig cfg;
        return grad_check([&](Tape* t) { return train::dice_loss(p, y, cfg, t); }, {p}, 1e-4);
    });
    run("ce_loss_through_softmax", [](Rng& r) {
        Tensor z = rand_tensor(Shape{1, 4, 2, 2, 2}, r, -2.0, 2.0);
        Tensor y(z.shape());
        for (int64_t v = 0; v < 8; ++v) y[r.uniform_int(4) * 8 + v] = 1.0;
        return grad_check(
            [&](Tape* t) { return train::ce_loss(ops::softmax_channel(z, t), y, t); }, {z},
            1e-4);
    });

    // composite blocks
    auto learnables = [](const nn::Layer& layer) {
        std::vector<Tensor> out;
        for (auto& e : nn::collect(layer)) out.push_back(e.tensor);
        return out;
    };
    run("sep_conv", [&](Rng& r) {
        nn::InitCtx ctx{r.next_u64(), "g"};
        const int64_t ci = 2 + r.uniform_int(2), co = 2 + r.uniform_int(2);
        nn::SepConv layer(ctx.child("sep"), ci, co);
        Tensor x = rand_tensor(Shape{1, ci, 4, 4, 4}, r);
        Tensor weights = rand_tensor(Shape{1, co, 4, 4, 4}, r);
        auto inputs = learnables(layer);
        inputs.push_back(x);
        return grad_check(
            [&](Tape* t) { return scalarize(layer.forward(x, t), weights, t); }, inputs, 1e-4);
    });
    run("scanner_aware_norm", [&](Rng& r) {
        nn::InitCtx ctx{r.next_u64(), "g"};
        nn::ScannerAwareNorm layer(ctx.child("san"), 4, 3, 2);
        for (int64_t i = 0; i < layer.gamma_table().size(); ++i) {
            layer.gamma_table()[i] = 1.0 + 0.3 * r.uniform(-1.0, 1.0);
            layer.beta_table()[i] = 0.2 * r.uniform(-1.0, 1.0);
        }
        Tensor x = rand_tensor(Shape{1, 4, 3, 3, 3}, r, -2.0, 2.0);
        Tensor weights = rand_tensor(Shape{1, 4, 3, 3, 3}, r);
        const int bucket = static_cast<int>(r.uniform_int(3));
        auto inputs = learnables(layer);
        inputs.push_back(x);
        return grad_check(
            [&](Tape* t) {
                return scalarize(layer.forward(x, nn::FwdCtx{t, bucket}), weights, t);
            },
            inputs, 1e-4);
    });
    run("se_block", [&](Rng& r) {
        nn::InitCtx ctx{r.next_u64(), "g"};
        nn::SEBlock layer(ctx.child("se"), 4, 4);
        Tensor x = rand_tensor(Shape{1, 4, 3, 3, 3}, r);
        Tensor weights = rand_tensor(Shape{1, 4, 3, 3, 3}, r);
        auto inputs = learnables(layer);
        inputs.push_back(x);
        return grad_check(
            [&](Tape* t) { return scalarize(layer.forward(x, t), weights, t); }, inputs, 1e-4);
    });
    run("cross_slice_attention", [&](Rng& r) {
        nn::InitCtx ctx{r.next_u64(), "g"};
        nn::CrossSliceAttention layer(ctx.child("csa"), 4, 4);
        for (int64_t i = 0; i < layer.output_projection().size(); ++i) {
            layer.output_projection()[i] = r.uniform(-0.5, 0.5);
        }
        Tensor x = rand_tensor(Shape{1, 4, 3, 2, 2}, r);
        Tensor weights = rand_tensor(Shape{1, 4, 3, 2, 2}, r);
        auto inputs = learnables(layer);
        inputs.push_back(x);
        return grad_check(
            [&](Tape* t) { return scalarize(layer.forward(x, t), weights, t); }, inputs, 1e-4);
    });
    run("ssfb", [&](Rng& r) {
        nn::InitCtx ctx{r.next_u64(), "g"};
        nn::SSFB layer(ctx.child("ssfb"), 3, 4, 3);
        for (int64_t i = 0; i < layer.out_proj().weight().size(); ++i) {
            layer.out_proj().weight()[i] = r.uniform(-0.5, 0.5);
        }
        for (int64_t i = 0; i < layer.gate_fc2().weight().size(); ++i) {
            layer.gate_fc2().weight()[i] = r.uniform(-0.5, 0.5);
        }
        layer.alpha_logit()[0] = r.uniform(-0.5, 0.5);
        Tensor f_dec = rand_tensor(Shape{1, 3, 2, 3, 2}, r);
        Tensor f_enc = rand_tensor(Shape{1, 4, 2, 3, 2}, r);
        Tensor weights = rand_tensor(Shape{1, 4, 2, 3, 2}, r);
        auto inputs = learnables(layer);
        inputs.push_back(f_dec);
        inputs.push_back(f_enc);
        return grad_check(
            [&](Tape* t) {
                return scalarize(layer.forward(f_dec, f_enc, nn::FwdCtx{t, std::nullopt}), weights, t);
            },
            inputs, 1e-4);
    });
    run("lightweight_block", [&](Rng& r) {
        nn::InitCtx ctx{r.next_u64(), "g"};
        nn::BlockConfig bc;
        bc.c_in = bc.c_out = 2;
        bc.conv_kind = nn::ConvKind::separable;
        bc.norm_kind = nn::NormKind::scanner_aware;
        bc.num_buckets = 3;
        bc.use_csa = true;
        bc.csa_rank = 4;
        nn::LightweightBlock layer(ctx.child("block"), bc);
        if (auto* csa = layer.csa()) {
            for (int64_t i = 0; i < csa->output_projection().size(); ++i) {
                csa->output_projection()[i] = r.uniform(-0.5, 0.5);
            }
        }
        Tensor h = rand_tensor(Shape{1, 2, 4, 4, 4}, r);
        Tensor weights = rand_tensor(Shape{1, 2, 4, 4, 4}, r);
        auto inputs = learnables(layer);
        inputs.push_back(h);
        const int bucket = static_cast<int>(r.uniform_int(3));
        return grad_check(
            [&](Tape* t) {
                return scalarize(layer.forward(h, nn::FwdCtx{t, bucket}), weights, t);
            },
            inputs, 1e-4);
    });
    run("segmentation_head", [&](Rng& r) {
        nn::InitCtx ctx{r.next_u64(), "g"};
        nn::SegmentationHead layer(ctx.child("head"), 3, 2);
        Tensor x = rand_tensor(Shape{1, 3, 3, 3, 3}, r);
        Tensor weights = rand_tensor(Shape{1, 2, 3, 3, 3}, r);
        auto inputs = learnables(layer);
        inputs.push_back(x);
        return grad_check(
            [&](Tape* t) { return scalarize(layer.forward(x, t), weights, t); }, inputs, 1e-4);
    });

    return results;
}

}  // namespace dalight::cli
