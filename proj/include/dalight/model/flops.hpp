#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dalight/model/dalight3d.hpp"

namespace dalight {

// Analytic multiply-accumulate counts per layer. For cross-slice attention the
// record also carries the attention-product component separately: that term
// scales with the square of the slice count and is independent of the in-plane
// extents, while the projection term is linear in the slice count.
struct LayerFlops {
    std::string name;
    double macs = 0.0;
    double csa_attention_macs = 0.0;
};

inline double sep_dense_mac_ratio(int64_t c_in, int64_t c_out) {
    return static_cast<double>(27 * c_in + c_in * c_out) /
           static_cast<double>(27 * c_in * c_out);
}

inline std::vector<LayerFlops> estimate_flops(const DALightModel& model, const Shape& input) {
    if (input.rank() != 5) throw ShapeError("estimate_flops: input must be [B,M,D,H,W]");
    const ModelConfig& cfg = model.config();
    const auto plan = channel_plan(cfg.base_width, cfg.channel_cap, cfg.bottleneck_width);
    const bool sep = cfg.ablation != Ablation::no_sepconv;
    const bool csa = cfg.ablation != Ablation::no_csa;
    const bool ssfb = cfg.ablation != Ablation::no_ssfb;

    const double B = static_cast<double>(input[0]);
    struct Res {
        double d, h, w;
        double n() const { return d * h * w; }
    };
    const Res r0{static_cast<double>(input[2]), static_cast<double>(input[3]),
                 static_cast<double>(input[4])};
    const Res r1{r0.d / 2, r0.h / 2, r0.w / 2};
    const Res r2{r0.d / 4, r0.h / 4, r0.w / 4};
    const Res r3{r0.d / 8, r0.h / 8, r0.w / 8};

    std::vector<LayerFlops> out;
    auto dense_conv = [&](const std::string& name, double n_out, double ci, double co) {
        out.push_back({name, B * n_out * ci * co * 27.0, 0.0});
    };
    auto conv1x = [&](const std::string& name, double n, double ci, double co) {
        out.push_back({name, B * n * ci * co, 0.0});
    };
    auto sep_conv = [&](const std::string& name, double n, double ci, double co) {
        out.push_back({name, B * n * (ci * 27.0 + ci * co), 0.0});
    };
    auto norm = [&](const std::string& name, double n, double c) {
        out.push_back({name, B * 4.0 * n * c, 0.0});
    };
    auto block = [&](const std::string& stage, double ci, double co, bool separable,
                     bool use_csa, const Res& r) {
        const double n = r.n();
        if (separable && sep) {
            sep_conv(stage + "/conv1", n, ci, co);
        } else {
            dense_conv(stage + "/conv1", n, ci, co);
        }
        norm(stage + "/norm1", n, co);
        if (separable && sep) {
            sep_conv(stage + "/conv2", n, co, co);
        } else {
            dense_conv(stage + "/conv2", n, co, co);
        }
        norm(stage + "/norm2", n, co);
        const double hidden = std::max<double>(1.0, co / 4.0);
        out.push_back({stage + "/se", B * (n * co + co * hidden * 2.0 + n * co), 0.0});
        if (use_csa && csa) {
            const double d = static_cast<double>(nn::csa_default_rank(static_cast<int64_t>(co)));
            const double attention = B * 2.0 * d * r.d * r.d;  // Q^T K and V A products
            const double projections = B * 4.0 * co * d * r.d;
            const double pool_cost = B * n * co;
            out.push_back({stage + "/csa", pool_cost + projections + attention, attention});
        }
        if (ci != co) conv1x(stage + "/proj", n, ci, co);
    };
    auto fusion = [&](const std::string& stage, double cd, double ce, const Res& r) {
        const double n = r.n();
        if (ssfb) {
            const double rk = static_cast<double>(cfg.ssfb_rank);
            const double attn_path = B * n * (rk * cd + 2.0 * rk * ce + 4.0 * rk +
                                              2.0 * rk * rk + rk * ce);
            const double gate = B * (n * (cd + ce) + (cd + ce) * (cd + ce) / 2.0 + n * ce);
            const double fuse_conv = B * n * (cd + ce) * ce * 27.0;
            out.push_back({stage + "/ssfb", attn_path + gate + fuse_conv + B * 4.0 * n * ce, 0.0});
        } else {
            conv1x(stage + "/mix", n, cd + ce, ce);
            norm(stage + "/gn", n, ce);
        }
    };

    dense_conv("init/conv", r0.n(), static_cast<double>(cfg.num_modalities),
               static_cast<double>(plan[0]));
    norm("init/gn", r0.n(), static_cast<double>(plan[0]));
    block("enc0", plan[0], plan[0], false, false, r0);
    dense_conv("down1/conv", r1.n(), plan[0], plan[1]);
    block("enc1", plan[1], plan[1], true, false, r1);
    dense_conv("down2/conv", r2.n(), plan[1], plan[2]);
    block("enc2", plan[2], plan[2], true, true, r2);
    dense_conv("down3/conv", r3.n(), plan[2], plan[3]);
    block("enc3", plan[3], plan[3], true, true, r3);

    out.push_back({"up1", B * r3.n() * plan[3] * plan[2] * 8.0, 0.0});
    // deepest skip always fuses simply
    conv1x("fuse1/mix", r2.n(), plan[2] + plan[2], plan[2]);
    norm("fuse1/gn", r2.n(), plan[2]);
    block("dec1", plan[2], plan[2], true, false, r2);
    out.push_back({"up2", B * r2.n() * plan[2] * plan[1] * 8.0, 0.0});
    fusion("fuse2", plan[1], plan[1], r1);
    block("dec2", plan[1], plan[1], true, false, r1);
    out.push_back({"up3", B * r1.n() * plan[1] * plan[0] * 8.0, 0.0});
    fusion("fuse3", plan[0], plan[0], r0);
    block("dec3", plan[0], plan[0], false, false, r0);

    dense_conv("head/conv", r0.n(), plan[0], plan[0]);
    norm("head/gn", r0.n(), static_cast<double>(plan[0]));
    conv1x("head/out", r0.n(), plan[0], static_cast<double>(cfg.num_classes));
    return out;
}

inline double total_flops(const std::vector<LayerFlops>& layers) {
    double total = 0.0;
    for (const auto& l : layers) total += l.macs;
    return total;
}

}  // namespace dalight
