#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dalight/core/errors.hpp"

namespace dalight {

enum class Ablation { none, no_sepconv, no_scanner_norm, no_csa, no_ssfb };

inline const std::vector<std::pair<Ablation, std::string>>& ablation_names() {
    static const std::vector<std::pair<Ablation, std::string>> names = {
        {Ablation::none, "full"},
        {Ablation::no_sepconv, "no_sepconv"},
        {Ablation::no_scanner_norm, "no_scanner_norm"},
        {Ablation::no_csa, "no_csa"},
        {Ablation::no_ssfb, "no_ssfb"},
    };
    return names;
}

inline std::string ablation_name(Ablation a) {
    for (const auto& [ab, name] : ablation_names()) {
        if (ab == a) return name;
    }
    return "full";
}

inline Ablation ablation_from_name(const std::string& name) {
    for (const auto& [ab, n] : ablation_names()) {
        if (n == name) return ab;
    }
    throw ConfigError("unknown variant '" + name +
                      "' (expected full, no_sepconv, no_scanner_norm, no_csa, no_ssfb)");
}

// Fully determines the architecture and its parameter totals.
struct ModelConfig {
    int64_t base_width = 24;
    int64_t channel_cap = 384;
    int64_t bottleneck_width = 432;
    int64_t ssfb_rank = 8;
    int num_buckets = 8;
    int64_t num_classes = 4;
    int64_t num_modalities = 4;
    Ablation ablation = Ablation::none;

    void validate() const {
        std::vector<std::string> problems;
        if (base_width < 1) problems.push_back("base_width must be >= 1");
        if (channel_cap < 1) problems.push_back("channel_cap must be >= 1");
        if (bottleneck_width < base_width) problems.push_back("bottleneck_width must be >= base_width");
        if (ssfb_rank < 1) problems.push_back("ssfb_rank must be >= 1");
        if (num_buckets < 1) problems.push_back("num_buckets must be >= 1");
        if (num_classes < 2) problems.push_back("num_classes must be >= 2");
        if (num_modalities < 1) problems.push_back("num_modalities must be >= 1");
        if (!problems.empty()) {
            std::string msg = "invalid model config:";
            for (const auto& p : problems) msg += "\n  - " + p;
            throw ConfigError(msg);
        }
    }
};

// Stage widths: min(C0 * 2^l, cap) for l = 0..2, then the bottleneck width.
inline std::vector<int64_t> channel_plan(int64_t base_width, int64_t channel_cap,
                                         int64_t bottleneck_width) {
    if (base_width < 1 || channel_cap < 1 || bottleneck_width < 1) {
        throw ConfigError("channel_plan: widths must be positive");
    }
    std::vector<int64_t> plan;
    for (int l = 0; l < 3; ++l) {
        plan.push_back(std::min(base_width << l, channel_cap));
    }
    plan.push_back(bottleneck_width);
    return plan;
}

}  // namespace dalight
