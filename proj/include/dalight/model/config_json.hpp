#pragma once

#include <json.hpp>

#include "dalight/model/config.hpp"

namespace dalight {

inline void to_json(nlohmann::json& j, const ModelConfig& cfg) {
    j = nlohmann::json{
        {"base_width", cfg.base_width},
        {"channel_cap", cfg.channel_cap},
        {"bottleneck_width", cfg.bottleneck_width},
        {"ssfb_rank", cfg.ssfb_rank},
        {"num_buckets", cfg.num_buckets},
        {"num_classes", cfg.num_classes},
        {"num_modalities", cfg.num_modalities},
        {"ablation", ablation_name(cfg.ablation)},
    };
}

inline void from_json(const nlohmann::json& j, ModelConfig& cfg) {
    ModelConfig defaults;
    cfg.base_width = j.value("base_width", defaults.base_width);
    cfg.channel_cap = j.value("channel_cap", defaults.channel_cap);
    cfg.bottleneck_width = j.value("bottleneck_width", defaults.bottleneck_width);
    cfg.ssfb_rank = j.value("ssfb_rank", defaults.ssfb_rank);
    cfg.num_buckets = j.value("num_buckets", defaults.num_buckets);
    cfg.num_classes = j.value("num_classes", defaults.num_classes);
    cfg.num_modalities = j.value("num_modalities", defaults.num_modalities);
    cfg.ablation = ablation_from_name(j.value("ablation", std::string("full")));
}

}  // namespace dalight
