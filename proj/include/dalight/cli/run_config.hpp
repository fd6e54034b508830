#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "dalight/model/config_json.hpp"
#include "dalight/train/trainer.hpp"

namespace dalight::cli {

// Everything a command run depends on. A run's effective config is always
// written next to its outputs; unspecified fields take these defaults, never
// environment-dependent values.
struct RunConfig {
    std::string command;
    uint64_t seed = 0;
    std::string data_dir;
    std::string out_dir;
    std::string checkpoint;
    std::string variant = "full";
    ModelConfig model;
    train::TrainConfig train;
    int synth_count = 4;
    int64_t synth_extent = 32;
};

inline void to_json(nlohmann::json& j, const RunConfig& cfg) {
    j = nlohmann::json{
        {"command", cfg.command},
        {"seed", cfg.seed},
        {"data", cfg.data_dir},
        {"out", cfg.out_dir},
        {"checkpoint", cfg.checkpoint},
        {"variant", cfg.variant},
        {"model", cfg.model},
        {"train",
         {{"epochs", cfg.train.epochs},
          {"steps_per_case", cfg.train.steps_per_case},
          {"patch", cfg.train.patch},
          {"lr_max", cfg.train.lr_max},
          {"lr_min", cfg.train.lr_min},
          {"weight_decay", cfg.train.optim.weight_decay},
          {"beta1", cfg.train.optim.beta1},
          {"beta2", cfg.train.optim.beta2},
          {"adam_eps", cfg.train.optim.eps},
          {"lambda_dice", cfg.train.loss.lambda_dice},
          {"lambda_ce", cfg.train.loss.lambda_ce},
          {"dice_epsilon", cfg.train.loss.epsilon},
          {"tumor_bias", cfg.train.tumor_bias},
          {"augment", cfg.train.augment},
          {"val_every", cfg.train.val_every},
          {"val_patches_per_case", cfg.train.val_patches_per_case}}},
        {"synth", {{"count", cfg.synth_count}, {"extent", cfg.synth_extent}}},
    };
}

inline void from_json(const nlohmann::json& j, RunConfig& cfg) {
    RunConfig defaults;
    cfg.seed = j.value("seed", defaults.seed);
    cfg.data_dir = j.value("data", defaults.data_dir);
    cfg.out_dir = j.value("out", defaults.out_dir);
    cfg.checkpoint = j.value("checkpoint", defaults.checkpoint);
    cfg.variant = j.value("variant", defaults.variant);
    if (j.contains("model")) cfg.model = j.at("model").get<ModelConfig>();
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.epochs = t.value("epochs", defaults.train.epochs);
        cfg.train.steps_per_case = t.value("steps_per_case", defaults.train.steps_per_case);
        cfg.train.patch = t.value("patch", defaults.train.patch);
        cfg.train.lr_max = t.value("lr_max", defaults.train.lr_max);
        cfg.train.lr_min = t.value("lr_min", defaults.train.lr_min);
        cfg.train.optim.weight_decay =
            t.value("weight_decay", defaults.train.optim.weight_decay);
        cfg.train.optim.beta1 = t.value("beta1", defaults.train.optim.beta1);
        cfg.train.optim.beta2 = t.value("beta2", defaults.train.optim.beta2);
        cfg.train.optim.eps = t.value("adam_eps", defaults.train.optim.eps);
        cfg.train.loss.lambda_dice = t.value("lambda_dice", defaults.train.loss.lambda_dice);
        cfg.train.loss.lambda_ce = t.value("lambda_ce", defaults.train.loss.lambda_ce);
        cfg.train.loss.epsilon = t.value("dice_epsilon", defaults.train.loss.epsilon);
        cfg.train.tumor_bias = t.value("tumor_bias", defaults.train.tumor_bias);
        cfg.train.augment = t.value("augment", defaults.train.augment);
        cfg.train.val_every = t.value("val_every", defaults.train.val_every);
        cfg.train.val_patches_per_case =
            t.value("val_patches_per_case", defaults.train.val_patches_per_case);
    }
    if (j.contains("synth")) {
        cfg.synth_count = j["synth"].value("count", defaults.synth_count);
        cfg.synth_extent = j["synth"].value("extent", defaults.synth_extent);
    }
}

}  // namespace dalight::cli
