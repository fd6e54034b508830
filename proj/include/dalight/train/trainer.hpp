#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dalight/data/patch.hpp"
#include "dalight/metrics/confusion.hpp"
#include "dalight/model/dalight3d.hpp"
#include "dalight/train/loss.hpp"
#include "dalight/train/optimizer.hpp"

namespace dalight::train {

struct TrainConfig {
    int epochs = 10;
    int steps_per_case = 25;   // optimizer steps per epoch = steps_per_case * #train cases
    int64_t patch = 16;
    double lr_max = 5e-5;
    double lr_min = 0.0;
    AdamWConfig optim{};
    LossConfig loss{};
    double tumor_bias = 0.8;
    bool augment = true;
    int val_every = 2;
    int val_patches_per_case = 4;
    uint64_t seed = 0;
};

struct HistoryRow {
    int epoch = 0;
    int64_t step = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    bool has_val = false;
    double val_dice = 0.0;
};

struct TrainHooks {
    // Invoked whenever validation improves on the best retained score.
    std::function<void(const DALightModel&, const AdamW&, int epoch, double val_dice)> on_best;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    double best_val_dice = -1.0;
    int best_epoch = -1;
};

// Mean tumor Dice over deterministically sampled validation patches, pooled
// into one confusion matrix.
inline double validate_patch_dice(const DALightModel& model,
                                  const std::vector<data::CaseRecord>& val_cases,
                                  const TrainConfig& cfg, int epoch) {
    metrics::ConfusionMatrix cm(static_cast<int>(model.config().num_classes));
    Rng rng(derive_seed(cfg.seed, "val_epoch_" + std::to_string(epoch)));
    for (const auto& rec : val_cases) {
        for (int i = 0; i < cfg.val_patches_per_case; ++i) {
            data::PatchSample patch = data::sample_patch(rec, cfg.patch, rng, cfg.tumor_bias);
            Tensor x = ops::reshape(patch.image,
                                    Shape{1, 4, cfg.patch, cfg.patch, cfg.patch});
            Tensor probs = model.forward(x, nn::FwdCtx{nullptr, patch.bucket});
            cm.accumulate(metrics::argmax_channel(probs), patch.labels);
        }
    }
    return metrics::mean_defined_tumor_dice(cm);
}

// Patch-based training at batch size 1. cfg.epochs is the scheduler horizon;
// [start_epoch, stop_epoch) selects the slice actually run, so a run resumed
// at an epoch boundary replays exactly the steps the uninterrupted run would
// have taken (the cosine schedule and the per-epoch derived random streams
// depend only on the absolute epoch index). Validation runs every
// cfg.val_every epochs; the best validation score triggers the on_best hook.
inline TrainResult train(DALightModel& model, AdamW& opt,
                         const std::vector<data::CaseRecord>& train_cases,
                         const std::vector<data::CaseRecord>& val_cases, const TrainConfig& cfg,
                         int start_epoch = 0, const TrainHooks& hooks = {},
                         int stop_epoch = -1) {
    if (train_cases.empty() || val_cases.empty()) {
        throw ConfigError("train: need at least one training and one validation case");
    }
    const int stop = stop_epoch < 0 ? cfg.epochs : stop_epoch;
    if (cfg.epochs < 0 || start_epoch < 0 || start_epoch > cfg.epochs || stop > cfg.epochs) {
        throw ConfigError("train: bad epoch range");
    }

    TrainResult result;
    const int64_t steps_per_epoch =
        static_cast<int64_t>(cfg.steps_per_case) * static_cast<int64_t>(train_cases.size());
    int64_t global_step = static_cast<int64_t>(start_epoch) * steps_per_epoch;

    for (int epoch = start_epoch; epoch < stop; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min);
        Rng rng(derive_seed(cfg.seed, "train_epoch_" + std::to_string(epoch)));
        for (int64_t s = 0; s < steps_per_epoch; ++s) {
            const auto& rec = train_cases[static_cast<size_t>(s) % train_cases.size()];
            ++global_step;
            try {
                data::PatchSample patch = data::sample_patch(rec, cfg.patch, rng, cfg.tumor_bias);
                if (cfg.augment) patch = data::augment(patch, rng);
                Tensor x = ops::reshape(patch.image,
                                        Shape{1, 4, cfg.patch, cfg.patch, cfg.patch});
                Tensor y = one_hot_volume(patch.labels, model.config().num_classes,
                                          Shape{cfg.patch, cfg.patch, cfg.patch});
                Tape tape;
                Tensor probs = model.forward(x, nn::FwdCtx{&tape, patch.bucket});
                Tensor loss = total_loss(probs, y, cfg.loss, &tape);
                ops::backward(loss, tape);
                opt.step(lr);
                tape.clear();
                result.history.push_back({epoch, global_step, lr, loss[0], false, 0.0});
            } catch (const NumericError& e) {
                throw NumericError("training step " + std::to_string(global_step) + ": " +
                                   e.what());
            }
        }
        if ((epoch + 1) % cfg.val_every == 0) {
            const double val_dice = validate_patch_dice(model, val_cases, cfg, epoch);
            if (!result.history.empty()) {
                result.history.back().has_val = true;
                result.history.back().val_dice = val_dice;
            }
            if (val_dice > result.best_val_dice) {
                result.best_val_dice = val_dice;
                result.best_epoch = epoch;
                if (hooks.on_best) hooks.on_best(model, opt, epoch, val_dice);
            }
        }
    }
    return result;
}

}  // namespace dalight::train
