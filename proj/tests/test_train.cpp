#include <catch2/catch.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "dalight/core/gradcheck.hpp"
#include "dalight/data/normalize.hpp"
#include "dalight/data/phantom.hpp"
#include "dalight/train/checkpoint.hpp"
#include "dalight/train/loss.hpp"
#include "dalight/train/optimizer.hpp"
#include "dalight/train/trainer.hpp"
#include "helpers.hpp"

using namespace dalight;
using namespace dalight::train;
using testutil::bit_equal;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// random normalized probabilities and a matching one-hot truth
std::pair<Tensor, Tensor> random_probs_and_truth(Rng& rng, int64_t k, int64_t side) {
    Tensor logits = testutil::random_tensor(Shape{1, k, side, side, side}, rng, -2.0, 2.0);
    Tensor probs = ops::softmax_channel(logits);
    Tensor one_hot(probs.shape());
    const int64_t S = side * side * side;
    for (int64_t v = 0; v < S; ++v) {
        one_hot[rng.uniform_int(k) * S + v] = 1.0;
    }
    return {probs, one_hot};
}

}  // namespace

TEST_CASE("dice_loss: perfect, disjoint, and empty-class cases") {
    LossConfig cfg;
    // perfect prediction with all tumor classes present
    Tensor y(Shape{1, 4, 1, 1, 4});
    for (int64_t c = 0; c < 4; ++c) y[c * 4 + c] = 1.0;  // voxel v has class v
    Tensor p = y.clone();
    REQUIRE(dice_loss(p, y, cfg)[0] <= 1e-4);

    // all-BG prediction against tumor-bearing truth
    Tensor p_bg(Shape{1, 4, 1, 1, 4});
    for (int64_t v = 0; v < 4; ++v) p_bg[v] = 1.0;  // all mass on BG
    REQUIRE(dice_loss(p_bg, y, cfg)[0] == Approx(1.0).margin(1e-3));

    // a tumor class empty in truth and prediction contributes a perfect term
    Tensor y2(Shape{1, 4, 1, 1, 2});
    y2[0 * 2 + 0] = 1.0;  // BG voxel
    y2[1 * 2 + 1] = 1.0;  // NCR voxel; ED and ET absent
    Tensor p2 = y2.clone();
    REQUIRE(dice_loss(p2, y2, cfg)[0] <= 1e-4);
}

TEST_CASE("dice_loss stays in [0,1] and is permutation invariant") {
    Rng rng(1);
    LossConfig cfg;
    auto [p, y] = random_probs_and_truth(rng, 4, 3);
    const double loss = dice_loss(p, y, cfg)[0];
    REQUIRE(loss >= 0.0);
    REQUIRE(loss <= 1.0);

    // jointly permute voxel positions of p and y
    const int64_t S = 27;
    std::vector<int64_t> perm(S);
    for (int64_t i = 0; i < S; ++i) perm[static_cast<size_t>(i)] = i;
    for (int64_t i = S - 1; i > 0; --i) {
        std::swap(perm[static_cast<size_t>(i)],
                  perm[static_cast<size_t>(rng.uniform_int(i + 1))]);
    }
    Tensor p2(p.shape()), y2(y.shape());
    for (int64_t c = 0; c < 4; ++c) {
        for (int64_t v = 0; v < S; ++v) {
            p2[c * S + perm[static_cast<size_t>(v)]] = p[c * S + v];
            y2[c * S + perm[static_cast<size_t>(v)]] = y[c * S + v];
        }
    }
    REQUIRE(dice_loss(p2, y2, cfg)[0] == Approx(loss).margin(1e-12));
}

TEST_CASE("dice_loss gradient check") {
    Rng rng(2);
    LossConfig cfg;
    auto [p, y] = random_probs_and_truth(rng, 4, 2);
    auto closure = [&, y = y, p = p](Tape* t) { return dice_loss(p, y, cfg, t); };
    REQUIRE(grad_check(closure, {p}, 1e-4) <= 1e-4);
}

TEST_CASE("ce_loss: uniform, perfect, and the softmax composition gradient") {
    Tensor uniform = Tensor::full(Shape{1, 4, 2, 2, 2}, 0.25);
    Tensor y(Shape{1, 4, 2, 2, 2});
    Rng rng(3);
    const int64_t S = 8;
    for (int64_t v = 0; v < S; ++v) y[rng.uniform_int(4) * S + v] = 1.0;
    REQUIRE(ce_loss(uniform, y)[0] == Approx(std::log(4.0)).margin(1e-9));

    REQUIRE(ce_loss(y, y)[0] <= 1e-9);  // perfect one-hot probabilities

    // gradient of ce(softmax(z)) w.r.t. z equals (p - y) / |voxels|
    Tensor z = random_tensor(Shape{1, 4, 2, 2, 2}, rng, -2.0, 2.0);
    Tape tape;
    Tensor p = ops::softmax_channel(z, &tape);
    Tensor loss = ce_loss(p, y, &tape);
    ops::backward(loss, tape);
    for (int64_t i = 0; i < z.size(); ++i) {
        REQUIRE(z.grad_at(i) == Approx((p[i] - y[i]) / 8.0).margin(1e-6));
    }
}

TEST_CASE("total_loss is the exact affine combination") {
    Rng rng(4);
    auto [p, y] = random_probs_and_truth(rng, 4, 2);
    LossConfig cfg;
    const double dice = dice_loss(p, y, cfg)[0];
    const double ce = ce_loss(p, y)[0];
    REQUIRE(total_loss(p, y, cfg)[0] == Approx(dice + 0.5 * ce).margin(1e-15));

    LossConfig dice_only = cfg;
    dice_only.lambda_ce = 0.0;
    REQUIRE(total_loss(p, y, dice_only)[0] == dice);
    LossConfig ce_only = cfg;
    ce_only.lambda_dice = 0.0;
    REQUIRE(total_loss(p, y, ce_only)[0] == 0.5 * ce);

    REQUIRE(1.0 * 0.3 + 0.5 * 0.8 == Approx(0.7).margin(1e-15));
}

TEST_CASE("adamw single-step hand oracle") {
    Tensor theta(Shape{1}, {1.0});
    std::vector<nn::ParamEntry> params = {{"theta", theta, true}};
    AdamW opt(params);  // defaults: beta 0.9/0.999, wd 0.01, eps 1e-8
    theta.ensure_grad()[0] = 1.0;
    opt.step(0.1);
    REQUIRE(theta[0] == Approx(0.899).margin(1e-6));
    REQUIRE(opt.step_count() == 1);
}

TEST_CASE("adamw zero-gradient behavior is exact") {
    Rng rng(5);
    Tensor theta = random_tensor(Shape{5}, rng);
    Tensor snapshot = theta.clone();
    AdamWConfig no_decay;
    no_decay.weight_decay = 0.0;
    AdamW opt({{"theta", theta, true}}, no_decay);
    opt.step(0.1);  // no gradient buffer at all
    REQUIRE(bit_equal(theta, snapshot));

    AdamWConfig with_decay;
    with_decay.weight_decay = 0.01;
    AdamW opt2({{"theta", theta, true}}, with_decay);
    Tensor before = theta.clone();
    opt2.step(0.1);
    for (int64_t i = 0; i < theta.size(); ++i) {
        REQUIRE(theta[i] == before[i] - 0.1 * 0.01 * before[i]);
    }
}

TEST_CASE("adamw rejects non-finite gradients without mutating parameters") {
    Tensor theta(Shape{2}, {1.0, 2.0});
    AdamW opt({{"theta", theta, true}});
    theta.ensure_grad()[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(opt.step(0.1), NumericError);
    REQUIRE(theta[0] == 1.0);
    REQUIRE(theta[1] == 2.0);
    REQUIRE(opt.step_count() == 0);
}

TEST_CASE("cosine_lr endpoints, midpoint, monotonicity, and range check") {
    REQUIRE(cosine_lr(0, 10, 5e-5, 0.0) == 5e-5);
    REQUIRE(cosine_lr(10, 10, 5e-5, 0.0) == 0.0);
    REQUIRE(cosine_lr(5, 10, 5e-5, 1e-6) == Approx((5e-5 + 1e-6) / 2.0).margin(1e-12));
    double prev = cosine_lr(0, 20, 1e-3, 1e-5);
    for (int t = 1; t <= 20; ++t) {
        const double lr = cosine_lr(t, 20, 1e-3, 1e-5);
        REQUIRE(lr <= prev);
        prev = lr;
    }
    REQUIRE_THROWS_AS(cosine_lr(-1, 10, 1.0, 0.0), ConfigError);
    REQUIRE_THROWS_AS(cosine_lr(11, 10, 1.0, 0.0), ConfigError);
}

namespace {

ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.base_width = 2;
    cfg.bottleneck_width = 4;
    cfg.ssfb_rank = 2;
    cfg.num_buckets = 8;
    return cfg;
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.steps_per_case = 2;
    cfg.patch = 8;
    cfg.lr_max = 1e-3;
    cfg.val_every = 2;
    cfg.val_patches_per_case = 2;
    cfg.seed = 0;
    return cfg;
}

std::vector<data::CaseRecord> tiny_cases(int n) {
    std::vector<data::CaseRecord> cases;
    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "case_%03d", i);
        cases.push_back(data::normalized(data::generate_phantom(0, {16, 16, 16}, name)));
    }
    return cases;
}

}  // namespace

TEST_CASE("checkpoint round-trip preserves forward outputs bit-identically") {
    DALightModel model(tiny_model_config(), 3);
    AdamW opt(nn::collect(model));
    CheckpointMeta meta;
    meta.model = tiny_model_config();
    meta.seed = 3;
    const std::string path = temp_path("dalight_ckpt_rt.dlck");
    save_checkpoint(path, model, &opt, meta);

    Rng rng(6);
    Tensor x = random_tensor(Shape{1, 4, 8, 8, 8}, rng);
    Tensor before = model.forward(x, nn::FwdCtx{nullptr, 1});

    LoadedCheckpoint loaded = load_checkpoint(path);
    Tensor after = loaded.model.forward(x, nn::FwdCtx{nullptr, 1});
    REQUIRE(bit_equal(before, after));
    REQUIRE(loaded.optimizer.has_value());
    REQUIRE(loaded.optimizer->step_count() == 0);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint into a different configuration lists the offending names") {
    DALightModel model(tiny_model_config(), 3);
    CheckpointMeta meta;
    meta.model = tiny_model_config();
    const std::string path = temp_path("dalight_ckpt_mismatch.dlck");
    save_checkpoint(path, model, nullptr, meta);

    // different layer set: the full checkpoint carries CSA tensors the
    // ablated model does not have
    ModelConfig no_csa_cfg = tiny_model_config();
    no_csa_cfg.ablation = Ablation::no_csa;
    DALightModel no_csa_model(no_csa_cfg, 3);
    try {
        restore_into(no_csa_model, path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        REQUIRE(e.kind() == IoErrorKind::name_mismatch);
        REQUIRE(std::string(e.what()).find("csa") != std::string::npos);
    }

    // same layer names but different extents: the shape is called out
    ModelConfig other = tiny_model_config();
    other.bottleneck_width = 8;
    DALightModel wrong(other, 3);
    try {
        restore_into(wrong, path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        REQUIRE(e.kind() == IoErrorKind::name_mismatch);
        REQUIRE(std::string(e.what()).find("shape") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("corrupted checkpoints raise specific errors") {
    DALightModel model(tiny_model_config(), 3);
    CheckpointMeta meta;
    meta.model = tiny_model_config();
    std::string bytes = encode_checkpoint(model, nullptr, meta);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    try {
        decode_checkpoint(bad_magic);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        REQUIRE(e.kind() == IoErrorKind::bad_magic);
    }

    std::string truncated = bytes.substr(0, bytes.size() - 7);
    try {
        decode_checkpoint(truncated);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        REQUIRE(e.kind() == IoErrorKind::truncated);
    }
}

TEST_CASE("train: zero epochs returns an empty history and leaves the model unchanged") {
    DALightModel model(tiny_model_config(), 0);
    AdamW opt(nn::collect(model));
    auto cases = tiny_cases(2);
    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 0;
    Rng rng(7);
    Tensor x = random_tensor(Shape{1, 4, 8, 8, 8}, rng);
    Tensor before = model.forward(x, nn::FwdCtx{nullptr, 0});
    TrainResult result = dalight::train::train(model, opt, cases, cases, cfg);
    REQUIRE(result.history.empty());
    REQUIRE(bit_equal(model.forward(x, nn::FwdCtx{nullptr, 0}), before));
}

TEST_CASE("train is deterministic under a fixed seed") {
    auto cases = tiny_cases(2);
    TrainConfig cfg = tiny_train_config();

    auto run = [&]() {
        DALightModel model(tiny_model_config(), 1);
        AdamW opt(nn::collect(model), cfg.optim);
        return dalight::train::train(model, opt, cases, {cases[0]}, cfg);
    };
    TrainResult a = run();
    TrainResult b = run();
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        REQUIRE(a.history[i].train_loss == b.history[i].train_loss);
        REQUIRE(a.history[i].lr == b.history[i].lr);
        REQUIRE(a.history[i].step == b.history[i].step);
        REQUIRE(a.history[i].has_val == b.history[i].has_val);
        if (a.history[i].has_val) REQUIRE(a.history[i].val_dice == b.history[i].val_dice);
    }
}

TEST_CASE("resumed training reproduces the uninterrupted history") {
    auto cases = tiny_cases(2);
    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 4;
    cfg.val_every = 2;

    DALightModel full_model(tiny_model_config(), 2);
    AdamW full_opt(nn::collect(full_model), cfg.optim);
    TrainResult full_run = dalight::train::train(full_model, full_opt, cases, {cases[0]}, cfg);

    DALightModel part_model(tiny_model_config(), 2);
    AdamW part_opt(nn::collect(part_model), cfg.optim);
    // same 4-epoch schedule horizon, stopping after epoch 2
    TrainResult part1 = dalight::train::train(part_model, part_opt, cases, {cases[0]}, cfg, 0,
                                              {}, /*stop_epoch=*/2);

    const std::string path = temp_path("dalight_ckpt_resume.dlck");
    CheckpointMeta meta;
    meta.model = tiny_model_config();
    meta.epoch = 2;
    meta.seed = 2;
    save_checkpoint(path, part_model, &part_opt, meta);

    LoadedCheckpoint resumed = load_checkpoint(path);
    REQUIRE(resumed.optimizer.has_value());
    TrainResult part2 = dalight::train::train(resumed.model, *resumed.optimizer, cases, {cases[0]}, cfg,
                              /*start_epoch=*/resumed.meta.epoch);

    std::vector<HistoryRow> spliced = part1.history;
    spliced.insert(spliced.end(), part2.history.begin(), part2.history.end());
    REQUIRE(spliced.size() == full_run.history.size());
    for (size_t i = 0; i < spliced.size(); ++i) {
        REQUIRE(spliced[i].step == full_run.history[i].step);
        REQUIRE(spliced[i].train_loss == full_run.history[i].train_loss);
        REQUIRE(spliced[i].lr == full_run.history[i].lr);
        if (full_run.history[i].has_val) {
            REQUIRE(spliced[i].val_dice == full_run.history[i].val_dice);
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("train smoke: loss trends downward on phantoms") {
    auto cases = tiny_cases(2);
    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 4;
    cfg.steps_per_case = 10;  // 80 steps total
    cfg.lr_max = 3e-3;
    DALightModel model(tiny_model_config(), 5);
    AdamW opt(nn::collect(model), cfg.optim);
    TrainResult result = dalight::train::train(model, opt, cases, {cases[0]}, cfg);
    REQUIRE(result.history.size() == 80);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
        first += result.history[static_cast<size_t>(i)].train_loss;
        last += result.history[result.history.size() - 10 + static_cast<size_t>(i)].train_loss;
    }
    REQUIRE(last < first);
    REQUIRE(result.best_val_dice >= 0.0);
}
