#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalight/cli/gradcheck_suite.hpp"
#include "dalight/cli/run_config.hpp"
#include "dalight/data/dl3d_io.hpp"
#include "dalight/data/normalize.hpp"
#include "dalight/data/phantom.hpp"
#include "dalight/metrics/report.hpp"
#include "dalight/model/dalight3d.hpp"
#include "dalight/model/flops.hpp"
#include "dalight/train/checkpoint.hpp"
#include "dalight/train/trainer.hpp"

namespace dalight::cli {

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::write_failed, "cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError(IoErrorKind::write_failed, "short write to " + path);
}

inline void require_out_dir(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError(cfg.command + ": --out is required");
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) {
        throw IoError(IoErrorKind::write_failed,
                      "cannot create output directory " + cfg.out_dir + ": " + ec.message());
    }
}

inline void write_effective_config(const RunConfig& cfg) {
    nlohmann::json j = cfg;
    write_text((std::filesystem::path(cfg.out_dir) / "config.json").string(), j.dump(2) + "\n");
}

inline std::vector<data::CaseRecord> load_cases(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) throw ConfigError(cfg.command + ": --data is required");
    if (!std::filesystem::is_directory(cfg.data_dir)) {
        throw IoError(IoErrorKind::missing_file, "data directory not found: " + cfg.data_dir);
    }
    std::vector<std::string> paths;
    for (const auto& entry : std::filesystem::directory_iterator(cfg.data_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".dl3d") {
            paths.push_back(entry.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) {
        throw ConfigError(cfg.command + ": no .dl3d cases in " + cfg.data_dir);
    }
    std::vector<data::CaseRecord> cases;
    cases.reserve(paths.size());
    for (const auto& p : paths) cases.push_back(data::read_case(p, cfg.model.num_buckets));
    return cases;
}

// deterministic split: every fourth case (by sorted order) validates; small
// sets validate on the last case
inline void split_cases(const std::vector<data::CaseRecord>& cases,
                        std::vector<data::CaseRecord>& train_cases,
                        std::vector<data::CaseRecord>& val_cases) {
    for (size_t i = 0; i < cases.size(); ++i) {
        if (i % 4 == 3) {
            val_cases.push_back(cases[i]);
        } else {
            train_cases.push_back(cases[i]);
        }
    }
    if (val_cases.empty() && cases.size() >= 2) {
        val_cases.push_back(train_cases.back());
        train_cases.pop_back();
    }
    if (train_cases.empty() || val_cases.empty()) {
        throw ConfigError("train: need at least 2 cases for a train/validation split");
    }
}

inline std::string history_csv(const std::vector<train::HistoryRow>& rows) {
    std::string csv = "epoch,step,lr,train_loss,val_mean_dice\n";
    for (const auto& r : rows) {
        csv += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + fmt_double(r.lr) +
               "," + fmt_double(r.train_loss) + ",";
        if (r.has_val) csv += fmt_double(r.val_dice);
        csv += "\n";
    }
    return csv;
}

inline nlohmann::json params_report(const DALightModel& model) {
    const auto report = count_params(model);
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& [stage, count] : report.per_stage) {
        stages.push_back({{"stage", stage}, {"params", count}});
    }
    nlohmann::json separable = nlohmann::json::array();
    const auto entries = nn::collect(model);
    std::map<std::string, const nn::ParamEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    for (const auto& e : entries) {
        if (e.name.size() < 3 || e.name.compare(e.name.size() - 3, 3, "/dw") != 0) continue;
        const std::string prefix = e.name.substr(0, e.name.size() - 3);
        const auto pw = by_name.find(prefix + "/pw/w");
        if (pw == by_name.end()) continue;
        const int64_t c_in = e.tensor.shape()[0];
        const int64_t c_out = pw->second->tensor.shape()[0];
        separable.push_back(
            {{"layer", prefix},
             {"separable_params", nn::SepConv::expected_param_count(c_in, c_out)},
             {"dense_equivalent_params", nn::SepConv::dense_equivalent_param_count(c_in, c_out)}});
    }
    return {{"variant", ablation_name(model.config().ablation)},
            {"total", report.total},
            {"per_stage", stages},
            {"separable_layers", separable}};
}

}  // namespace detail

// synth: deterministic phantom cases case_000... plus a manifest of ids and
// buckets.
inline int cmd_synth(const RunConfig& cfg) {
    detail::require_out_dir(cfg);
    nlohmann::json manifest;
    manifest["seed"] = cfg.seed;
    manifest["extent"] = cfg.synth_extent;
    nlohmann::json case_list = nlohmann::json::array();
    for (int i = 0; i < cfg.synth_count; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "case_%03d", i);
        data::CaseRecord rec =
            data::generate_phantom(cfg.seed, {cfg.synth_extent, cfg.synth_extent, cfg.synth_extent},
                                   id, cfg.model.num_buckets);
        const std::string file = std::string(id) + ".dl3d";
        data::write_case((std::filesystem::path(cfg.out_dir) / file).string(), rec);
        case_list.push_back({{"id", id}, {"bucket", rec.bucket}, {"file", file}});
    }
    manifest["cases"] = case_list;
    detail::write_text((std::filesystem::path(cfg.out_dir) / "manifest.json").string(),
                       manifest.dump(2) + "\n");
    detail::write_effective_config(cfg);
    std::cout << "wrote " << cfg.synth_count << " case(s) to " << cfg.out_dir << "\n";
    return 0;
}

// params: exact totals, per-stage breakdown, and the dense-vs-separable
// comparison for every separable convolution.
inline int cmd_params(const RunConfig& cfg) {
    ModelConfig mc = cfg.model;
    mc.ablation = ablation_from_name(cfg.variant);
    DALightModel model(mc, cfg.seed);
    const nlohmann::json report = detail::params_report(model);
    std::cout << report.dump(2) << "\n";
    if (!cfg.out_dir.empty()) {
        detail::require_out_dir(cfg);
        detail::write_text((std::filesystem::path(cfg.out_dir) / "params.json").string(),
                           report.dump(2) + "\n");
        detail::write_effective_config(cfg);
    }
    return 0;
}

// train: best + final checkpoints, a per-step history CSV, and the effective
// config.
inline int cmd_train(const RunConfig& cfg) {
    detail::require_out_dir(cfg);
    ModelConfig mc = cfg.model;
    mc.ablation = ablation_from_name(cfg.variant);
    mc.validate();

    std::vector<data::CaseRecord> cases = detail::load_cases(cfg);
    for (auto& rec : cases) rec = data::normalized(rec);
    std::vector<data::CaseRecord> train_cases, val_cases;
    detail::split_cases(cases, train_cases, val_cases);

    DALightModel model(mc, cfg.seed);
    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    train::AdamW opt(nn::collect(model), tc.optim);

    const std::string best_path = (std::filesystem::path(cfg.out_dir) / "best.ckpt").string();
    const std::string final_path = (std::filesystem::path(cfg.out_dir) / "final.ckpt").string();
    train::TrainHooks hooks;
    bool wrote_best = false;
    hooks.on_best = [&](const DALightModel& m, const train::AdamW& o, int epoch,
                        double val_dice) {
        train::CheckpointMeta meta;
        meta.model = mc;
        meta.optim = tc.optim;
        meta.epoch = epoch + 1;
        meta.best_val_dice = val_dice;
        meta.seed = cfg.seed;
        train::save_checkpoint(best_path, m, &o, meta);
        wrote_best = true;
    };

    const train::TrainResult result = train::train(model, opt, train_cases, val_cases, tc, 0,
                                                   hooks);

    train::CheckpointMeta final_meta;
    final_meta.model = mc;
    final_meta.optim = tc.optim;
    final_meta.epoch = tc.epochs;
    final_meta.best_val_dice = result.best_val_dice;
    final_meta.seed = cfg.seed;
    train::save_checkpoint(final_path, model, &opt, final_meta);
    if (!wrote_best) train::save_checkpoint(best_path, model, &opt, final_meta);

    detail::write_text((std::filesystem::path(cfg.out_dir) / "history.csv").string(),
                       detail::history_csv(result.history));
    detail::write_effective_config(cfg);

    std::cout << "trained " << result.history.size() << " step(s); best val dice "
              << (result.best_val_dice >= 0 ? detail::fmt_double(result.best_val_dice) : "n/a")
              << "\n";
    return 0;
}

// eval: pooled confusion-matrix metrics, calibration, and parameter-efficiency
// figures for a checkpoint over a case directory.
inline int cmd_eval(const RunConfig& cfg) {
    detail::require_out_dir(cfg);
    if (cfg.checkpoint.empty()) throw ConfigError("eval: --ckpt is required");
    train::LoadedCheckpoint loaded = train::load_checkpoint(cfg.checkpoint);
    DALightModel& model = loaded.model;
    const int64_t K = model.config().num_classes;

    std::vector<data::CaseRecord> cases = detail::load_cases(cfg);
    metrics::ConfusionMatrix cm(static_cast<int>(K));
    std::vector<double> confidences;
    std::vector<uint8_t> correct;
    for (auto& raw : cases) {
        data::CaseRecord rec = data::normalized(raw);
        Tensor x = ops::reshape(rec.image, Shape{1, 4, rec.depth(), rec.height(), rec.width()});
        Tensor probs = model.forward(x, nn::FwdCtx{nullptr, rec.bucket});
        const std::vector<uint8_t> pred = metrics::argmax_channel(probs);
        cm.accumulate(pred, rec.labels);
        const int64_t S = rec.voxels();
        for (int64_t v = 0; v < S; ++v) {
            double best = probs[v];
            for (int64_t c = 1; c < K; ++c) best = std::max(best, probs[c * S + v]);
            confidences.push_back(best);
            correct.push_back(pred[static_cast<size_t>(v)] == rec.labels[static_cast<size_t>(v)]
                                  ? 1
                                  : 0);
        }
    }

    const auto calibration = metrics::ece_report(confidences, correct, 15);
    nlohmann::json mj = metrics::class_metrics_json(cm, data::kClassNames);
    const auto macro = metrics::macro_tumor(metrics::per_class(cm));
    const int64_t total_params = count_params(model).total;
    mj["params"] = total_params;
    mj["ece"] = calibration.ece;
    if (macro.dice) {
        mj["mean_tumor_dice"] = *macro.dice;
        mj["dice_per_million"] =
            metrics::dice_per_million(*macro.dice, static_cast<double>(total_params));
    } else {
        mj["mean_tumor_dice"] = nullptr;
        mj["dice_per_million"] = nullptr;
    }

    const std::filesystem::path out(cfg.out_dir);
    detail::write_text((out / "metrics.json").string(), mj.dump(2) + "\n");
    detail::write_text((out / "calibration.json").string(),
                       metrics::calibration_json(calibration).dump(2) + "\n");
    detail::write_text((out / "confusion.csv").string(), metrics::confusion_csv(cm));
    detail::write_effective_config(cfg);
    std::cout << "evaluated " << cases.size() << " case(s); overall accuracy "
              << detail::fmt_double(calibration.overall_accuracy) << "\n";
    return 0;
}

// gradcheck: the full primitive and block suite; nonzero exit on any failure.
inline int cmd_gradcheck(const RunConfig& cfg) {
    const auto results = gradcheck_suite(5, cfg.seed);
    bool all_pass = true;
    std::printf("%-28s %-14s %s\n", "entry", "max_rel_error", "status");
    for (const auto& r : results) {
        std::printf("%-28s %-14.3g %s\n", r.name.c_str(), r.max_rel_error,
                    r.pass ? "PASS" : "FAIL");
        all_pass = all_pass && r.pass;
    }
    std::printf("%zu entries, tolerance %.0e\n", results.size(), kGradTolerance);
    return all_pass ? 0 : 2;
}

// ablate: trains all five variants under one matched desk-scale budget and
// emits variant, mean tumor Dice, and parameter count.
inline int cmd_ablate(const RunConfig& cfg) {
    detail::require_out_dir(cfg);
    std::vector<data::CaseRecord> cases = detail::load_cases(cfg);
    for (auto& rec : cases) rec = data::normalized(rec);
    std::vector<data::CaseRecord> train_cases, val_cases;
    detail::split_cases(cases, train_cases, val_cases);

    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;

    std::string csv = "variant,mean_tumor_dice,params\n";
    std::printf("%-18s %-16s %s\n", "variant", "mean_tumor_dice", "params");
    for (const auto& [ablation, name] : ablation_names()) {
        ModelConfig mc = cfg.model;
        mc.ablation = ablation;
        DALightModel model(mc, cfg.seed);
        train::AdamW opt(nn::collect(model), tc.optim);
        const train::TrainResult result =
            train::train(model, opt, train_cases, val_cases, tc);
        double dice = result.best_val_dice;
        if (dice < 0.0) dice = train::validate_patch_dice(model, val_cases, tc, tc.epochs);
        const int64_t params = count_params(model).total;
        csv += name + "," + detail::fmt_double(dice) + "," + std::to_string(params) + "\n";
        std::printf("%-18s %-16.4f %lld\n", name.c_str(), dice,
                    static_cast<long long>(params));
    }
    detail::write_text((std::filesystem::path(cfg.out_dir) / "ablation.csv").string(), csv);
    detail::write_effective_config(cfg);
    return 0;
}

inline int dispatch(const RunConfig& cfg) {
    if (cfg.command == "synth") return cmd_synth(cfg);
    if (cfg.command == "params") return cmd_params(cfg);
    if (cfg.command == "train") return cmd_train(cfg);
    if (cfg.command == "eval") return cmd_eval(cfg);
    if (cfg.command == "gradcheck") return cmd_gradcheck(cfg);
    if (cfg.command == "ablate") return cmd_ablate(cfg);
    throw ConfigError("unknown command '" + cfg.command + "'");
}

// Maps the error taxonomy onto process exit codes:
// 0 success, 1 validation error, 2 numeric failure, 3 I/O error.
inline int run_command(const RunConfig& cfg) {
    try {
        return dispatch(cfg);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace dalight::cli
