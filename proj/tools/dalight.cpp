// dalight: volumetric segmentation engine CLI.
//
// Commands: synth, params, train, eval, gradcheck, ablate. All state flows
// through flags and the optional --config JSON file; flags override the file,
// which overrides the built-in defaults. No environment variables are read.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dalight/cli/commands.hpp"

namespace {

dalight::cli::RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw dalight::IoError(dalight::IoErrorKind::missing_file,
                               "cannot open config " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw dalight::ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return j.get<dalight::cli::RunConfig>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DALight-3D volumetric segmentation engine"};
    app.require_subcommand(1);

    struct Flags {
        std::string config, data, out, ckpt, variant;
        uint64_t seed = 0;
        int epochs = 0, count = 0, steps_per_case = 0;
        int64_t patch = 0, extent = 0;
        double lr = 0.0;
    } flags;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config, "JSON run configuration file");
        cmd->add_option("--seed", flags.seed, "master random seed (default 0)");
        cmd->add_option("--out", flags.out, "output directory");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate deterministic phantom cases");
    add_common(synth);
    synth->add_option("--count", flags.count, "number of cases (default 4)");
    synth->add_option("--extent", flags.extent, "cubic extent per case (default 32)");

    CLI::App* params = app.add_subcommand("params", "parameter accounting report");
    add_common(params);
    params->add_option("--variant", flags.variant,
                       "full|no_sepconv|no_scanner_norm|no_csa|no_ssfb");

    CLI::App* train_cmd = app.add_subcommand("train", "train on a case directory");
    add_common(train_cmd);
    train_cmd->add_option("--data", flags.data, "directory of .dl3d cases");
    train_cmd->add_option("--epochs", flags.epochs, "scheduled epochs");
    train_cmd->add_option("--patch", flags.patch, "training patch size");
    train_cmd->add_option("--steps-per-case", flags.steps_per_case,
                          "optimizer steps per case per epoch (default 25)");
    train_cmd->add_option("--lr", flags.lr, "peak learning rate (default 5e-5)");
    train_cmd->add_option("--variant", flags.variant, "architecture variant to train");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on cases");
    add_common(eval_cmd);
    eval_cmd->add_option("--data", flags.data, "directory of .dl3d cases");
    eval_cmd->add_option("--ckpt", flags.ckpt, "checkpoint file");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    add_common(gradcheck);

    CLI::App* ablate = app.add_subcommand("ablate", "train all five variants on one budget");
    add_common(ablate);
    ablate->add_option("--data", flags.data, "directory of .dl3d cases");
    ablate->add_option("--epochs", flags.epochs, "scheduled epochs");
    ablate->add_option("--patch", flags.patch, "training patch size");
    ablate->add_option("--steps-per-case", flags.steps_per_case,
                       "optimizer steps per case per epoch");
    ablate->add_option("--lr", flags.lr, "peak learning rate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // validation error
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        dalight::cli::RunConfig cfg;
        if (active->count("--config")) cfg = load_config_file(flags.config);
        cfg.command = active->get_name();
        if (active->count("--seed")) cfg.seed = flags.seed;
        if (active->count("--out")) cfg.out_dir = flags.out;
        if (active->get_option_no_throw("--data") && active->count("--data")) {
            cfg.data_dir = flags.data;
        }
        if (active->get_option_no_throw("--ckpt") && active->count("--ckpt")) {
            cfg.checkpoint = flags.ckpt;
        }
        if (active->get_option_no_throw("--variant") && active->count("--variant")) {
            cfg.variant = flags.variant;
        }
        if (active->get_option_no_throw("--epochs") && active->count("--epochs")) {
            cfg.train.epochs = flags.epochs;
        }
        if (active->get_option_no_throw("--patch") && active->count("--patch")) {
            cfg.train.patch = flags.patch;
        }
        if (active->get_option_no_throw("--steps-per-case") && active->count("--steps-per-case")) {
            cfg.train.steps_per_case = flags.steps_per_case;
        }
        if (active->get_option_no_throw("--lr") && active->count("--lr")) {
            cfg.train.lr_max = flags.lr;
        }
        if (active->get_option_no_throw("--count") && active->count("--count")) {
            cfg.synth_count = flags.count;
        }
        if (active->get_option_no_throw("--extent") && active->count("--extent")) {
            cfg.synth_extent = flags.extent;
        }
        return dalight::cli::run_command(cfg);
    } catch (const dalight::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const dalight::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
