// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "posetok/commands.hpp"

namespace {

using posetok::CommandOptions;

struct Flags {
    std::string preset;
    std::string config;
    std::map<std::string, std::string> values;  // config key -> flag text
    std::string out = ".";
    std::string input, model, pred, gt, selection, detected2d, gt2d;
    bool baseline = false;
    std::vector<std::size_t> sweep_blocks, sweep_tokens;
};

posetok::ModelConfig preset_config(const std::string& name) {
    if (name == "toy") {
        return posetok::ModelConfig::toy();
    }
    if (name == "mixste") {
        return posetok::ModelConfig::mixste_like();
    }
    if (name == "motionbert") {
        return posetok::ModelConfig::motionbert_like();
    }
    throw posetok::ConfigError("unknown preset '" + name + "'");
}

void add_common(CLI::App& cmd, Flags& flags, const std::string& default_preset) {
    flags.preset = default_preset;
    cmd.add_option("--preset", flags.preset, "Base configuration: toy, mixste or motionbert")
        ->capture_default_str();
    cmd.add_option("--config", flags.config, "Flat key=value configuration file");
    cmd.add_option("--out", flags.out, "Output directory")->capture_default_str();
    const std::pair<const char*, const char*> keyed[] = {
        {"--seed", "seed"},         {"--strategy", "strategy"}, {"--recover", "recover"},
        {"--pipeline", "pipeline"}, {"--frames", "frames"},     {"--joints", "joints"},
        {"--channels", "channels"}, {"--blocks", "blocks"},     {"--heads", "heads"},
        {"--tra-heads", "tra_heads"}, {"--tokens", "tokens"},   {"--recovered", "recovered"},
        {"--block", "block"},       {"--knn", "knn"},           {"--steps", "steps"},
        {"--lr", "lr"},             {"--batch", "batch"},       {"--samples", "samples"},
    };
    for (const auto& [flag, key] : keyed) {
        std::string k = key;
        cmd.add_option_function<std::string>(flag, [&flags, k](const std::string& v) { flags.values[k] = v; },
                                             "Overrides config key '" + k + "'");
    }
}

CommandOptions resolve(const Flags& flags) {
    CommandOptions options;
    options.run.model = preset_config(flags.preset);
    if (!flags.config.empty()) {
        options.overrides = posetok::read_config_file(flags.config);
    }
    for (const auto& [key, value] : flags.values) {
        options.overrides[key] = value;
    }
    posetok::apply_config(options.overrides, options.run);
    options.out_dir = flags.out;
    options.input = flags.input;
    options.model = flags.model;
    options.pred = flags.pred;
    options.gt = flags.gt;
    options.selection = flags.selection;
    options.detected2d = flags.detected2d;
    options.gt2d = flags.gt2d;
    options.baseline = flags.baseline;
    options.sweep_blocks = flags.sweep_blocks;
    options.sweep_tokens = flags.sweep_tokens;
    return options;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"posetok: temporal token pruning and recovery for pose transformers"};
    app.require_subcommand(1);

    Flags prune_flags, infer_flags, flops_flags, eval_flags, train_flags;

    auto* prune = app.add_subcommand("prune", "Select representative frames of each input record");
    add_common(*prune, prune_flags, "toy");
    prune->add_option("--input", prune_flags.input, "Pose file")->required();
    prune->add_option("--model", prune_flags.model, "Cluster the model's hidden tokens instead of raw poses");

    auto* infer = app.add_subcommand("infer", "Lift 2D pose records to 3D with a saved model");
    add_common(*infer, infer_flags, "toy");
    infer->add_option("--input", infer_flags.input, "2D pose file")->required();
    infer->add_option("--model", infer_flags.model, "Model file")->required();
    infer->add_flag("--baseline", infer_flags.baseline, "Run without pruning or recovery");

    auto* flops = app.add_subcommand("flops", "Analytic FLOPs and parameter report");
    add_common(*flops, flops_flags, "mixste");
    flops->add_option("--sweep-blocks", flops_flags.sweep_blocks, "Prune block values to sweep")->delimiter(',');
    flops->add_option("--sweep-tokens", flops_flags.sweep_tokens, "Token counts to sweep")->delimiter(',');

    auto* eval = app.add_subcommand("eval", "Compare predicted and ground-truth 3D poses");
    add_common(*eval, eval_flags, "toy");
    eval->add_option("--pred", eval_flags.pred, "Predicted 3D pose file")->required();
    eval->add_option("--gt", eval_flags.gt, "Ground-truth 3D pose file")->required();
    eval->add_option("--selection", eval_flags.selection, "Selected frames, one line per record");
    eval->add_option("--detected2d", eval_flags.detected2d, "Detected 2D poses for frame noise");
    eval->add_option("--gt2d", eval_flags.gt2d, "Ground-truth 2D poses for frame noise");

    auto* train = app.add_subcommand("train-toy", "Train the toy host on synthetic sequences");
    add_common(*train, train_flags, "toy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? posetok::kExitOk : posetok::kExitUsage;
    }

    using Command = void (*)(const CommandOptions&, std::ostream&);
    const std::pair<CLI::App*, std::pair<Flags*, Command>> commands[] = {
        {prune, {&prune_flags, posetok::cmd_prune}},
        {infer, {&infer_flags, posetok::cmd_infer}},
        {flops, {&flops_flags, posetok::cmd_flops}},
        {eval, {&eval_flags, posetok::cmd_eval}},
        {train, {&train_flags, posetok::cmd_train_toy}},
    };
    for (const auto& [sub, entry] : commands) {
        if (sub->parsed()) {
            const auto [flags, command] = entry;
            return posetok::run_guarded([&] { command(resolve(*flags), std::cout); }, std::cerr);
        }
    }
    return posetok::kExitUsage;
}
