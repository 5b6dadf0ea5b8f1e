// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "posetok/io.hpp"

namespace posetok {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

struct CommandOptions {
    RunConfig run;
    ConfigMap overrides;  // explicit settings, applied over a loaded model's config by `infer`
    std::filesystem::path out_dir = ".";
    std::filesystem::path input;
    std::filesystem::path model;
    std::filesystem::path pred;
    std::filesystem::path gt;
    std::filesystem::path selection;
    std::filesystem::path detected2d;
    std::filesystem::path gt2d;
    bool baseline = false;
    std::vector<std::size_t> sweep_blocks;
    std::vector<std::size_t> sweep_tokens;
};

/// Writes selection.txt, prune.json, histogram.csv and selection_matrix.txt.
void cmd_prune(const CommandOptions& options, std::ostream& log);
/// Writes pred.txt and, when pruning ran, selection.txt.
void cmd_infer(const CommandOptions& options, std::ostream& log);
/// Writes flops.txt and flops.json; adds sweep.txt and sweep.json when a sweep is requested.
void cmd_flops(const CommandOptions& options, std::ostream& log);
/// Writes eval.txt and eval.json.
void cmd_eval(const CommandOptions& options, std::ostream& log);
/// Writes model.bin, loss_curve.csv and train.json.
void cmd_train_toy(const CommandOptions& options, std::ostream& log);

/// Runs `body`, reporting exceptions on `err` and mapping them to exit codes.
int run_guarded(const std::function<void()>& body, std::ostream& err);

}  // namespace posetok
