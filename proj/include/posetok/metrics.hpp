// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "posetok/pose.hpp"

namespace posetok {

constexpr double kPckThreshold = 150.0;
constexpr std::size_t kAucThresholds = 31;

/// Mean per-joint Euclidean error over all frames, or over `frames` when given.
double mpjpe(const PoseSequence& pred, const PoseSequence& gt, std::optional<std::span<const std::size_t>> frames = {});

/// Fraction of joints with error strictly below `threshold`.
double pck(const PoseSequence& pred, const PoseSequence& gt, double threshold = kPckThreshold);

/// Mean PCK over 31 evenly spaced thresholds on [0, 150]. At threshold 0 the
/// right limit is used, so exact hits count as correct.
double auc(const PoseSequence& pred, const PoseSequence& gt);

std::vector<double> auc_thresholds();

struct EvalReport {
    double mpjpe_full = 0.0;
    std::optional<double> mpjpe_pruned;    // frames not selected; empty when every frame is selected
    std::optional<double> mpjpe_selected;  // empty without a selection
    double mpjpe_center = 0.0;
    double pck = 0.0;
    double auc = 0.0;
    std::optional<double> gap;  // pruned - selected
    std::optional<double> frame_noise;
};

/// Full/pruned/selected/center decomposition plus PCK and AUC. Frame noise is
/// filled in when both 2D sequences are supplied along with a selection.
EvalReport evaluate(const PoseSequence& pred, const PoseSequence& gt,
                    std::optional<std::span<const std::size_t>> selection = {},
                    const PoseSequence* detected2d = nullptr, const PoseSequence* gt2d = nullptr);

struct SelectionStats {
    std::size_t frames = 0;
    std::vector<std::size_t> histogram;        // runs selecting each frame
    std::vector<std::vector<std::uint8_t>> matrix;  // runs x frames, 1 where selected
};

SelectionStats selection_stats(std::span<const IndexList> runs, std::size_t frames);

}  // namespace posetok
