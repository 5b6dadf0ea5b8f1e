// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/metrics.hpp"

#include <cmath>
#include <string>

#include "posetok/tpc.hpp"

namespace posetok {

namespace {

void check_shapes(const PoseSequence& pred, const PoseSequence& gt) {
    if (pred.tensor().shape() != gt.tensor().shape()) {
        throw DimensionError("prediction " + shape_to_string(pred.tensor().shape()) + " does not match ground truth " +
                             shape_to_string(gt.tensor().shape()));
    }
}

double joint_error(const PoseSequence& pred, const PoseSequence& gt, std::size_t t, std::size_t j) {
    double sq = 0.0;
    for (std::size_t d = 0; d < pred.dims(); ++d) {
        const double diff = static_cast<double>(pred.at(t, j, d)) - static_cast<double>(gt.at(t, j, d));
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

std::vector<double> all_errors(const PoseSequence& pred, const PoseSequence& gt) {
    check_shapes(pred, gt);
    std::vector<double> errors;
    errors.reserve(pred.frames() * pred.joints());
    for (std::size_t t = 0; t < pred.frames(); ++t) {
        for (std::size_t j = 0; j < pred.joints(); ++j) {
            errors.push_back(joint_error(pred, gt, t, j));
        }
    }
    return errors;
}

double fraction_below(const std::vector<double>& errors, double threshold, bool inclusive) {
    std::size_t hits = 0;
    for (double e : errors) {
        if (e < threshold || (inclusive && e <= threshold)) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(errors.size());
}

}  // namespace

double mpjpe(const PoseSequence& pred, const PoseSequence& gt, std::optional<std::span<const std::size_t>> frames) {
    check_shapes(pred, gt);
    IndexList all;
    if (!frames) {
        all.resize(pred.frames());
        for (std::size_t t = 0; t < all.size(); ++t) {
            all[t] = t;
        }
        frames = std::span<const std::size_t>(all);
    }
    if (frames->empty()) {
        throw DimensionError("mpjpe over an empty frame subset");
    }
    double total = 0.0;
    for (std::size_t t : *frames) {
        if (t >= pred.frames()) {
            throw DimensionError("frame " + std::to_string(t) + " out of range for " +
                                 std::to_string(pred.frames()) + " frames");
        }
        for (std::size_t j = 0; j < pred.joints(); ++j) {
            total += joint_error(pred, gt, t, j);
        }
    }
    return total / static_cast<double>(frames->size() * pred.joints());
}

double pck(const PoseSequence& pred, const PoseSequence& gt, double threshold) {
    if (!(threshold > 0.0)) {
        throw ConfigError("PCK threshold must be positive");
    }
    return fraction_below(all_errors(pred, gt), threshold, false);
}

std::vector<double> auc_thresholds() {
    std::vector<double> thresholds(kAucThresholds);
    for (std::size_t i = 0; i < kAucThresholds; ++i) {
        thresholds[i] = kPckThreshold * static_cast<double>(i) / static_cast<double>(kAucThresholds - 1);
    }
    return thresholds;
}

double auc(const PoseSequence& pred, const PoseSequence& gt) {
    const std::vector<double> errors = all_errors(pred, gt);
    double total = 0.0;
    for (double t : auc_thresholds()) {
        total += fraction_below(errors, t, t == 0.0);
    }
    return total / static_cast<double>(kAucThresholds);
}

EvalReport evaluate(const PoseSequence& pred, const PoseSequence& gt,
                    std::optional<std::span<const std::size_t>> selection, const PoseSequence* detected2d,
                    const PoseSequence* gt2d) {
    check_shapes(pred, gt);
    EvalReport report;
    report.mpjpe_full = mpjpe(pred, gt);
    const std::size_t center = pred.frames() / 2;
    report.mpjpe_center = mpjpe(pred, gt, std::span<const std::size_t>(&center, 1));
    report.pck = pck(pred, gt);
    report.auc = auc(pred, gt);
    if (!selection) {
        return report;
    }
    std::vector<bool> chosen(pred.frames(), false);
    for (std::size_t t : *selection) {
        if (t >= pred.frames()) {
            throw DimensionError("selected frame " + std::to_string(t) + " out of range for " +
                                 std::to_string(pred.frames()) + " frames");
        }
        if (chosen[t]) {
            throw DimensionError("selected frame " + std::to_string(t) + " listed twice");
        }
        chosen[t] = true;
    }
    IndexList pruned;
    for (std::size_t t = 0; t < pred.frames(); ++t) {
        if (!chosen[t]) {
            pruned.push_back(t);
        }
    }
    if (!selection->empty()) {
        report.mpjpe_selected = mpjpe(pred, gt, *selection);
    }
    if (!pruned.empty()) {
        report.mpjpe_pruned = mpjpe(pred, gt, std::span<const std::size_t>(pruned));
    }
    if (report.mpjpe_selected && report.mpjpe_pruned) {
        report.gap = *report.mpjpe_pruned - *report.mpjpe_selected;
    }
    if (detected2d != nullptr && gt2d != nullptr && !selection->empty()) {
        report.frame_noise = frame_noise(*selection, *detected2d, *gt2d);
    }
    return report;
}

SelectionStats selection_stats(std::span<const IndexList> runs, std::size_t frames) {
    SelectionStats stats;
    stats.frames = frames;
    stats.histogram.assign(frames, 0);
    stats.matrix.reserve(runs.size());
    for (const auto& run : runs) {
        std::vector<std::uint8_t> row(frames, 0);
        for (std::size_t t : run) {
            if (t >= frames) {
                throw DimensionError("selected frame " + std::to_string(t) + " out of range for " +
                                     std::to_string(frames) + " frames");
            }
            row[t] = 1;
            ++stats.histogram[t];
        }
        stats.matrix.push_back(std::move(row));
    }
    return stats;
}

}  // namespace posetok
