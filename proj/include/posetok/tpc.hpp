// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "posetok/pose.hpp"
#include "posetok/tensor.hpp"

// Temporal token pruning: density-peaks clustering over spatially pooled frame
// tokens, plus the uniform / attention / motion baselines. Pruning only ever
// removes whole frames; the joint dimension is left intact.

namespace posetok {

enum class PruneStrategy { tpc, uniform, attention, motion };

std::string_view to_string(PruneStrategy strategy);
PruneStrategy parse_prune_strategy(std::string_view name);

struct PruneConfig {
    std::size_t tokens = 1;  // f, representative frames kept
    std::size_t knn = 2;     // k, neighbors for the local density
    std::size_t block = 1;   // n, prune after this block (1-based)
    PruneStrategy strategy = PruneStrategy::tpc;

    /// Checks 1 <= f <= F, 1 <= k < F (TPC only) and 1 <= n < L.
    void validate(std::size_t frames, std::size_t blocks) const;
};

/// max(2, F/10), clamped to [1, F-1].
std::size_t default_knn(std::size_t frames);

struct ClusterResult {
    IndexList selected_indexes;  // ascending
    std::vector<double> density;
    std::vector<double> delta;
    std::vector<double> score;
    IndexList cluster_label;  // frame index of the center each frame is assigned to
};

/// Mean over joints: F x J x C -> F x C.
template <typename T>
BasicTensor<T> spatial_pool(const BasicTensor<T>& tokens);

/// rho_i = exp(-(1/k) * sum of squared distances to the k nearest other tokens).
/// Throws ConfigError unless 1 <= k < F.
template <typename T>
std::vector<double> local_density(const BasicTensor<T>& pooled, std::size_t knn);

/// delta_i = distance to the nearest token of strictly higher effective density;
/// the top token gets its largest distance to any token. Effective density ranks
/// exact ties by lower frame index first.
template <typename T>
std::vector<double> min_distance_delta(const BasicTensor<T>& pooled, std::span<const double> density);

/// Frame ranks by (density desc, index asc); rank 0 is the densest.
std::vector<std::size_t> density_ranks(std::span<const double> density);

/// Top-f of score (ties to lower index), returned ascending.
IndexList top_scoring(std::span<const double> score, std::size_t count);

/// Runs the clustering and returns the f center rows (full J x C) in ascending frame order.
template <typename T>
std::pair<BasicTensor<T>, ClusterResult> select_tpc(const BasicTensor<T>& tokens, const PruneConfig& config);

/// Clustering statistics only, on pooled F x C features.
template <typename T>
ClusterResult cluster_pooled(const BasicTensor<T>& pooled, std::size_t tokens, std::size_t knn);

/// round(i * (F-1) / (f-1)); f == 1 yields the center frame F/2.
IndexList select_uniform(std::size_t frames, std::size_t tokens);

/// Top-f by attention score. Throws DimensionError if scores.size() != frames.
IndexList select_by_attention(std::size_t frames, std::span<const double> scores, std::size_t tokens);

/// Mean joint displacement against the previous frame (0 for frame 0).
std::vector<double> frame_motion(const PoseSequence& poses2d);

/// Top-f of frame_motion, ascending.
IndexList select_by_motion(const PoseSequence& poses2d, std::size_t tokens);

/// Mean joint distance between detected and ground-truth 2D poses over the selected frames.
double frame_noise(std::span<const std::size_t> selected, const PoseSequence& detected, const PoseSequence& truth);

/// Rows of frames listed in `frames` of an F x J x C grid.
template <typename T>
BasicTensor<T> gather_frames(const BasicTensor<T>& tokens, std::span<const std::size_t> frames);

}  // namespace posetok
