// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "posetok/host.hpp"

namespace posetok {

/// Attention (4ND^2 + 2N^2D) plus feed-forward with 2x expansion (4ND^2).
/// One multiply-accumulate counts as one operation.
std::uint64_t block_flops(std::uint64_t tokens, std::uint64_t dim);

std::uint64_t attention_flops(std::uint64_t tokens, std::uint64_t dim);
std::uint64_t ffn_flops(std::uint64_t tokens, std::uint64_t dim);

struct BlockFlops {
    std::size_t frames = 0;  // frames processed by this block
    std::uint64_t spatial_attention = 0;
    std::uint64_t temporal_attention = 0;
    std::uint64_t ffn = 0;  // both sub-blocks

    std::uint64_t total() const { return spatial_attention + temporal_attention + ffn; }
};

struct ParamCount {
    std::size_t host = 0;
    std::size_t tra = 0;

    std::size_t total() const { return host + tra; }
};

struct FlopsReport {
    std::vector<BlockFlops> blocks;
    std::uint64_t embed = 0;
    std::uint64_t head = 0;
    std::uint64_t tra = 0;
    std::uint64_t total = 0;           // this variant
    std::uint64_t baseline_total = 0;  // same config without pruning or recovery
    double reduction_ratio = 0.0;      // 1 - total / baseline_total
    ParamCount params;
};

/// Frames seen by blocks after the prune point: f, or min(f + 1, F) for seq2frame.
std::size_t frames_after_prune(const ModelConfig& config);

/// One multi-head cross-attention of `queries` rows over `keys` rows, per joint.
std::uint64_t tra_flops(std::size_t queries, std::size_t keys, std::size_t channels);

FlopsReport model_flops(const ModelConfig& config, bool pruned);

/// Exact parameter totals from layer dimensions; host excludes the recovery module.
ParamCount param_count(const ModelConfig& config);

struct SweepTable {
    std::vector<std::size_t> block_values;
    std::vector<std::size_t> token_values;
    std::vector<std::vector<double>> ratios;  // [block][token]
};

/// Reduction ratio for every (n, f) pair; throws ConfigError for invalid pairs.
SweepTable sweep_reduction(const ModelConfig& config, std::span<const std::size_t> block_values,
                           std::span<const std::size_t> token_values);

}  // namespace posetok
