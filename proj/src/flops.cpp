// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/flops.hpp"

#include <algorithm>

namespace posetok {

std::uint64_t attention_flops(std::uint64_t tokens, std::uint64_t dim) {
    return 4 * tokens * dim * dim + 2 * tokens * tokens * dim;
}

std::uint64_t ffn_flops(std::uint64_t tokens, std::uint64_t dim) {
    return 4 * tokens * dim * dim;
}

std::uint64_t block_flops(std::uint64_t tokens, std::uint64_t dim) {
    return attention_flops(tokens, dim) + ffn_flops(tokens, dim);
}

std::size_t frames_after_prune(const ModelConfig& config) {
    if (config.pipeline == Pipeline::seq2frame) {
        return std::min(config.tokens + 1, config.frames);
    }
    return config.tokens;
}

std::uint64_t tra_flops(std::size_t queries, std::size_t keys, std::size_t channels) {
    const std::uint64_t q = queries, k = keys, c = channels;
    return 2 * q * c * c + 2 * k * c * c + 2 * q * k * c;
}

namespace {

BlockFlops one_block(std::size_t frames, const ModelConfig& config) {
    const std::uint64_t f = frames, j = config.joints, c = config.channels;
    BlockFlops b;
    b.frames = frames;
    b.spatial_attention = f * attention_flops(j, c);
    b.temporal_attention = j * attention_flops(f, c);
    b.ffn = f * ffn_flops(j, c) + j * ffn_flops(f, c);
    return b;
}

std::uint64_t variant_total(const ModelConfig& config, bool pruned, FlopsReport* report) {
    const std::uint64_t j = config.joints, c = config.channels;
    std::uint64_t total = static_cast<std::uint64_t>(config.frames) * j * 2 * c;
    if (report != nullptr) {
        report->embed = total;
    }
    for (std::size_t b = 0; b < config.blocks; ++b) {
        const bool after_prune = pruned && b >= config.prune_block;
        BlockFlops block = one_block(after_prune ? frames_after_prune(config) : config.frames, config);
        total += block.total();
        if (report != nullptr) {
            report->blocks.push_back(block);
        }
    }
    std::uint64_t tra = 0;
    std::uint64_t head_frames = config.pipeline == Pipeline::seq2seq ? config.frames : 1;
    if (pruned && config.uses_tra()) {
        tra = j * tra_flops(config.recovered_frames(), config.tokens, config.channels);
        head_frames = config.recovered_frames();
    }
    const std::uint64_t head = head_frames * j * c * 3;
    total += tra + head;
    if (report != nullptr) {
        report->tra = tra;
        report->head = head;
        report->total = total;
    }
    return total;
}

}  // namespace

FlopsReport model_flops(const ModelConfig& config, bool pruned) {
    config.validate();
    FlopsReport report;
    variant_total(config, pruned, &report);
    report.baseline_total = variant_total(config, false, nullptr);
    report.reduction_ratio =
        1.0 - static_cast<double>(report.total) / static_cast<double>(report.baseline_total);
    report.params = param_count(config);
    return report;
}

ParamCount param_count(const ModelConfig& config) {
    const std::size_t c = config.channels;
    const std::size_t sub_block = 4 * c + 4 * (c * c + c) + (2 * c * c + 2 * c) + (2 * c * c + c);
    ParamCount count;
    count.host = (2 * c + c) + config.joints * c + config.frames * c + config.blocks * 2 * sub_block + 2 * c +
                 (3 * c + 3);
    if (config.uses_tra()) {
        count.tra = config.recovered_frames() * c + 4 * c * c;
    }
    return count;
}

SweepTable sweep_reduction(const ModelConfig& config, std::span<const std::size_t> block_values,
                           std::span<const std::size_t> token_values) {
    SweepTable table;
    table.block_values.assign(block_values.begin(), block_values.end());
    table.token_values.assign(token_values.begin(), token_values.end());
    for (std::size_t n : block_values) {
        std::vector<double> row;
        for (std::size_t f : token_values) {
            ModelConfig cfg = config;
            cfg.prune_block = n;
            cfg.tokens = f;
            row.push_back(model_flops(cfg, true).reduction_ratio);
        }
        table.ratios.push_back(std::move(row));
    }
    return table;
}

}  // namespace posetok
