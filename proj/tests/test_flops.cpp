// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "posetok/flops.hpp"

using namespace posetok;

namespace {

/// Whole-model count by summing per-matmul block enumerations, independent of model_flops.
std::uint64_t enumerated_total(const ModelConfig& cfg, bool pruned) {
    const std::uint64_t J = cfg.joints, C = cfg.channels, F = cfg.frames;
    const std::uint64_t kept = pruned ? frames_after_prune(cfg) : F;
    std::uint64_t total = F * J * 2 * C;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        const std::uint64_t frames = b < cfg.prune_block ? F : kept;
        total += frames * oracle::block_ops(J, C) + J * oracle::block_ops(frames, C);
    }
    std::uint64_t head_frames = cfg.pipeline == Pipeline::seq2seq ? F : 1;
    if (pruned && cfg.uses_tra()) {
        const std::uint64_t q = cfg.recovered_frames();
        // query and output projections over q rows, key/value over f rows, two f x q products
        total += J * (2 * q * C * C + 2 * kept * C * C + 2 * q * kept * C);
        head_frames = q;
    }
    return total + head_frames * J * C * 3;
}

}  // namespace

TEST(BlockFlops, HandExamples) {
    EXPECT_EQ(block_flops(1, 1), 10u);
    EXPECT_EQ(block_flops(243, 512), 570074112u);
    EXPECT_EQ(block_flops(81, 512), 176587776u);
}

TEST(BlockFlops, SplitsIntoAttentionAndFfn) {
    EXPECT_EQ(attention_flops(3, 4), 4u * 3 * 16 + 2u * 9 * 4);
    EXPECT_EQ(ffn_flops(3, 4), 4u * 3 * 16);
    EXPECT_EQ(block_flops(3, 4), attention_flops(3, 4) + ffn_flops(3, 4));
}

TEST(BlockFlops, MatchesPerMatmulEnumeration) {
    for (std::uint64_t n = 1; n <= 300; n += 7) {
        for (std::uint64_t d : {1, 2, 8, 64, 256, 512}) {
            EXPECT_EQ(block_flops(n, d), oracle::block_ops(n, d)) << n << " " << d;
        }
    }
}

TEST(ModelFlops, MatchesEnumeratedTotal) {
    for (ModelConfig cfg : {ModelConfig::mixste_like(), ModelConfig::motionbert_like(), ModelConfig::toy()}) {
        for (auto pipeline : {Pipeline::seq2seq, Pipeline::seq2frame}) {
            for (auto recover : {RecoverStrategy::tra, RecoverStrategy::nearest}) {
                cfg.pipeline = pipeline;
                cfg.recover_strategy = recover;
                EXPECT_EQ(model_flops(cfg, true).total, enumerated_total(cfg, true));
                EXPECT_EQ(model_flops(cfg, false).total, enumerated_total(cfg, false));
            }
        }
    }
}

TEST(ModelFlops, ReportPartsSumToTotal) {
    const FlopsReport r = model_flops(ModelConfig::mixste_like(), true);
    std::uint64_t sum = r.embed + r.head + r.tra;
    for (const auto& b : r.blocks) {
        sum += b.total();
    }
    EXPECT_EQ(sum, r.total);
    EXPECT_EQ(r.blocks.size(), 8u);
    EXPECT_EQ(r.blocks[2].frames, 243u);
    EXPECT_EQ(r.blocks[3].frames, 81u);
    EXPECT_DOUBLE_EQ(r.reduction_ratio, 1.0 - static_cast<double>(r.total) / static_cast<double>(r.baseline_total));
}

TEST(ModelFlops, FullSelectionWithoutTraEqualsBaseline) {
    for (ModelConfig cfg : {ModelConfig::mixste_like(), ModelConfig::toy()}) {
        cfg.tokens = cfg.frames;
        for (auto recover : {RecoverStrategy::nearest, RecoverStrategy::linear}) {
            cfg.recover_strategy = recover;
            const FlopsReport r = model_flops(cfg, true);
            EXPECT_EQ(r.total, r.baseline_total);
            EXPECT_EQ(r.reduction_ratio, 0.0);
        }
        cfg.recover_strategy = RecoverStrategy::tra;
        cfg.pipeline = Pipeline::seq2frame;
        EXPECT_EQ(model_flops(cfg, true).reduction_ratio, 0.0);
    }
}

TEST(ModelFlops, PrunedNeverExceedsBaselineWithoutTra) {
    ModelConfig cfg = ModelConfig::mixste_like();
    cfg.recover_strategy = RecoverStrategy::nearest;
    for (std::size_t f = 1; f <= cfg.frames; f += 11) {
        cfg.tokens = f;
        const FlopsReport r = model_flops(cfg, true);
        EXPECT_LE(r.total, r.baseline_total);
        EXPECT_GE(r.reduction_ratio, 0.0);
        EXPECT_LT(r.reduction_ratio, 1.0);
    }
}

TEST(ModelFlops, ReductionStrictlyDecreasingInBlockAndTokens) {
    const ModelConfig cfg = ModelConfig::mixste_like();
    const std::vector<std::size_t> blocks = {1, 2, 3, 4, 5, 6, 7};
    const std::vector<std::size_t> tokens = {1, 9, 16, 27, 61, 81, 135, 200, 242};
    const SweepTable t = sweep_reduction(cfg, blocks, tokens);
    ASSERT_EQ(t.ratios.size(), blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        for (std::size_t j = 0; j < tokens.size(); ++j) {
            if (i > 0) {
                EXPECT_LT(t.ratios[i][j], t.ratios[i - 1][j]);
            }
            if (j > 0) {
                EXPECT_LT(t.ratios[i][j], t.ratios[i][j - 1]);
            }
        }
    }
}

TEST(ModelFlops, SweepMatchesSingleReports) {
    const ModelConfig base = ModelConfig::motionbert_like();
    const std::vector<std::size_t> blocks = {1, 3};
    const std::vector<std::size_t> tokens = {27, 81};
    const SweepTable t = sweep_reduction(base, blocks, tokens);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        for (std::size_t j = 0; j < tokens.size(); ++j) {
            ModelConfig cfg = base;
            cfg.prune_block = blocks[i];
            cfg.tokens = tokens[j];
            EXPECT_EQ(t.ratios[i][j], model_flops(cfg, true).reduction_ratio);
        }
    }
}

TEST(ModelFlops, InvalidConfigThrows) {
    ModelConfig cfg = ModelConfig::mixste_like();
    cfg.prune_block = cfg.blocks;
    EXPECT_THROW(model_flops(cfg, true), ConfigError);
    const std::vector<std::size_t> bad = {8};
    const std::vector<std::size_t> tokens = {81};
    EXPECT_THROW(sweep_reduction(ModelConfig::mixste_like(), bad, tokens), ConfigError);
}

TEST(ParamCount, SingleTinyBlockByHand) {
    ModelConfig cfg;
    cfg.frames = 2;
    cfg.joints = 1;
    cfg.channels = 1;
    cfg.blocks = 2;
    cfg.heads = 1;
    cfg.tra_heads = 1;
    cfg.tokens = 1;
    cfg.knn = 1;
    // per sub-block: 2 norms (4), attention q/k/v/o weights + biases (8), fc1 1->2 (4), fc2 2->1 (3)
    const std::size_t sub_block = 4 + 8 + 4 + 3;
    // embed 2->1 (3), joint table 1, temporal table 2, 2 blocks x 2 sub-blocks, final norm 2, head 1->3 (6)
    EXPECT_EQ(param_count(cfg).host, 3u + 1 + 2 + 4 * sub_block + 2 + 6);
    // queries F x C plus four bias-free projections
    EXPECT_EQ(param_count(cfg).tra, 2u + 4);
}

TEST(ParamCount, TpcIsParameterFree) {
    ModelConfig cfg = ModelConfig::mixste_like();
    cfg.recover_strategy = RecoverStrategy::nearest;
    for (auto s : {PruneStrategy::tpc, PruneStrategy::uniform, PruneStrategy::attention, PruneStrategy::motion}) {
        cfg.prune_strategy = s;
        EXPECT_EQ(param_count(cfg).total(), param_count(cfg).host);
        EXPECT_EQ(param_count(cfg).host, param_count(ModelConfig::mixste_like()).host);
    }
}

TEST(ParamCount, TraOverheadSmall) {
    const ParamCount p = param_count(ModelConfig::mixste_like());
    EXPECT_EQ(p.tra, 243u * 512 + 4u * 512 * 512);
    EXPECT_LE(static_cast<double>(p.tra) / static_cast<double>(p.host), 0.04);
}
