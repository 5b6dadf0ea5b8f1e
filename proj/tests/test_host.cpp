// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "posetok/flops.hpp"
#include "posetok/grad_check.hpp"
#include "posetok/host.hpp"
#include "posetok/toy.hpp"

using namespace posetok;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.frames = 7;
    cfg.joints = 3;
    cfg.channels = 8;
    cfg.blocks = 2;
    cfg.heads = 2;
    cfg.tra_heads = 2;
    cfg.prune_block = 1;
    cfg.tokens = 3;
    return cfg;
}

PoseSequence random_poses(std::size_t frames, std::size_t joints, std::size_t dims, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    return PoseSequence(oracle::random_tensor<float>({frames, joints, dims}, gen));
}

TrainingSample random_sample(const ModelConfig& cfg, std::uint64_t seed) {
    return {random_poses(cfg.frames, cfg.joints, 2, seed), random_poses(cfg.frames, cfg.joints, 3, seed + 1)};
}

double max_abs_diff(const PoseSequence& a, const PoseSequence& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.tensor().size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.tensor()[i]) - b.tensor()[i]));
    }
    return m;
}

/// Full-model loss whose selection is fixed, so finite differences never cross a selection change.
LossFunction model_loss(HostModel<double>& model, const TrainingSample& sample, const ForwardOptions& options) {
    return [&model, &sample, options](bool with_grad) {
        return sample_loss(model, sample, with_grad, 1.0, options);
    };
}

}  // namespace

TEST(ModelConfig, PresetsAreValid) {
    EXPECT_NO_THROW(ModelConfig::mixste_like().validate());
    EXPECT_NO_THROW(ModelConfig::motionbert_like().validate());
    EXPECT_NO_THROW(ModelConfig::toy().validate());
}

TEST(ModelConfig, RejectsViolatedInvariants) {
    ModelConfig cfg = small_config();
    cfg.prune_block = 2;  // n must be < L
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.tokens = 8;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.heads = 3;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.recovered = 5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.tokens = 1;
    cfg.recover_strategy = RecoverStrategy::linear;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Embed, ZeroInputWithZeroTablesGivesBias) {
    HostModel<float> model(small_config());
    model.init(1);
    auto params = model.parameters();
    // order: embed weight, embed bias, joint table, temporal table
    std::ranges::fill(params[3]->data(), 0.0f);
    std::ranges::fill(params[2]->data(), 0.0f);
    const Tensor& bias = *params[1];
    Tensor grid = model.embed(PoseSequence(7, 3, 2));
    ASSERT_EQ(grid.shape(), (Shape{7, 3, 8}));
    for (std::size_t t = 0; t < 7; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
            for (std::size_t c = 0; c < 8; ++c) {
                EXPECT_EQ(grid.at(t, j, c), bias[c]);
            }
        }
    }
}

TEST(Embed, SingleFrameUsesFirstTemporalRow) {
    ModelConfig cfg = small_config();
    cfg.frames = 1;
    cfg.tokens = 1;
    cfg.prune_strategy = PruneStrategy::uniform;
    cfg.recover_strategy = RecoverStrategy::nearest;
    HostModel<float> model(cfg);
    model.init(2);
    auto params = model.parameters();
    std::ranges::fill(params[1]->data(), 0.0f);
    Tensor grid = model.embed(PoseSequence(1, 3, 2));
    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t c = 0; c < 8; ++c) {
            EXPECT_EQ(grid.at(0, j, c), params[2]->at(j, c) + params[3]->at(0, c));
        }
    }
}

TEST(Embed, ShapeMismatchThrows) {
    HostModel<float> model(small_config());
    model.init(3);
    EXPECT_THROW(model.embed(PoseSequence(6, 3, 2)), DimensionError);
    EXPECT_THROW(model.embed(PoseSequence(7, 3, 3)), DimensionError);
}

TEST(Embed, GradientMatchesFiniteDifferences) {
    HostModel<double> model(small_config());
    model.init(4);
    const TrainingSample sample = random_sample(model.config(), 5);
    auto params = model.parameters();
    std::vector<Tensor64*> embed_params(params.begin(), params.begin() + 4);
    ForwardOptions options;
    options.baseline = true;
    EXPECT_LT(grad_check(model_loss(model, sample, options), embed_params, 1e-5).max_relative_error, 1e-3);
}

TEST(Forward, Seq2seqShapeForRandomConfigs) {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 10; ++trial) {
        ModelConfig cfg = small_config();
        cfg.frames = 4 + gen() % 8;
        cfg.joints = 1 + gen() % 4;
        cfg.blocks = 2 + gen() % 2;
        cfg.prune_block = 1 + gen() % (cfg.blocks - 1);
        cfg.tokens = 2 + gen() % (cfg.frames - 1);
        cfg.prune_strategy = static_cast<PruneStrategy>(gen() % 4);
        cfg.recover_strategy = static_cast<RecoverStrategy>(gen() % 3);
        HostModel<float> model(cfg);
        model.init(trial);
        PoseSequence out = forward_seq2seq(random_poses(cfg.frames, cfg.joints, 2, trial), model);
        EXPECT_EQ(out.frames(), cfg.frames);
        EXPECT_EQ(out.joints(), cfg.joints);
        EXPECT_EQ(out.dims(), 3u);
    }
}

TEST(Forward, Seq2frameOutputIsOneFiniteFrame) {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 10; ++trial) {
        ModelConfig cfg = small_config();
        cfg.pipeline = Pipeline::seq2frame;
        cfg.tokens = 1 + gen() % cfg.frames;
        cfg.prune_strategy = static_cast<PruneStrategy>(gen() % 4);
        HostModel<float> model(cfg);
        model.init(trial);
        PoseSequence out = forward_seq2frame(random_poses(cfg.frames, cfg.joints, 2, 100 + trial), model);
        EXPECT_EQ(out.frames(), 1u);
        for (float v : out.tensor().data()) {
            EXPECT_TRUE(std::isfinite(v));
        }
    }
}

TEST(Forward, PipelineMismatchThrows) {
    HostModel<float> model(small_config());
    model.init(8);
    EXPECT_THROW(forward_seq2frame(random_poses(7, 3, 2, 1), model), ConfigError);
}

TEST(Forward, NoPruneEquivalenceSeq2seq) {
    for (auto recover : {RecoverStrategy::nearest, RecoverStrategy::linear}) {
        ModelConfig cfg = ModelConfig::toy();
        cfg.tokens = cfg.frames;
        cfg.recover_strategy = recover;
        HostModel<float> model(cfg);
        model.init(9);
        const PoseSequence in = random_poses(cfg.frames, cfg.joints, 2, 10);
        EXPECT_LE(max_abs_diff(forward_seq2seq(in, model), forward_unpruned(in, model)), 1e-5);
    }
}

TEST(Forward, NoPruneEquivalenceSeq2frame) {
    ModelConfig cfg = ModelConfig::toy();
    cfg.tokens = cfg.frames;
    cfg.pipeline = Pipeline::seq2frame;
    HostModel<float> model(cfg);
    model.init(11);
    const PoseSequence in = random_poses(cfg.frames, cfg.joints, 2, 12);
    EXPECT_LE(max_abs_diff(forward_seq2frame(in, model), forward_unpruned(in, model)), 1e-5);
}

TEST(Forward, Seq2frameCenterDedup) {
    ModelConfig cfg = small_config();
    cfg.pipeline = Pipeline::seq2frame;
    HostModel<float> model(cfg);
    model.init(13);
    const PoseSequence in = random_poses(7, 3, 2, 14);
    ForwardCache<float> cache;
    ForwardOptions with_center;
    with_center.selection = IndexList{1, 3, 5};
    model.forward(in, &cache, with_center);
    EXPECT_EQ(cache.kept_frames, 3u);
    EXPECT_EQ(cache.kept_order, (IndexList{1, 3, 5}));
    ForwardOptions without_center;
    without_center.selection = IndexList{0, 2, 6};
    model.forward(in, &cache, without_center);
    EXPECT_EQ(cache.kept_frames, 4u);
    EXPECT_EQ(cache.kept_order, (IndexList{3, 0, 2, 6}));
}

TEST(Forward, DeterministicBitIdentical) {
    for (auto strategy : {PruneStrategy::tpc, PruneStrategy::uniform, PruneStrategy::attention, PruneStrategy::motion}) {
        ModelConfig cfg = ModelConfig::toy();
        cfg.prune_strategy = strategy;
        HostModel<float> a(cfg), b(cfg);
        a.init(15);
        b.init(15);
        const PoseSequence in = random_poses(cfg.frames, cfg.joints, 2, 16);
        const PoseSequence first = forward_seq2seq(in, a);
        EXPECT_EQ(first, forward_seq2seq(in, a));
        EXPECT_EQ(first, forward_seq2seq(in, b));
    }
}

TEST(Forward, DifferentSeedsDiffer) {
    HostModel<float> a(small_config()), b(small_config());
    a.init(1);
    b.init(2);
    const PoseSequence in = random_poses(7, 3, 2, 3);
    EXPECT_NE(forward_seq2seq(in, a), forward_seq2seq(in, b));
}

TEST(AttentionScores, SumToOneAndNonnegative) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ModelConfig cfg = ModelConfig::toy();
        HostModel<float> model(cfg);
        model.init(seed);
        const auto scores = temporal_attention_scores(model, random_poses(cfg.frames, cfg.joints, 2, seed), 1);
        ASSERT_EQ(scores.size(), cfg.frames);
        double s = 0.0;
        for (double v : scores) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-5);
    }
}

TEST(AttentionScores, SingleFrameIsOne) {
    ModelConfig cfg = small_config();
    cfg.frames = 1;
    cfg.tokens = 1;
    cfg.prune_strategy = PruneStrategy::attention;
    cfg.recover_strategy = RecoverStrategy::nearest;
    HostModel<float> model(cfg);
    model.init(17);
    const auto scores = temporal_attention_scores(model, random_poses(1, 3, 2, 18), 1);
    ASSERT_EQ(scores.size(), 1u);
    EXPECT_NEAR(scores[0], 1.0, 1e-12);
}

TEST(AttentionScores, MatchRecomputationFromStoredMaps) {
    ModelConfig cfg = small_config();
    cfg.blocks = 3;
    cfg.prune_block = 2;
    HostModel<double> model(cfg);
    model.init(19);
    const PoseSequence in = random_poses(cfg.frames, cfg.joints, 2, 20);
    ForwardCache<double> cache;
    ForwardOptions options;
    options.baseline = true;
    model.forward(in, &cache, options);
    for (std::size_t block = 1; block <= 2; ++block) {
        const auto& probs = cache.blocks[block - 1].temporal.attention.probs;
        ASSERT_EQ(probs.size(), cfg.joints * cfg.heads);
        std::vector<double> expected(cfg.frames, 0.0);
        for (const auto& p : probs) {
            // every row of every map is stochastic
            for (std::size_t r = 0; r < p.rows(); ++r) {
                double row = 0.0;
                for (std::size_t c = 0; c < p.cols(); ++c) {
                    row += p.at(r, c);
                    expected[c] += p.at(r, c) / static_cast<double>(p.rows() * probs.size());
                }
                EXPECT_NEAR(row, 1.0, 1e-5);
            }
        }
        const auto scores = model.temporal_attention_scores(in, block);
        for (std::size_t t = 0; t < cfg.frames; ++t) {
            EXPECT_NEAR(scores[t], expected[t], 1e-12);
        }
    }
    EXPECT_THROW(model.temporal_attention_scores(in, 0), ConfigError);
    EXPECT_THROW(model.temporal_attention_scores(in, 3), ConfigError);
}

TEST(Gradients, SingleBlockMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SpatioTemporalBlock<double> block(8, 2);
        Rng rng(seed);
        block.init(rng);
        std::mt19937_64 gen(seed + 50);
        Tensor64 x = oracle::random_tensor<double>({4 * 3, 8}, gen);
        Tensor64 target = oracle::random_tensor<double>({4 * 3, 8}, gen);
        std::vector<Tensor64*> params;
        block.collect_parameters(params);
        params.push_back(&x);
        auto loss = [&](bool with_grad) {
            BlockCache<double> cache;
            Tensor64 grad;
            const double value = oracle::mean_row_distance(block.forward(x, 4, 3, &cache), target, grad);
            if (with_grad) {
                Tensor64 dx = block.backward(cache, grad);
                for (std::size_t i = 0; i < dx.size(); ++i) {
                    x.grad()[i] += dx[i];
                }
            }
            return value;
        };
        EXPECT_LT(grad_check(loss, params, 1e-5).max_relative_error, 1e-3) << "seed " << seed;
    }
}

TEST(Gradients, FullModelMatchesFiniteDifferences) {
    struct Variant {
        Pipeline pipeline;
        RecoverStrategy recover;
        bool baseline;
    };
    const Variant variants[] = {
        {Pipeline::seq2seq, RecoverStrategy::tra, false},
        {Pipeline::seq2seq, RecoverStrategy::linear, false},
        {Pipeline::seq2frame, RecoverStrategy::tra, false},
        {Pipeline::seq2seq, RecoverStrategy::tra, true},
    };
    std::uint64_t seed = 0;
    for (const auto& v : variants) {
        ModelConfig cfg = small_config();
        cfg.pipeline = v.pipeline;
        cfg.recover_strategy = v.recover;
        HostModel<double> model(cfg);
        model.init(seed);
        // nonzero recovery queries so their gradient path is exercised
        if (model.recovery()) {
            std::mt19937_64 gen(seed);
            model.recovery()->queries() = oracle::random_tensor<double>(model.recovery()->queries().shape(), gen, 0.3);
        }
        const TrainingSample sample = random_sample(cfg, 60 + seed);
        ForwardOptions options;
        options.baseline = v.baseline;
        options.selection = IndexList{0, 2, 5};
        const auto params = model.parameters();
        EXPECT_LT(grad_check(model_loss(model, sample, options), params, 1e-5).max_relative_error, 1e-3)
            << "variant " << seed;
        ++seed;
    }
}

TEST(Training, ZeroLearningRateLeavesParametersUnchanged) {
    const ModelConfig cfg = small_config();
    HostModel<float> model(cfg);
    model.init(21);
    std::vector<Tensor> before;
    for (const auto* p : model.parameters()) {
        before.push_back(*p);
    }
    const std::vector<TrainingSample> batch = {random_sample(cfg, 22), random_sample(cfg, 23)};
    train_step(model, batch, 0.0f);
    const auto after = model.parameters();
    for (std::size_t i = 0; i < before.size(); ++i) {
        EXPECT_EQ(before[i], *after[i]) << "parameter " << i;
    }
}

TEST(Training, LossNonIncreasingOnRepeatedBatch) {
    ModelConfig cfg = ModelConfig::toy();
    cfg.prune_strategy = PruneStrategy::uniform;
    HostModel<float> model(cfg);
    model.init(24);
    const auto batch = make_toy_dataset(cfg.frames, cfg.joints, 2, 25);
    double previous = INFINITY;
    for (int step = 0; step < 50; ++step) {
        const double loss = train_step(model, batch, 1e-3f);
        EXPECT_LE(loss, previous + 1e-6) << "step " << step;
        previous = loss;
    }
}

TEST(Training, NonFiniteInputAborts) {
    const ModelConfig cfg = small_config();
    HostModel<float> model(cfg);
    model.init(26);
    TrainingSample bad = random_sample(cfg, 27);
    bad.input2d.at(0, 0, 0) = NAN;
    const std::vector<TrainingSample> batch = {bad};
    const auto before = model.parameters().front()->data();
    const std::vector<float> copy(before.begin(), before.end());
    EXPECT_THROW(train_step(model, batch, 0.1f), NumericalError);
    const auto after = model.parameters().front()->data();
    EXPECT_TRUE(std::equal(copy.begin(), copy.end(), after.begin()));
}

TEST(Parameters, CountMatchesAnalyticModel) {
    for (const ModelConfig& cfg : {small_config(), ModelConfig::toy(), ModelConfig::motionbert_like()}) {
        HostModel<float> model(cfg);
        EXPECT_EQ(model.parameter_count(), param_count(cfg).total());
    }
}

TEST(Parameters, TraOnlyWhenUsed) {
    ModelConfig cfg = small_config();
    EXPECT_TRUE(HostModel<float>(cfg).recovery().has_value());
    cfg.recover_strategy = RecoverStrategy::nearest;
    EXPECT_FALSE(HostModel<float>(cfg).recovery().has_value());
    cfg.recover_strategy = RecoverStrategy::tra;
    cfg.pipeline = Pipeline::seq2frame;
    EXPECT_FALSE(HostModel<float>(cfg).recovery().has_value());
}

TEST(Parameters, RecoveryQueriesStartAtZero) {
    HostModel<float> model(ModelConfig::toy());
    model.init(28);
    for (float v : model.recovery()->queries().data()) {
        EXPECT_EQ(v, 0.0f);
    }
}

TEST(ModelFile, RoundTripIsExact) {
    ModelConfig cfg = small_config();
    cfg.prune_strategy = PruneStrategy::motion;
    cfg.knn = 3;
    HostModel<float> model(cfg);
    model.init(29);
    std::stringstream buffer;
    save_model(model, buffer);
    const std::string bytes = buffer.str();
    EXPECT_EQ(bytes.substr(0, 4), "HOT1");
    EXPECT_EQ(bytes.size(), 4 + 13 * 4 + 4 * model.parameter_count());
    HostModel<float> loaded = load_model(buffer);
    EXPECT_EQ(loaded.config(), cfg);
    const auto a = model.parameters();
    const auto b = loaded.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(*a[i], *b[i]);
    }
    std::stringstream again;
    save_model(loaded, again);
    EXPECT_EQ(again.str(), bytes);
}

TEST(ModelFile, RejectsCorruptInput) {
    HostModel<float> model(small_config());
    model.init(30);
    std::stringstream buffer;
    save_model(model, buffer);
    const std::string bytes = buffer.str();

    std::stringstream trailing(bytes + "x");
    EXPECT_THROW(load_model(trailing), DataError);
    std::stringstream truncated(bytes.substr(0, bytes.size() - 1));
    EXPECT_THROW(load_model(truncated), DataError);
    std::stringstream magic("HOT2" + bytes.substr(4));
    EXPECT_THROW(load_model(magic), DataError);
    std::string bad_enum = bytes;
    bad_enum[4 + 10 * 4] = 7;  // pipeline code
    std::stringstream enum_stream(bad_enum);
    EXPECT_THROW(load_model(enum_stream), DataError);
}

TEST(Cast, DoubleShadowMatchesFloat) {
    HostModel<float> model(ModelConfig::toy());
    model.init(31);
    HostModel<double> shadow = model.cast<double>();
    const PoseSequence in = random_poses(27, 17, 2, 32);
    ForwardOptions options;
    options.selection = IndexList{0, 3, 6, 9, 12, 15, 18, 21, 24};
    const Tensor out = model.forward(in, nullptr, options);
    const Tensor64 out64 = shadow.forward(in, nullptr, options);
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_NEAR(out[i], out64[i], 1e-4);
    }
}
