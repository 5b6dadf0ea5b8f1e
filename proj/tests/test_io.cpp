// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <functional>
#include <cstdlib>
#include <sstream>

#include "oracles.hpp"
#include "posetok/io.hpp"

using namespace posetok;

namespace {

std::string error_of(const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("posetok_io_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(FormatNumber, NineSignificantDigits) {
    EXPECT_EQ(format_number(0.0), "0");
    EXPECT_EQ(format_number(0.1f), "0.100000001");
    EXPECT_EQ(format_number(-2.5), "-2.5");
}

TEST(FormatNumber, FloatRoundTripIsExact) {
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<std::uint32_t> bits;
    for (int i = 0; i < 10000; ++i) {
        float v = std::bit_cast<float>(bits(gen));
        if (!std::isfinite(v)) {
            continue;
        }
        EXPECT_EQ(std::strtof(format_number(v).c_str(), nullptr), v);
    }
}

TEST(PoseFile, RoundTripIsLossless) {
    std::mt19937_64 gen(2);
    const std::vector<PoseSequence> records = {
        PoseSequence(oracle::random_tensor<float>({4, 3, 2}, gen, 1e3)),
        PoseSequence(oracle::random_tensor<float>({1, 17, 3}, gen, 1e-3)),
    };
    std::stringstream out;
    write_poses(out, records);
    EXPECT_EQ(read_poses(out, "mem"), records);
}

TEST(PoseFile, SkipsCommentsAndBlankLines) {
    std::istringstream in("# header\n\n1 1 2 0.5 -1\n   \n");
    const auto records = read_poses(in, "mem");
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].at(0, 0, 1), -1.0f);
}

TEST(PoseFile, ErrorsNameTheLine) {
    auto parse = [](const std::string& text) {
        return error_of([&] {
            std::istringstream in(text);
            read_poses(in, "poses.txt");
        });
    };
    EXPECT_NE(parse("1 1 2 0 0\n1 1 2 0\n").find("poses.txt:2:"), std::string::npos);
    EXPECT_NE(parse("# c\n1 1 4 0 0 0 0\n").find("poses.txt:2:"), std::string::npos);
    EXPECT_NE(parse("1 1 2 0 nan\n").find("poses.txt:1:"), std::string::npos);
    EXPECT_NE(parse("1 1 2 0 inf\n").find("not a finite number"), std::string::npos);
    EXPECT_NE(parse("1 x 2 0 0\n").find("poses.txt:1:"), std::string::npos);
    EXPECT_NE(parse("1 1\n").find("poses.txt:1:"), std::string::npos);
    EXPECT_NE(parse("1 1 2 0 0 0\n").find("expected 2 values"), std::string::npos);
    EXPECT_THROW(
        {
            std::istringstream in("1 1 2 0 0x\n");
            read_poses(in, "p");
        },
        DataError);
}

TEST(PoseFile, MissingFileIsDataError) {
    EXPECT_THROW(read_pose_file("/nonexistent/poses.txt"), DataError);
}

TEST(SelectionFile, RoundTrip) {
    const std::vector<IndexList> selections = {{0, 2}, {1, 4, 8}, {5}};
    std::stringstream out;
    write_selections(out, selections);
    EXPECT_EQ(out.str(), "0 2\n1 4 8\n5\n");
    EXPECT_EQ(read_selections(out, "mem"), selections);
}

TEST(SelectionFile, RejectsNonIndexes) {
    std::istringstream in("0 1\n2 -3\n");
    const std::string msg = error_of([&] { read_selections(in, "sel.txt"); });
    EXPECT_NE(msg.find("sel.txt:2:"), std::string::npos);
}

TEST(Config, ParsesKeysCommentsAndWhitespace) {
    std::istringstream in("# comment\nframes = 9\n\ntokens=3  # trailing\nstrategy=uniform\n");
    const ConfigMap m = parse_config(in, "run.cfg");
    EXPECT_EQ(m.at("frames"), "9");
    EXPECT_EQ(m.at("tokens"), "3");
    EXPECT_EQ(m.at("strategy"), "uniform");
    EXPECT_EQ(m.size(), 3u);
}

TEST(Config, ErrorsNameTheLine) {
    auto parse = [](const std::string& text) {
        return error_of([&] {
            std::istringstream in(text);
            parse_config(in, "run.cfg");
        });
    };
    EXPECT_NE(parse("frames=9\nnonsense\n").find("run.cfg:2:"), std::string::npos);
    EXPECT_NE(parse("=3\n").find("run.cfg:1:"), std::string::npos);
    EXPECT_NE(parse("a=1\nb=2\na=3\n").find("run.cfg:3: duplicate key 'a'"), std::string::npos);
}

TEST(Config, ApplySetsEveryKey) {
    const ConfigMap m = {
        {"frames", "9"}, {"joints", "4"}, {"channels", "16"}, {"blocks", "3"}, {"heads", "2"},
        {"tra_heads", "4"}, {"block", "2"}, {"tokens", "3"}, {"recovered", "9"}, {"knn", "2"},
        {"pipeline", "seq2frame"}, {"strategy", "motion"}, {"recover", "linear"}, {"seed", "42"},
        {"steps", "10"}, {"lr", "0.5"}, {"batch", "2"}, {"samples", "8"},
    };
    RunConfig cfg;
    apply_config(m, cfg);
    EXPECT_EQ(cfg.model.frames, 9u);
    EXPECT_EQ(cfg.model.joints, 4u);
    EXPECT_EQ(cfg.model.channels, 16u);
    EXPECT_EQ(cfg.model.blocks, 3u);
    EXPECT_EQ(cfg.model.heads, 2u);
    EXPECT_EQ(cfg.model.tra_heads, 4u);
    EXPECT_EQ(cfg.model.prune_block, 2u);
    EXPECT_EQ(cfg.model.tokens, 3u);
    EXPECT_EQ(cfg.model.recovered, 9u);
    EXPECT_EQ(cfg.model.knn, 2u);
    EXPECT_EQ(cfg.model.pipeline, Pipeline::seq2frame);
    EXPECT_EQ(cfg.model.prune_strategy, PruneStrategy::motion);
    EXPECT_EQ(cfg.model.recover_strategy, RecoverStrategy::linear);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.train.steps, 10u);
    EXPECT_EQ(cfg.train.learning_rate, 0.5);
    EXPECT_EQ(cfg.train.batch, 2u);
    EXPECT_EQ(cfg.train.samples, 8u);
}

TEST(Config, ApplyRejectsBadInput) {
    RunConfig cfg;
    EXPECT_THROW(apply_config({{"colour", "red"}}, cfg), ConfigError);
    EXPECT_THROW(apply_config({{"frames", "-1"}}, cfg), ConfigError);
    EXPECT_THROW(apply_config({{"frames", "9x"}}, cfg), ConfigError);
    EXPECT_THROW(apply_config({{"lr", "nan"}}, cfg), ConfigError);
    EXPECT_THROW(apply_config({{"strategy", "random"}}, cfg), ConfigError);
    EXPECT_THROW(apply_config({{"pipeline", "seq2any"}}, cfg), ConfigError);
}

TEST(Config, FileReadMatchesStreamParse) {
    const auto dir = scratch_dir("config");
    atomic_write(dir / "run.cfg", "frames=9\ntokens=3\n");
    const ConfigMap m = read_config_file(dir / "run.cfg");
    EXPECT_EQ(m.at("frames"), "9");
    EXPECT_THROW(read_config_file(dir / "missing.cfg"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST(AtomicWrite, ReplacesContentAndLeavesNoTemporary) {
    const auto dir = scratch_dir("atomic");
    atomic_write(dir / "out.txt", "first");
    atomic_write(dir / "out.txt", "second\n");
    EXPECT_EQ(read_file(dir / "out.txt"), "second\n");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) {
        ++entries;
    }
    EXPECT_EQ(entries, 1u);
    EXPECT_THROW(atomic_write(dir / "no_such_dir" / "x.txt", "x"), DataError);
    std::filesystem::remove_all(dir);
}
