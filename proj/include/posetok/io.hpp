// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "posetok/host.hpp"
#include "posetok/pose.hpp"

namespace posetok {

/// Shortest-safe text form of a float: 9 significant digits.
std::string format_number(double value);

/// One record per line: "F J D v0 v1 ...". Blank lines and lines starting with '#' are skipped.
void write_poses(std::ostream& out, const std::vector<PoseSequence>& records);
std::vector<PoseSequence> read_poses(std::istream& in, std::string_view source);
std::vector<PoseSequence> read_pose_file(const std::filesystem::path& path);

/// One selection per line, whitespace-separated frame indexes.
void write_selections(std::ostream& out, const std::vector<IndexList>& selections);
std::vector<IndexList> read_selections(std::istream& in, std::string_view source);
std::vector<IndexList> read_selection_file(const std::filesystem::path& path);

/// Flat key=value pairs; '#' starts a comment. Duplicate keys are an error.
using ConfigMap = std::map<std::string, std::string>;
ConfigMap parse_config(std::istream& in, std::string_view source);
ConfigMap read_config_file(const std::filesystem::path& path);

struct TrainOptions {
    std::size_t steps = 500;
    double learning_rate = 0.01;
    std::size_t batch = 4;
    std::size_t samples = 32;  // size of the synthetic training set
};

struct RunConfig {
    ModelConfig model = ModelConfig::toy();
    std::uint64_t seed = 0;
    TrainOptions train;
};

/// Applies recognized keys to `config`; unknown keys and bad values throw ConfigError.
void apply_config(const ConfigMap& values, RunConfig& config);

/// Writes to a sibling temporary file, then renames over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace posetok
