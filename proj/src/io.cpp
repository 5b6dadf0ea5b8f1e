// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>

namespace posetok {

std::string format_number(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.9g", value);
    return buffer;
}

namespace {

std::string location(std::string_view source, std::size_t line) {
    return std::string(source) + ":" + std::to_string(line) + ": ";
}

bool skip_line(const std::string& line) {
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string::npos || line[first] == '#';
}

template <typename Int>
bool parse_integer(std::string_view text, Int& out) {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split_words(std::string_view line) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        if (i > start) {
            words.push_back(line.substr(start, i - start));
        }
    }
    return words;
}

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r");
    return std::string(text.substr(first, last - first + 1));
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    return in;
}

}  // namespace

void write_poses(std::ostream& out, const std::vector<PoseSequence>& records) {
    for (const auto& pose : records) {
        out << pose.frames() << ' ' << pose.joints() << ' ' << pose.dims();
        for (float v : pose.tensor().data()) {
            out << ' ' << format_number(v);
        }
        out << '\n';
    }
}

std::vector<PoseSequence> read_poses(std::istream& in, std::string_view source) {
    std::vector<PoseSequence> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) {
            continue;
        }
        const auto words = split_words(line);
        const auto where = location(source, line_no);
        if (words.size() < 3) {
            throw DataError(where + "expected header 'F J D' followed by values");
        }
        std::size_t dims[3];
        for (int i = 0; i < 3; ++i) {
            if (!parse_integer(words[i], dims[i]) || dims[i] == 0) {
                throw DataError(where + "header field " + std::to_string(i + 1) + " '" + std::string(words[i]) +
                                "' is not a positive integer");
            }
        }
        if (dims[2] != 2 && dims[2] != 3) {
            throw DataError(where + "pose dimensionality must be 2 or 3, got " + std::to_string(dims[2]));
        }
        const std::size_t expected = dims[0] * dims[1] * dims[2];
        if (words.size() - 3 != expected) {
            throw DataError(where + "expected " + std::to_string(expected) + " values for " +
                            std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "x" +
                            std::to_string(dims[2]) + ", got " + std::to_string(words.size() - 3));
        }
        PoseSequence pose(dims[0], dims[1], dims[2]);
        auto data = pose.tensor().data();
        for (std::size_t i = 0; i < expected; ++i) {
            const std::string word(words[3 + i]);
            char* end = nullptr;
            const double value = std::strtod(word.c_str(), &end);
            if (end != word.c_str() + word.size() || !std::isfinite(value)) {
                throw DataError(where + "value " + std::to_string(i + 1) + " '" + word + "' is not a finite number");
            }
            data[i] = static_cast<float>(value);
        }
        records.push_back(std::move(pose));
    }
    if (in.bad()) {
        throw DataError(std::string(source) + ": read failure");
    }
    return records;
}

std::vector<PoseSequence> read_pose_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_poses(in, path.string());
}

void write_selections(std::ostream& out, const std::vector<IndexList>& selections) {
    for (const auto& selection : selections) {
        for (std::size_t i = 0; i < selection.size(); ++i) {
            out << (i == 0 ? "" : " ") << selection[i];
        }
        out << '\n';
    }
}

std::vector<IndexList> read_selections(std::istream& in, std::string_view source) {
    std::vector<IndexList> selections;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line[0] == '#') {
            continue;
        }
        IndexList selection;
        for (auto word : split_words(line)) {
            std::size_t value = 0;
            if (!parse_integer(word, value)) {
                throw DataError(location(source, line_no) + "'" + std::string(word) + "' is not a frame index");
            }
            selection.push_back(value);
        }
        selections.push_back(std::move(selection));
    }
    return selections;
}

std::vector<IndexList> read_selection_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_selections(in, path.string());
}

ConfigMap parse_config(std::istream& in, std::string_view source) {
    ConfigMap values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const std::string content = trim(std::string_view(line).substr(0, hash));
        if (content.empty()) {
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(location(source, line_no) + "expected key=value");
        }
        std::string key = trim(std::string_view(content).substr(0, eq));
        std::string value = trim(std::string_view(content).substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(location(source, line_no) + "empty key");
        }
        if (!values.emplace(key, value).second) {
            throw ConfigError(location(source, line_no) + "duplicate key '" + key + "'");
        }
    }
    return values;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path.string() + "'");
    }
    return parse_config(in, path.string());
}

namespace {

std::size_t to_size(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    if (!parse_integer(std::string_view(value), out)) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a non-negative integer");
    }
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(out)) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a finite number");
    }
    return out;
}

}  // namespace

void apply_config(const ConfigMap& values, RunConfig& config) {
    using Setter = std::function<void(const std::string&, const std::string&)>;
    ModelConfig& m = config.model;
    const std::map<std::string, Setter> setters = {
        {"frames", [&](auto& k, auto& v) { m.frames = to_size(k, v); }},
        {"joints", [&](auto& k, auto& v) { m.joints = to_size(k, v); }},
        {"channels", [&](auto& k, auto& v) { m.channels = to_size(k, v); }},
        {"blocks", [&](auto& k, auto& v) { m.blocks = to_size(k, v); }},
        {"heads", [&](auto& k, auto& v) { m.heads = to_size(k, v); }},
        {"tra_heads", [&](auto& k, auto& v) { m.tra_heads = to_size(k, v); }},
        {"block", [&](auto& k, auto& v) { m.prune_block = to_size(k, v); }},
        {"tokens", [&](auto& k, auto& v) { m.tokens = to_size(k, v); }},
        {"recovered", [&](auto& k, auto& v) { m.recovered = to_size(k, v); }},
        {"knn", [&](auto& k, auto& v) { m.knn = to_size(k, v); }},
        {"pipeline", [&](auto&, auto& v) { m.pipeline = parse_pipeline(v); }},
        {"strategy", [&](auto&, auto& v) { m.prune_strategy = parse_prune_strategy(v); }},
        {"recover", [&](auto&, auto& v) { m.recover_strategy = parse_recover_strategy(v); }},
        {"seed", [&](auto& k, auto& v) { config.seed = to_size(k, v); }},
        {"steps", [&](auto& k, auto& v) { config.train.steps = to_size(k, v); }},
        {"lr", [&](auto& k, auto& v) { config.train.learning_rate = to_double(k, v); }},
        {"batch", [&](auto& k, auto& v) { config.train.batch = to_size(k, v); }},
        {"samples", [&](auto& k, auto& v) { config.train.samples = to_size(k, v); }},
    };
    for (const auto& [key, value] : values) {
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        it->second(key, value);
    }
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write '" + tmp.string() + "'");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.flush()) {
            throw DataError("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw DataError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
    }
}

std::string read_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace posetok
