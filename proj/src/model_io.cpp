// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "posetok/host.hpp"

namespace posetok {

namespace {

constexpr std::array<char, 4> kMagic = {'H', 'O', 'T', '1'};
constexpr std::size_t kConfigFields = 13;

void write_u32(std::ostream& out, std::uint32_t value) {
    const char bytes[4] = {static_cast<char>(value & 0xFF), static_cast<char>((value >> 8) & 0xFF),
                           static_cast<char>((value >> 16) & 0xFF), static_cast<char>((value >> 24) & 0xFF)};
    out.write(bytes, 4);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw DataError(std::string("model file truncated while reading ") + what);
    }
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_field(std::ostream& out, std::size_t value) {
    if (value > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
        throw ConfigError("config value " + std::to_string(value) + " does not fit the model header");
    }
    write_u32(out, static_cast<std::uint32_t>(value));
}

std::size_t read_field(std::istream& in) {
    const auto value = static_cast<std::int32_t>(read_u32(in, "the config header"));
    if (value < 0) {
        throw DataError("negative config field " + std::to_string(value) + " in model header");
    }
    return static_cast<std::size_t>(value);
}

template <typename Enum>
Enum read_enum(std::istream& in, std::size_t count, const char* name) {
    const std::size_t value = read_field(in);
    if (value >= count) {
        throw DataError(std::string("invalid ") + name + " code " + std::to_string(value) + " in model header");
    }
    return static_cast<Enum>(value);
}

}  // namespace

void save_model(const HostModel<float>& model, std::ostream& out) {
    const ModelConfig& c = model.config();
    out.write(kMagic.data(), kMagic.size());
    for (std::size_t v : {c.frames, c.joints, c.channels, c.blocks, c.heads, c.tra_heads, c.prune_block, c.tokens,
                          c.recovered, c.knn}) {
        write_field(out, v);
    }
    write_field(out, static_cast<std::size_t>(c.pipeline));
    write_field(out, static_cast<std::size_t>(c.prune_strategy));
    write_field(out, static_cast<std::size_t>(c.recover_strategy));
    for (const auto* p : model.parameters()) {
        for (float v : p->data()) {
            write_u32(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    if (!out) {
        throw DataError("failed to write model stream");
    }
}

HostModel<float> load_model(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw DataError("not a model file (expected magic HOT1)");
    }
    ModelConfig c;
    std::size_t* sizes[] = {&c.frames, &c.joints, &c.channels, &c.blocks, &c.heads,
                            &c.tra_heads, &c.prune_block, &c.tokens, &c.recovered, &c.knn};
    static_assert(std::size(sizes) + 3 == kConfigFields);
    for (auto* field : sizes) {
        *field = read_field(in);
    }
    c.pipeline = read_enum<Pipeline>(in, 2, "pipeline");
    c.prune_strategy = read_enum<PruneStrategy>(in, 4, "prune strategy");
    c.recover_strategy = read_enum<RecoverStrategy>(in, 3, "recover strategy");

    HostModel<float> model(c);
    std::size_t index = 0;
    for (auto* p : model.parameters()) {
        for (auto& v : p->data()) {
            v = std::bit_cast<float>(read_u32(in, "parameters"));
        }
        ++index;
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("model file has trailing bytes after " + std::to_string(index) + " parameter tensors");
    }
    return model;
}

}  // namespace posetok
