// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "posetok/tensor.hpp"

namespace posetok {

using IndexList = std::vector<std::size_t>;

/// Frames x joints x coordinates (2 for detected poses, 3 for lifted poses).
class PoseSequence {
public:
    PoseSequence() = default;
    PoseSequence(std::size_t frames, std::size_t joints, std::size_t dims)
        : m_coords({frames, joints, dims}) {
        validate();
    }
    explicit PoseSequence(Tensor coords) : m_coords(std::move(coords)) { validate(); }

    std::size_t frames() const { return m_coords.dim(0); }
    std::size_t joints() const { return m_coords.dim(1); }
    std::size_t dims() const { return m_coords.dim(2); }

    float& at(std::size_t t, std::size_t j, std::size_t d) { return m_coords.at(t, j, d); }
    float at(std::size_t t, std::size_t j, std::size_t d) const { return m_coords.at(t, j, d); }

    const Tensor& tensor() const { return m_coords; }
    Tensor& tensor() { return m_coords; }

    bool operator==(const PoseSequence& other) const = default;

private:
    void validate() const {
        if (m_coords.rank() != 3 || (m_coords.dim(2) != 2 && m_coords.dim(2) != 3)) {
            throw DimensionError("pose sequence must be frames x joints x {2,3}, got " +
                                 shape_to_string(m_coords.shape()));
        }
    }

    Tensor m_coords;
};

}  // namespace posetok
