// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "posetok/errors.hpp"

namespace posetok {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major tensor with an optional gradient buffer of identical shape.
///
/// Storage is float for the model path; the same code is instantiated with double
/// for 64-bit gradient checking.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, T fill = T{0}) : m_shape(std::move(shape)) {
        validate_shape();
        m_data.assign(shape_numel(m_shape), fill);
    }

    BasicTensor(Shape shape, std::vector<T> data) : m_shape(std::move(shape)), m_data(std::move(data)) {
        validate_shape();
        if (m_data.size() != shape_numel(m_shape)) {
            throw DimensionError("tensor data length " + std::to_string(m_data.size()) + " does not match shape " +
                                 shape_to_string(m_shape));
        }
    }

    static BasicTensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
        return BasicTensor({rows, cols}, std::vector<T>(values));
    }

    const Shape& shape() const { return m_shape; }
    std::size_t rank() const { return m_shape.size(); }
    std::size_t dim(std::size_t axis) const { return m_shape.at(axis); }
    std::size_t size() const { return m_data.size(); }
    bool empty() const { return m_data.empty(); }

    /// Rows/cols of a rank-2 tensor.
    std::size_t rows() const { return m_shape.at(0); }
    std::size_t cols() const { return m_shape.at(1); }

    std::span<T> data() { return m_data; }
    std::span<const T> data() const { return m_data; }
    T* raw() { return m_data.data(); }
    const T* raw() const { return m_data.data(); }

    T& operator[](std::size_t i) { return m_data[i]; }
    const T& operator[](std::size_t i) const { return m_data[i]; }

    T& at(std::size_t r, std::size_t c) { return m_data[r * m_shape[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return m_data[r * m_shape[1] + c]; }

    T& at(std::size_t a, std::size_t b, std::size_t c) { return m_data[(a * m_shape[1] + b) * m_shape[2] + c]; }
    const T& at(std::size_t a, std::size_t b, std::size_t c) const {
        return m_data[(a * m_shape[1] + b) * m_shape[2] + c];
    }

    bool has_grad() const { return !m_grad.empty(); }
    void enable_grad() {
        if (m_grad.empty()) {
            m_grad.assign(m_data.size(), T{0});
        }
    }
    void zero_grad() { std::fill(m_grad.begin(), m_grad.end(), T{0}); }
    std::span<T> grad() { return m_grad; }
    std::span<const T> grad() const { return m_grad; }

    /// Same data, new shape with equal element count.
    BasicTensor reshaped(Shape shape) const {
        if (shape_numel(shape) != m_data.size()) {
            throw DimensionError("cannot reshape " + shape_to_string(m_shape) + " to " + shape_to_string(shape));
        }
        return BasicTensor(std::move(shape), m_data);
    }

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(m_data.begin(), m_data.end());
        return BasicTensor<U>(m_shape, std::move(out));
    }

    bool operator==(const BasicTensor& other) const { return m_shape == other.m_shape && m_data == other.m_data; }

private:
    void validate_shape() const {
        if (m_shape.empty()) {
            throw DimensionError("tensor shape must have at least one dimension");
        }
        for (auto d : m_shape) {
            if (d == 0) {
                throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(m_shape));
            }
        }
    }

    Shape m_shape;
    std::vector<T> m_data;
    std::vector<T> m_grad;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

}  // namespace posetok
