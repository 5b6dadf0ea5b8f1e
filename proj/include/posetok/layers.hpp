// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "posetok/ops.hpp"
#include "posetok/tensor.hpp"

namespace posetok {

using Rng = std::mt19937_64;

/// A list of row indexes that attend to each other (or to a paired key group).
using RowGroup = std::vector<std::size_t>;

/// y = x W + b with W of shape in x out. Gradient buffers are always allocated.
template <typename T>
class LinearLayer {
public:
    LinearLayer() = default;
    LinearLayer(std::size_t in_features, std::size_t out_features, bool use_bias);

    /// Xavier-uniform weights, zero bias.
    void init(Rng& rng);

    BasicTensor<T> forward(const BasicTensor<T>& x) const;

    /// Accumulates into weight/bias gradients and returns dL/dx.
    BasicTensor<T> backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out);

    std::size_t in_features() const { return m_weight.rows(); }
    std::size_t out_features() const { return m_weight.cols(); }
    bool has_bias() const { return m_use_bias; }

    BasicTensor<T>& weight() { return m_weight; }
    const BasicTensor<T>& weight() const { return m_weight; }
    BasicTensor<T>& bias() { return m_bias; }
    const BasicTensor<T>& bias() const { return m_bias; }

    void collect_parameters(std::vector<BasicTensor<T>*>& out);

private:
    BasicTensor<T> m_weight;
    BasicTensor<T> m_bias;
    bool m_use_bias = true;
};

template <typename T>
struct AttentionCache {
    BasicTensor<T> query_input;
    BasicTensor<T> key_value_input;
    BasicTensor<T> queries;
    BasicTensor<T> keys;
    BasicTensor<T> values;
    BasicTensor<T> mixed;  // concatenated head outputs, before the output projection
    std::vector<RowGroup> query_groups;
    std::vector<RowGroup> key_groups;
    std::vector<BasicTensor<T>> probs;  // [group * heads + head], |query group| x |key group|
};

/// Multi-head scaled dot-product attention over row groups.
///
/// Rows of the query input in query_groups[g] attend only to rows of the
/// key/value input in key_groups[g]. Self-attention passes the same tensor
/// and groups on both sides; the caller sums the two returned input gradients.
template <typename T>
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(std::size_t channels, std::size_t heads, bool use_bias);

    void init(Rng& rng);

    BasicTensor<T> forward(const BasicTensor<T>& query_input,
                           const BasicTensor<T>& key_value_input,
                           const std::vector<RowGroup>& query_groups,
                           const std::vector<RowGroup>& key_groups,
                           AttentionCache<T>* cache = nullptr) const;

    /// Returns {dL/d query_input, dL/d key_value_input}.
    std::pair<BasicTensor<T>, BasicTensor<T>> backward(const AttentionCache<T>& cache,
                                                       const BasicTensor<T>& grad_out);

    std::size_t channels() const { return m_channels; }
    std::size_t heads() const { return m_heads; }
    std::size_t head_dim() const { return m_channels / m_heads; }

    LinearLayer<T>& query_proj() { return m_query; }
    LinearLayer<T>& key_proj() { return m_key; }
    LinearLayer<T>& value_proj() { return m_value; }
    LinearLayer<T>& output_proj() { return m_output; }
    const LinearLayer<T>& query_proj() const { return m_query; }
    const LinearLayer<T>& key_proj() const { return m_key; }
    const LinearLayer<T>& value_proj() const { return m_value; }
    const LinearLayer<T>& output_proj() const { return m_output; }

    /// Order: query, key, value, output (weight then bias for each).
    void collect_parameters(std::vector<BasicTensor<T>*>& out);

private:
    std::size_t m_channels = 0;
    std::size_t m_heads = 1;
    LinearLayer<T> m_query;
    LinearLayer<T> m_key;
    LinearLayer<T> m_value;
    LinearLayer<T> m_output;
};

/// Copies values between parameter lists of identical structure (e.g. float -> double).
template <typename SrcList, typename DstList>
void copy_parameter_values(const SrcList& from, const DstList& to) {
    if (from.size() != to.size()) {
        throw DimensionError("parameter lists differ in length");
    }
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (from[i]->shape() != to[i]->shape()) {
            throw DimensionError("parameter " + std::to_string(i) + " shape mismatch");
        }
        for (std::size_t e = 0; e < from[i]->size(); ++e) {
            using Dst = typename std::remove_reference_t<decltype(*to[i])>::value_type;
            (*to[i])[e] = static_cast<Dst>((*from[i])[e]);
        }
    }
}

}  // namespace posetok
