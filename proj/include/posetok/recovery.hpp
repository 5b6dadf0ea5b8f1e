// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "posetok/layers.hpp"
#include "posetok/pose.hpp"
#include "posetok/tensor.hpp"

namespace posetok {

enum class RecoverStrategy { tra, nearest, linear };

std::string_view to_string(RecoverStrategy strategy);
RecoverStrategy parse_recover_strategy(std::string_view name);

/// Single cross-attention from the representative tokens, without bias terms.
/// Q/K/V are projections; the output is the attention result after W_O.
template <typename T>
BasicTensor<T> mca(const BasicTensor<T>& queries,
                   const BasicTensor<T>& keys_values,
                   const MultiHeadAttention<T>& attention,
                   AttentionCache<T>* cache = nullptr);

template <typename T>
struct TraCache {
    std::size_t kept_frames = 0;
    AttentionCache<T> attention;
};

/// Token recovering attention: a bank of learnable query tokens (one row per
/// recovered frame, shared by all joints, zero at initialization) attends to
/// the representative tokens of each joint:
///
///   recovered_j = queries + MCA(queries, kept_j, kept_j)
template <typename T>
class TokenRecoveringAttention {
public:
    TokenRecoveringAttention() = default;
    TokenRecoveringAttention(std::size_t recovered_frames, std::size_t channels, std::size_t heads);

    /// Xavier projections; the query bank stays exactly zero.
    void init(Rng& rng);

    /// kept: f x J x C -> recovered_frames x J x C. Warns on stderr when
    /// recovering to fewer frames than were kept.
    BasicTensor<T> forward(const BasicTensor<T>& kept, TraCache<T>* cache = nullptr) const;

    /// Accumulates parameter gradients; returns dL/d kept.
    BasicTensor<T> backward(const TraCache<T>& cache, const BasicTensor<T>& grad_out);

    std::size_t recovered_frames() const { return m_queries.rows(); }
    std::size_t channels() const { return m_queries.cols(); }

    BasicTensor<T>& queries() { return m_queries; }
    const BasicTensor<T>& queries() const { return m_queries; }
    MultiHeadAttention<T>& attention() { return m_attention; }
    const MultiHeadAttention<T>& attention() const { return m_attention; }

    /// F'*C + 4*C^2.
    std::size_t parameter_count() const;

    /// Order: queries, W_Q, W_K, W_V, W_O.
    void collect_parameters(std::vector<BasicTensor<T>*>& out);

private:
    BasicTensor<T> m_queries;
    MultiHeadAttention<T> m_attention;
};

/// Per-frame blend of kept frames: recovered[t] = sum_i weight * kept[i].
struct InterpolationPlan {
    struct Term {
        std::size_t source;  // position in the kept list
        double weight;
    };
    std::vector<std::vector<Term>> frames;
};

/// Each frame copies the kept frame nearest in time; ties go to the earlier one.
InterpolationPlan nearest_plan(std::span<const std::size_t> kept_indexes, std::size_t frames);

/// Piecewise-linear blend between consecutive kept frames, clamped outside the kept range.
/// Throws ConfigError for fewer than two kept frames.
InterpolationPlan linear_plan(std::span<const std::size_t> kept_indexes, std::size_t frames);

template <typename T>
BasicTensor<T> apply_plan(const InterpolationPlan& plan, const BasicTensor<T>& kept);

/// Adjoint of apply_plan.
template <typename T>
BasicTensor<T> apply_plan_backward(const InterpolationPlan& plan, const BasicTensor<T>& grad_out,
                                   std::size_t kept_frames);

template <typename T>
BasicTensor<T> recover_nearest(const BasicTensor<T>& kept, std::span<const std::size_t> kept_indexes,
                               std::size_t frames) {
    return apply_plan(nearest_plan(kept_indexes, frames), kept);
}

template <typename T>
BasicTensor<T> recover_linear(const BasicTensor<T>& kept, std::span<const std::size_t> kept_indexes,
                              std::size_t frames) {
    return apply_plan(linear_plan(kept_indexes, frames), kept);
}

}  // namespace posetok
