// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "posetok/tensor.hpp"

// Dense primitives with hand-written adjoints. Every backward function
// accumulates (+=) into the gradient tensors it is handed; pass nullptr to
// skip an input.

namespace posetok {

constexpr double kLayerNormEpsilon = 1e-5;

/// (m x k) * (k x n) -> (m x n). Throws DimensionError on inner-dimension mismatch.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
void matmul_backward(const BasicTensor<T>& a,
                     const BasicTensor<T>& b,
                     const BasicTensor<T>& grad_out,
                     BasicTensor<T>* grad_a,
                     BasicTensor<T>* grad_b);

/// a * b^T without materializing the transpose.
template <typename T>
BasicTensor<T> matmul_transposed(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

/// Row-wise softmax, stabilized by subtracting the row maximum. NaN inputs propagate to NaN outputs.
template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x);

/// Given y = softmax_rows(x) and dL/dy, returns dL/dx.
template <typename T>
BasicTensor<T> softmax_rows_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_y);

template <typename T>
struct LayerNormCache {
    BasicTensor<T> normalized;  // (x - mean) / sqrt(var + eps), before the affine step
    std::vector<T> inv_std;     // one per row
};

/// Normalizes every row of a rank-2 tensor, then applies gain and shift (both of length cols).
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x,
                          const BasicTensor<T>& gain,
                          const BasicTensor<T>& shift,
                          LayerNormCache<T>* cache = nullptr);

/// Returns dL/dx and accumulates into grad_gain / grad_shift when they are non-empty.
template <typename T>
BasicTensor<T> layer_norm_backward(const LayerNormCache<T>& cache,
                                   const BasicTensor<T>& gain,
                                   const BasicTensor<T>& grad_out,
                                   std::span<T> grad_gain,
                                   std::span<T> grad_shift);

/// Exact (erf-based) GELU.
template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out);

/// Rows of a rank-2 tensor picked by index, in the given order.
template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows);

/// dst[rows[i]] += src[i]
template <typename T>
void scatter_add_rows(BasicTensor<T>& dst, std::span<const std::size_t> rows, const BasicTensor<T>& src);

/// dst += scale * src, shapes must agree.
template <typename T>
void add_scaled(BasicTensor<T>& dst, const BasicTensor<T>& src, T scale = T{1});

}  // namespace posetok
