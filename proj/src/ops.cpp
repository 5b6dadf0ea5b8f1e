// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace posetok {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out << 'x';
        }
        out << shape[i];
    }
    out << ']';
    return out.str();
}

namespace {

template <typename T>
void require_matrix(const BasicTensor<T>& t, const char* what) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(what) + " must be rank 2, got " + shape_to_string(t.shape()));
    }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shape " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
    }
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_matrix(a, "matmul lhs");
    require_matrix(b, "matmul rhs");
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul inner dimensions differ: " + shape_to_string(a.shape()) + " * " +
                             shape_to_string(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    BasicTensor<T> out({m, n});
    const T* pa = a.raw();
    const T* pb = b.raw();
    T* po = out.raw();
    for (std::size_t i = 0; i < m; ++i) {
        T* row = po + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = pa[i * k + p];
            const T* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                row[j] += av * brow[j];
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> matmul_transposed(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_matrix(a, "matmul_transposed lhs");
    require_matrix(b, "matmul_transposed rhs");
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_transposed column counts differ: " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    BasicTensor<T> out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a.raw() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b.raw() + j * k;
            T acc{0};
            for (std::size_t p = 0; p < k; ++p) {
                acc += arow[p] * brow[p];
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

template <typename T>
void matmul_backward(const BasicTensor<T>& a,
                     const BasicTensor<T>& b,
                     const BasicTensor<T>& grad_out,
                     BasicTensor<T>* grad_a,
                     BasicTensor<T>* grad_b) {
    if (grad_out.rank() != 2 || grad_out.rows() != a.rows() || grad_out.cols() != b.cols()) {
        throw DimensionError("matmul_backward: upstream gradient has shape " + shape_to_string(grad_out.shape()));
    }
    if (grad_a != nullptr) {
        require_same_shape(*grad_a, a, "matmul_backward grad_a");
        // dA = dY * B^T
        add_scaled(*grad_a, matmul_transposed(grad_out, b));
    }
    if (grad_b != nullptr) {
        require_same_shape(*grad_b, b, "matmul_backward grad_b");
        // dB = A^T * dY
        const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
        T* gb = grad_b->raw();
        for (std::size_t i = 0; i < m; ++i) {
            const T* gy = grad_out.raw() + i * n;
            for (std::size_t p = 0; p < k; ++p) {
                const T av = a.raw()[i * k + p];
                T* row = gb + p * n;
                for (std::size_t j = 0; j < n; ++j) {
                    row[j] += av * gy[j];
                }
            }
        }
    }
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
    require_matrix(a, "transpose input");
    BasicTensor<T> out({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out.at(j, i) = a.at(i, j);
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x) {
    require_matrix(x, "softmax_rows input");
    BasicTensor<T> y(x.shape());
    const std::size_t n = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const T* in = x.raw() + r * n;
        T* out = y.raw() + r * n;
        T max_value = in[0];
        for (std::size_t c = 1; c < n; ++c) {
            // NaN never compares greater, so a NaN entry flows through exp() below.
            if (in[c] > max_value) {
                max_value = in[c];
            }
        }
        T sum{0};
        for (std::size_t c = 0; c < n; ++c) {
            out[c] = std::exp(in[c] - max_value);
            sum += out[c];
        }
        for (std::size_t c = 0; c < n; ++c) {
            out[c] /= sum;
        }
    }
    return y;
}

template <typename T>
BasicTensor<T> softmax_rows_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_y) {
    require_same_shape(y, grad_y, "softmax_rows_backward");
    BasicTensor<T> dx(y.shape());
    const std::size_t n = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
        const T* yr = y.raw() + r * n;
        const T* gr = grad_y.raw() + r * n;
        T dot{0};
        for (std::size_t c = 0; c < n; ++c) {
            dot += yr[c] * gr[c];
        }
        T* out = dx.raw() + r * n;
        for (std::size_t c = 0; c < n; ++c) {
            out[c] = yr[c] * (gr[c] - dot);
        }
    }
    return dx;
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x,
                          const BasicTensor<T>& gain,
                          const BasicTensor<T>& shift,
                          LayerNormCache<T>* cache) {
    require_matrix(x, "layer_norm input");
    const std::size_t n = x.cols();
    if (gain.size() != n || shift.size() != n) {
        throw DimensionError("layer_norm gain/shift length must equal " + std::to_string(n));
    }
    BasicTensor<T> normalized(x.shape());
    std::vector<T> inv_std(x.rows());
    BasicTensor<T> y(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const T* in = x.raw() + r * n;
        T mean{0};
        for (std::size_t c = 0; c < n; ++c) {
            mean += in[c];
        }
        mean /= static_cast<T>(n);
        T var{0};
        for (std::size_t c = 0; c < n; ++c) {
            const T d = in[c] - mean;
            var += d * d;
        }
        var /= static_cast<T>(n);
        const T rstd = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEpsilon));
        inv_std[r] = rstd;
        for (std::size_t c = 0; c < n; ++c) {
            const T xhat = (in[c] - mean) * rstd;
            normalized.at(r, c) = xhat;
            y.at(r, c) = xhat * gain[c] + shift[c];
        }
    }
    if (cache != nullptr) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

template <typename T>
BasicTensor<T> layer_norm_backward(const LayerNormCache<T>& cache,
                                   const BasicTensor<T>& gain,
                                   const BasicTensor<T>& grad_out,
                                   std::span<T> grad_gain,
                                   std::span<T> grad_shift) {
    require_same_shape(cache.normalized, grad_out, "layer_norm_backward");
    if ((!grad_gain.empty() && grad_gain.size() != grad_out.cols()) ||
        (!grad_shift.empty() && grad_shift.size() != grad_out.cols())) {
        throw DimensionError("layer_norm_backward gradient buffers must have length " +
                             std::to_string(grad_out.cols()));
    }
    const std::size_t rows = grad_out.rows(), n = grad_out.cols();
    BasicTensor<T> dx(grad_out.shape());
    std::vector<T> dxhat(n);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xhat = cache.normalized.raw() + r * n;
        const T* gy = grad_out.raw() + r * n;
        T sum_dxhat{0}, sum_dxhat_xhat{0};
        for (std::size_t c = 0; c < n; ++c) {
            dxhat[c] = gy[c] * gain[c];
            sum_dxhat += dxhat[c];
            sum_dxhat_xhat += dxhat[c] * xhat[c];
            if (!grad_gain.empty()) {
                grad_gain[c] += gy[c] * xhat[c];
            }
            if (!grad_shift.empty()) {
                grad_shift[c] += gy[c];
            }
        }
        const T inv_n = T{1} / static_cast<T>(n);
        T* out = dx.raw() + r * n;
        for (std::size_t c = 0; c < n; ++c) {
            out[c] = cache.inv_std[r] * (dxhat[c] - inv_n * sum_dxhat - xhat[c] * inv_n * sum_dxhat_xhat);
        }
    }
    return dx;
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
    BasicTensor<T> y(x.shape());
    const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = T{0.5} * x[i] * (T{1} + std::erf(x[i] * inv_sqrt2));
    }
    return y;
}

template <typename T>
BasicTensor<T> gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
    require_same_shape(x, grad_out, "gelu_backward");
    BasicTensor<T> dx(x.shape());
    const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
    const T inv_sqrt_2pi = static_cast<T>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T cdf = T{0.5} * (T{1} + std::erf(x[i] * inv_sqrt2));
        const T pdf = inv_sqrt_2pi * std::exp(T{-0.5} * x[i] * x[i]);
        dx[i] = grad_out[i] * (cdf + x[i] * pdf);
    }
    return dx;
}

template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> rows) {
    require_matrix(x, "gather_rows input");
    if (rows.empty()) {
        throw DimensionError("gather_rows needs at least one row");
    }
    const std::size_t n = x.cols();
    BasicTensor<T> out({rows.size(), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= x.rows()) {
            throw DimensionError("gather_rows index " + std::to_string(rows[i]) + " out of range");
        }
        std::copy_n(x.raw() + rows[i] * n, n, out.raw() + i * n);
    }
    return out;
}

template <typename T>
void scatter_add_rows(BasicTensor<T>& dst, std::span<const std::size_t> rows, const BasicTensor<T>& src) {
    if (src.rank() != 2 || src.rows() != rows.size() || src.cols() != dst.cols()) {
        throw DimensionError("scatter_add_rows source shape " + shape_to_string(src.shape()));
    }
    const std::size_t n = dst.cols();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= dst.rows()) {
            throw DimensionError("scatter_add_rows index " + std::to_string(rows[i]) + " out of range");
        }
        T* out = dst.raw() + rows[i] * n;
        const T* in = src.raw() + i * n;
        for (std::size_t c = 0; c < n; ++c) {
            out[c] += in[c];
        }
    }
}

template <typename T>
void add_scaled(BasicTensor<T>& dst, const BasicTensor<T>& src, T scale) {
    if (dst.size() != src.size()) {
        throw DimensionError("add_scaled: " + shape_to_string(dst.shape()) + " vs " + shape_to_string(src.shape()));
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += scale * src[i];
    }
}

#define POSETOK_INSTANTIATE_OPS(T)                                                                                  \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
    template void matmul_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,              \
                                  BasicTensor<T>*, BasicTensor<T>*);                                                \
    template BasicTensor<T> matmul_transposed(const BasicTensor<T>&, const BasicTensor<T>&);                       \
    template BasicTensor<T> transpose(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> softmax_rows(const BasicTensor<T>&);                                                   \
    template BasicTensor<T> softmax_rows_backward(const BasicTensor<T>&, const BasicTensor<T>&);                   \
    template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,        \
                                       LayerNormCache<T>*);                                                         \
    template BasicTensor<T> layer_norm_backward(const LayerNormCache<T>&, const BasicTensor<T>&,                   \
                                                const BasicTensor<T>&, std::span<T>, std::span<T>);           \
    template BasicTensor<T> gelu(const BasicTensor<T>&);                                                           \
    template BasicTensor<T> gelu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                           \
    template BasicTensor<T> gather_rows(const BasicTensor<T>&, std::span<const std::size_t>);                      \
    template void scatter_add_rows(BasicTensor<T>&, std::span<const std::size_t>, const BasicTensor<T>&);          \
    template void add_scaled(BasicTensor<T>&, const BasicTensor<T>&, T);

POSETOK_INSTANTIATE_OPS(float)
POSETOK_INSTANTIATE_OPS(double)

#undef POSETOK_INSTANTIATE_OPS

}  // namespace posetok
