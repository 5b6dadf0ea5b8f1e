// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/layers.hpp"

#include <cmath>
#include <string>

namespace posetok {

namespace {

template <typename T>
BasicTensor<T> head_slice(const BasicTensor<T>& x, const RowGroup& rows, std::size_t head, std::size_t dim) {
    BasicTensor<T> out({rows.size(), dim});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const T* src = x.raw() + rows[i] * x.cols() + head * dim;
        std::copy_n(src, dim, out.raw() + i * dim);
    }
    return out;
}

template <typename T>
void head_scatter_add(BasicTensor<T>& x, const RowGroup& rows, std::size_t head, std::size_t dim,
                      const BasicTensor<T>& part) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        T* dst = x.raw() + rows[i] * x.cols() + head * dim;
        for (std::size_t c = 0; c < dim; ++c) {
            dst[c] += part.at(i, c);
        }
    }
}

}  // namespace

template <typename T>
LinearLayer<T>::LinearLayer(std::size_t in_features, std::size_t out_features, bool use_bias)
    : m_weight({in_features, out_features}), m_bias({out_features}), m_use_bias(use_bias) {
    m_weight.enable_grad();
    m_bias.enable_grad();
}

template <typename T>
void LinearLayer<T>::init(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_features() + out_features()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : m_weight.data()) {
        w = static_cast<T>(dist(rng));
    }
    std::fill(m_bias.data().begin(), m_bias.data().end(), T{0});
}

template <typename T>
BasicTensor<T> LinearLayer<T>::forward(const BasicTensor<T>& x) const {
    BasicTensor<T> y = matmul(x, m_weight);
    if (m_use_bias) {
        const std::size_t n = y.cols();
        for (std::size_t r = 0; r < y.rows(); ++r) {
            T* row = y.raw() + r * n;
            for (std::size_t c = 0; c < n; ++c) {
                row[c] += m_bias[c];
            }
        }
    }
    return y;
}

template <typename T>
BasicTensor<T> LinearLayer<T>::backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
    BasicTensor<T> dx(x.shape());
    BasicTensor<T> dw(m_weight.shape());
    matmul_backward(x, m_weight, grad_out, &dx, &dw);
    auto wg = m_weight.grad();
    for (std::size_t i = 0; i < wg.size(); ++i) {
        wg[i] += dw[i];
    }
    if (m_use_bias) {
        auto bg = m_bias.grad();
        const std::size_t n = grad_out.cols();
        for (std::size_t r = 0; r < grad_out.rows(); ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                bg[c] += grad_out.at(r, c);
            }
        }
    }
    return dx;
}

template <typename T>
void LinearLayer<T>::collect_parameters(std::vector<BasicTensor<T>*>& out) {
    out.push_back(&m_weight);
    if (m_use_bias) {
        out.push_back(&m_bias);
    }
}

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(std::size_t channels, std::size_t heads, bool use_bias)
    : m_channels(channels),
      m_heads(heads),
      m_query(channels, channels, use_bias),
      m_key(channels, channels, use_bias),
      m_value(channels, channels, use_bias),
      m_output(channels, channels, use_bias) {
    if (heads == 0 || channels % heads != 0) {
        throw ConfigError("channel count " + std::to_string(channels) + " is not divisible by head count " +
                          std::to_string(heads));
    }
}

template <typename T>
void MultiHeadAttention<T>::init(Rng& rng) {
    m_query.init(rng);
    m_key.init(rng);
    m_value.init(rng);
    m_output.init(rng);
}

template <typename T>
BasicTensor<T> MultiHeadAttention<T>::forward(const BasicTensor<T>& query_input,
                                              const BasicTensor<T>& key_value_input,
                                              const std::vector<RowGroup>& query_groups,
                                              const std::vector<RowGroup>& key_groups,
                                              AttentionCache<T>* cache) const {
    if (query_input.rank() != 2 || query_input.cols() != m_channels || key_value_input.rank() != 2 ||
        key_value_input.cols() != m_channels) {
        throw DimensionError("attention inputs must have " + std::to_string(m_channels) + " columns, got " +
                             shape_to_string(query_input.shape()) + " and " +
                             shape_to_string(key_value_input.shape()));
    }
    if (query_groups.size() != key_groups.size()) {
        throw DimensionError("attention query/key group counts differ");
    }
    const std::size_t dim = head_dim();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dim)));

    BasicTensor<T> q = m_query.forward(query_input);
    BasicTensor<T> k = m_key.forward(key_value_input);
    BasicTensor<T> v = m_value.forward(key_value_input);
    BasicTensor<T> mixed(query_input.shape());
    std::vector<BasicTensor<T>> probs;
    if (cache != nullptr) {
        probs.reserve(query_groups.size() * m_heads);
    }

    for (std::size_t g = 0; g < query_groups.size(); ++g) {
        for (std::size_t h = 0; h < m_heads; ++h) {
            BasicTensor<T> qh = head_slice(q, query_groups[g], h, dim);
            BasicTensor<T> kh = head_slice(k, key_groups[g], h, dim);
            BasicTensor<T> vh = head_slice(v, key_groups[g], h, dim);
            BasicTensor<T> logits = matmul_transposed(qh, kh);
            for (auto& l : logits.data()) {
                l *= scale;
            }
            BasicTensor<T> p = softmax_rows(logits);
            head_scatter_add(mixed, query_groups[g], h, dim, matmul(p, vh));
            if (cache != nullptr) {
                probs.push_back(std::move(p));
            }
        }
    }

    BasicTensor<T> out = m_output.forward(mixed);
    if (cache != nullptr) {
        cache->query_input = query_input;
        cache->key_value_input = key_value_input;
        cache->queries = std::move(q);
        cache->keys = std::move(k);
        cache->values = std::move(v);
        cache->mixed = std::move(mixed);
        cache->query_groups = query_groups;
        cache->key_groups = key_groups;
        cache->probs = std::move(probs);
    }
    return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> MultiHeadAttention<T>::backward(const AttentionCache<T>& cache,
                                                                          const BasicTensor<T>& grad_out) {
    const std::size_t dim = head_dim();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dim)));

    BasicTensor<T> d_mixed = m_output.backward(cache.mixed, grad_out);
    BasicTensor<T> dq(cache.queries.shape());
    BasicTensor<T> dk(cache.keys.shape());
    BasicTensor<T> dv(cache.values.shape());

    for (std::size_t g = 0; g < cache.query_groups.size(); ++g) {
        const RowGroup& qrows = cache.query_groups[g];
        const RowGroup& krows = cache.key_groups[g];
        for (std::size_t h = 0; h < m_heads; ++h) {
            const BasicTensor<T>& p = cache.probs[g * m_heads + h];
            BasicTensor<T> qh = head_slice(cache.queries, qrows, h, dim);
            BasicTensor<T> kh = head_slice(cache.keys, krows, h, dim);
            BasicTensor<T> vh = head_slice(cache.values, krows, h, dim);
            BasicTensor<T> d_head = head_slice(d_mixed, qrows, h, dim);

            BasicTensor<T> dp(p.shape());
            BasicTensor<T> dvh(vh.shape());
            matmul_backward(p, vh, d_head, &dp, &dvh);
            BasicTensor<T> dlogits = softmax_rows_backward(p, dp);
            for (auto& l : dlogits.data()) {
                l *= scale;
            }
            // logits = qh * kh^T
            BasicTensor<T> dqh = matmul(dlogits, kh);
            BasicTensor<T> dkh = matmul(transpose(dlogits), qh);

            head_scatter_add(dq, qrows, h, dim, dqh);
            head_scatter_add(dk, krows, h, dim, dkh);
            head_scatter_add(dv, krows, h, dim, dvh);
        }
    }

    BasicTensor<T> d_query_input = m_query.backward(cache.query_input, dq);
    BasicTensor<T> d_kv_input = m_key.backward(cache.key_value_input, dk);
    add_scaled(d_kv_input, m_value.backward(cache.key_value_input, dv));
    return {std::move(d_query_input), std::move(d_kv_input)};
}

template <typename T>
void MultiHeadAttention<T>::collect_parameters(std::vector<BasicTensor<T>*>& out) {
    m_query.collect_parameters(out);
    m_key.collect_parameters(out);
    m_value.collect_parameters(out);
    m_output.collect_parameters(out);
}

template class LinearLayer<float>;
template class LinearLayer<double>;
template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;

}  // namespace posetok
