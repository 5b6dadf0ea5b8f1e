// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/recovery.hpp"

#include <iostream>
#include <string>

namespace posetok {

std::string_view to_string(RecoverStrategy strategy) {
    switch (strategy) {
    case RecoverStrategy::tra:
        return "tra";
    case RecoverStrategy::nearest:
        return "nearest";
    case RecoverStrategy::linear:
        return "linear";
    }
    return "unknown";
}

RecoverStrategy parse_recover_strategy(std::string_view name) {
    for (auto s : {RecoverStrategy::tra, RecoverStrategy::nearest, RecoverStrategy::linear}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown recover strategy '" + std::string(name) + "'");
}

template <typename T>
BasicTensor<T> mca(const BasicTensor<T>& queries,
                   const BasicTensor<T>& keys_values,
                   const MultiHeadAttention<T>& attention,
                   AttentionCache<T>* cache) {
    if (queries.rank() != 2 || keys_values.rank() != 2) {
        throw DimensionError("mca expects rank-2 queries and keys");
    }
    RowGroup qrows(queries.rows()), krows(keys_values.rows());
    for (std::size_t i = 0; i < qrows.size(); ++i) {
        qrows[i] = i;
    }
    for (std::size_t i = 0; i < krows.size(); ++i) {
        krows[i] = i;
    }
    return attention.forward(queries, keys_values, {qrows}, {krows}, cache);
}

template <typename T>
TokenRecoveringAttention<T>::TokenRecoveringAttention(std::size_t recovered_frames,
                                                      std::size_t channels,
                                                      std::size_t heads)
    : m_queries({recovered_frames, channels}), m_attention(channels, heads, /*use_bias=*/false) {
    m_queries.enable_grad();
}

template <typename T>
void TokenRecoveringAttention<T>::init(Rng& rng) {
    std::fill(m_queries.data().begin(), m_queries.data().end(), T{0});
    m_attention.init(rng);
}

template <typename T>
BasicTensor<T> TokenRecoveringAttention<T>::forward(const BasicTensor<T>& kept, TraCache<T>* cache) const {
    if (kept.rank() != 3 || kept.dim(2) != channels()) {
        throw DimensionError("recovery input must be f x J x " + std::to_string(channels()) + ", got " +
                             shape_to_string(kept.shape()));
    }
    const std::size_t kept_frames = kept.dim(0), joints = kept.dim(1), channel_count = channels();
    const std::size_t out_frames = recovered_frames();
    if (out_frames < kept_frames) {
        std::cerr << "warning: recovering " << out_frames << " frames from " << kept_frames
                  << " kept frames shortens the sequence\n";
    }

    // Query rows are laid out joint-major (j * F' + t), one copy of the bank per joint.
    BasicTensor<T> query_input({joints * out_frames, channel_count});
    std::vector<RowGroup> query_groups(joints), key_groups(joints);
    for (std::size_t j = 0; j < joints; ++j) {
        std::copy_n(m_queries.raw(), out_frames * channel_count, query_input.raw() + j * out_frames * channel_count);
        query_groups[j].resize(out_frames);
        for (std::size_t t = 0; t < out_frames; ++t) {
            query_groups[j][t] = j * out_frames + t;
        }
        key_groups[j].resize(kept_frames);
        for (std::size_t t = 0; t < kept_frames; ++t) {
            key_groups[j][t] = t * joints + j;
        }
    }
    BasicTensor<T> kv = kept.reshaped({kept_frames * joints, channel_count});

    AttentionCache<T>* attn_cache = cache != nullptr ? &cache->attention : nullptr;
    BasicTensor<T> attended = m_attention.forward(query_input, kv, query_groups, key_groups, attn_cache);

    BasicTensor<T> out({out_frames, joints, channel_count});
    for (std::size_t t = 0; t < out_frames; ++t) {
        for (std::size_t j = 0; j < joints; ++j) {
            for (std::size_t c = 0; c < channel_count; ++c) {
                out.at(t, j, c) = m_queries.at(t, c) + attended.at(j * out_frames + t, c);
            }
        }
    }
    if (cache != nullptr) {
        cache->kept_frames = kept_frames;
    }
    return out;
}

template <typename T>
BasicTensor<T> TokenRecoveringAttention<T>::backward(const TraCache<T>& cache, const BasicTensor<T>& grad_out) {
    const std::size_t out_frames = recovered_frames(), channel_count = channels();
    if (grad_out.rank() != 3 || grad_out.dim(0) != out_frames || grad_out.dim(2) != channel_count) {
        throw DimensionError("recovery gradient has shape " + shape_to_string(grad_out.shape()));
    }
    const std::size_t joints = grad_out.dim(1);

    BasicTensor<T> d_attended({joints * out_frames, channel_count});
    auto qgrad = m_queries.grad();
    for (std::size_t t = 0; t < out_frames; ++t) {
        for (std::size_t j = 0; j < joints; ++j) {
            for (std::size_t c = 0; c < channel_count; ++c) {
                const T g = grad_out.at(t, j, c);
                d_attended.at(j * out_frames + t, c) = g;
                qgrad[t * channel_count + c] += g;  // residual path
            }
        }
    }
    auto [d_query_input, d_kv] = m_attention.backward(cache.attention, d_attended);
    for (std::size_t j = 0; j < joints; ++j) {
        for (std::size_t i = 0; i < out_frames * channel_count; ++i) {
            qgrad[i] += d_query_input[j * out_frames * channel_count + i];
        }
    }
    return d_kv.reshaped({cache.kept_frames, joints, channel_count});
}

template <typename T>
std::size_t TokenRecoveringAttention<T>::parameter_count() const {
    return m_queries.size() + 4 * channels() * channels();
}

template <typename T>
void TokenRecoveringAttention<T>::collect_parameters(std::vector<BasicTensor<T>*>& out) {
    out.push_back(&m_queries);
    m_attention.collect_parameters(out);
}

namespace {

void validate_kept(std::span<const std::size_t> kept, std::size_t frames) {
    if (kept.empty()) {
        throw ConfigError("recovery needs at least one kept frame");
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] >= frames) {
            throw DimensionError("kept frame " + std::to_string(kept[i]) + " out of range for " +
                                 std::to_string(frames) + " frames");
        }
        if (i > 0 && kept[i] <= kept[i - 1]) {
            throw DimensionError("kept frame indexes must be strictly ascending");
        }
    }
}

}  // namespace

InterpolationPlan nearest_plan(std::span<const std::size_t> kept_indexes, std::size_t frames) {
    validate_kept(kept_indexes, frames);
    InterpolationPlan plan;
    plan.frames.resize(frames);
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        while (cursor + 1 < kept_indexes.size() && kept_indexes[cursor + 1] <= t) {
            ++cursor;
        }
        std::size_t best = cursor;
        if (cursor + 1 < kept_indexes.size() && kept_indexes[cursor] < t) {
            const std::size_t before = t - kept_indexes[cursor];
            const std::size_t after = kept_indexes[cursor + 1] - t;
            if (after < before) {
                best = cursor + 1;
            }
        }
        plan.frames[t] = {{best, 1.0}};
    }
    return plan;
}

InterpolationPlan linear_plan(std::span<const std::size_t> kept_indexes, std::size_t frames) {
    validate_kept(kept_indexes, frames);
    if (kept_indexes.size() < 2) {
        throw ConfigError("linear recovery needs at least two kept frames");
    }
    InterpolationPlan plan;
    plan.frames.resize(frames);
    const std::size_t last = kept_indexes.size() - 1;
    std::size_t seg = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        if (t <= kept_indexes.front()) {
            plan.frames[t] = {{0, 1.0}};
            continue;
        }
        if (t >= kept_indexes.back()) {
            plan.frames[t] = {{last, 1.0}};
            continue;
        }
        while (kept_indexes[seg + 1] < t) {
            ++seg;
        }
        const std::size_t a = kept_indexes[seg], b = kept_indexes[seg + 1];
        if (t == a) {
            plan.frames[t] = {{seg, 1.0}};
        } else if (t == b) {
            plan.frames[t] = {{seg + 1, 1.0}};
        } else {
            const double w = static_cast<double>(t - a) / static_cast<double>(b - a);
            plan.frames[t] = {{seg, 1.0 - w}, {seg + 1, w}};
        }
    }
    return plan;
}

template <typename T>
BasicTensor<T> apply_plan(const InterpolationPlan& plan, const BasicTensor<T>& kept) {
    if (kept.rank() != 3) {
        throw DimensionError("interpolation input must be f x J x C, got " + shape_to_string(kept.shape()));
    }
    const std::size_t row = kept.dim(1) * kept.dim(2);
    BasicTensor<T> out({plan.frames.size(), kept.dim(1), kept.dim(2)});
    for (std::size_t t = 0; t < plan.frames.size(); ++t) {
        T* dst = out.raw() + t * row;
        for (const auto& term : plan.frames[t]) {
            if (term.source >= kept.dim(0)) {
                throw DimensionError("interpolation source " + std::to_string(term.source) + " out of range");
            }
            const T* src = kept.raw() + term.source * row;
            const T w = static_cast<T>(term.weight);
            for (std::size_t i = 0; i < row; ++i) {
                dst[i] += w * src[i];
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> apply_plan_backward(const InterpolationPlan& plan, const BasicTensor<T>& grad_out,
                                   std::size_t kept_frames) {
    const std::size_t row = grad_out.dim(1) * grad_out.dim(2);
    BasicTensor<T> grad_kept({kept_frames, grad_out.dim(1), grad_out.dim(2)});
    for (std::size_t t = 0; t < plan.frames.size(); ++t) {
        const T* src = grad_out.raw() + t * row;
        for (const auto& term : plan.frames[t]) {
            T* dst = grad_kept.raw() + term.source * row;
            const T w = static_cast<T>(term.weight);
            for (std::size_t i = 0; i < row; ++i) {
                dst[i] += w * src[i];
            }
        }
    }
    return grad_kept;
}

template BasicTensor<float> mca(const BasicTensor<float>&, const BasicTensor<float>&,
                                const MultiHeadAttention<float>&, AttentionCache<float>*);
template BasicTensor<double> mca(const BasicTensor<double>&, const BasicTensor<double>&,
                                 const MultiHeadAttention<double>&, AttentionCache<double>*);
template class TokenRecoveringAttention<float>;
template class TokenRecoveringAttention<double>;
template BasicTensor<float> apply_plan(const InterpolationPlan&, const BasicTensor<float>&);
template BasicTensor<double> apply_plan(const InterpolationPlan&, const BasicTensor<double>&);
template BasicTensor<float> apply_plan_backward(const InterpolationPlan&, const BasicTensor<float>&, std::size_t);
template BasicTensor<double> apply_plan_backward(const InterpolationPlan&, const BasicTensor<double>&, std::size_t);

}  // namespace posetok
