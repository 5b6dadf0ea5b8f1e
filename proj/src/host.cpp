// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/host.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace posetok {

std::string_view to_string(Pipeline pipeline) {
    return pipeline == Pipeline::seq2seq ? "seq2seq" : "seq2frame";
}

Pipeline parse_pipeline(std::string_view name) {
    if (name == "seq2seq") {
        return Pipeline::seq2seq;
    }
    if (name == "seq2frame") {
        return Pipeline::seq2frame;
    }
    throw ConfigError("unknown pipeline '" + std::string(name) + "'");
}

PruneConfig ModelConfig::prune_config() const {
    return PruneConfig{tokens, knn_or_default(), prune_block, prune_strategy};
}

void ModelConfig::validate() const {
    if (frames < 1 || joints < 1 || channels < 1 || blocks < 1) {
        throw ConfigError("frames, joints, channels and blocks must all be positive");
    }
    if (heads < 1 || channels % heads != 0) {
        throw ConfigError("channels C=" + std::to_string(channels) + " must be divisible by heads h=" +
                          std::to_string(heads));
    }
    if (uses_tra() && (tra_heads < 1 || channels % tra_heads != 0)) {
        throw ConfigError("channels C=" + std::to_string(channels) + " must be divisible by recovery heads " +
                          std::to_string(tra_heads));
    }
    prune_config().validate(frames, blocks);
    if (pipeline == Pipeline::seq2seq && recovered_frames() != frames) {
        throw ConfigError("seq2seq recovers all F=" + std::to_string(frames) + " frames; f'=" +
                          std::to_string(recovered_frames()) + " is only meaningful for accounting");
    }
    if (pipeline == Pipeline::seq2seq && recover_strategy == RecoverStrategy::linear && tokens < 2) {
        throw ConfigError("linear recovery needs f >= 2");
    }
}

ModelConfig ModelConfig::mixste_like() {
    ModelConfig c;
    c.frames = 243;
    c.joints = 17;
    c.channels = 512;
    c.blocks = 8;
    c.heads = 8;
    c.prune_block = 3;
    c.tokens = 81;
    return c;
}

ModelConfig ModelConfig::motionbert_like() {
    ModelConfig c;
    c.frames = 243;
    c.joints = 17;
    c.channels = 256;
    c.blocks = 5;
    c.heads = 8;
    c.prune_block = 1;
    c.tokens = 81;
    return c;
}

ModelConfig ModelConfig::toy() {
    return ModelConfig{};
}

std::vector<RowGroup> spatial_groups(std::size_t frames, std::size_t joints) {
    std::vector<RowGroup> groups(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        groups[t].resize(joints);
        for (std::size_t j = 0; j < joints; ++j) {
            groups[t][j] = t * joints + j;
        }
    }
    return groups;
}

std::vector<RowGroup> temporal_groups(std::size_t frames, std::size_t joints) {
    std::vector<RowGroup> groups(joints);
    for (std::size_t j = 0; j < joints; ++j) {
        groups[j].resize(frames);
        for (std::size_t t = 0; t < frames; ++t) {
            groups[j][t] = t * joints + j;
        }
    }
    return groups;
}

template <typename T>
std::vector<double> received_attention(const AttentionCache<T>& temporal_attention, std::size_t frames,
                                       std::size_t heads) {
    const std::size_t groups = temporal_attention.query_groups.size();
    if (temporal_attention.probs.size() != groups * heads) {
        throw DimensionError("attention cache holds " + std::to_string(temporal_attention.probs.size()) +
                             " maps, expected " + std::to_string(groups * heads));
    }
    std::vector<double> score(frames, 0.0);
    const double norm = 1.0 / static_cast<double>(frames * groups * heads);
    for (const auto& p : temporal_attention.probs) {
        if (p.rows() != frames || p.cols() != frames) {
            throw DimensionError("temporal attention map is " + shape_to_string(p.shape()));
        }
        for (std::size_t r = 0; r < frames; ++r) {
            for (std::size_t c = 0; c < frames; ++c) {
                score[c] += static_cast<double>(p.at(r, c)) * norm;
            }
        }
    }
    return score;
}

// ---------------------------------------------------------------------------
// Transformer blocks

template <typename T>
TransformerSubBlock<T>::TransformerSubBlock(std::size_t channels, std::size_t heads)
    : m_norm1_gain({channels}, T{1}),
      m_norm1_shift({channels}),
      m_attention(channels, heads, /*use_bias=*/true),
      m_norm2_gain({channels}, T{1}),
      m_norm2_shift({channels}),
      m_fc1(channels, 2 * channels, true),
      m_fc2(2 * channels, channels, true) {
    m_norm1_gain.enable_grad();
    m_norm1_shift.enable_grad();
    m_norm2_gain.enable_grad();
    m_norm2_shift.enable_grad();
}

template <typename T>
void TransformerSubBlock<T>::init(Rng& rng) {
    std::fill(m_norm1_gain.data().begin(), m_norm1_gain.data().end(), T{1});
    std::fill(m_norm1_shift.data().begin(), m_norm1_shift.data().end(), T{0});
    std::fill(m_norm2_gain.data().begin(), m_norm2_gain.data().end(), T{1});
    std::fill(m_norm2_shift.data().begin(), m_norm2_shift.data().end(), T{0});
    m_attention.init(rng);
    m_fc1.init(rng);
    m_fc2.init(rng);
}

template <typename T>
BasicTensor<T> TransformerSubBlock<T>::forward(const BasicTensor<T>& x, const std::vector<RowGroup>& groups,
                                               SubBlockCache<T>* cache) const {
    LayerNormCache<T>* norm1_cache = cache != nullptr ? &cache->norm1 : nullptr;
    BasicTensor<T> a = layer_norm(x, m_norm1_gain, m_norm1_shift, norm1_cache);
    BasicTensor<T> h = m_attention.forward(a, a, groups, groups, cache != nullptr ? &cache->attention : nullptr);
    add_scaled(h, x);

    LayerNormCache<T>* norm2_cache = cache != nullptr ? &cache->norm2 : nullptr;
    BasicTensor<T> b = layer_norm(h, m_norm2_gain, m_norm2_shift, norm2_cache);
    BasicTensor<T> u = m_fc1.forward(b);
    BasicTensor<T> g = gelu(u);
    BasicTensor<T> y = m_fc2.forward(g);
    add_scaled(y, h);

    if (cache != nullptr) {
        cache->residual = std::move(h);
        cache->norm2_out = std::move(b);
        cache->hidden_pre = std::move(u);
        cache->hidden = std::move(g);
    }
    return y;
}

template <typename T>
BasicTensor<T> TransformerSubBlock<T>::backward(const SubBlockCache<T>& cache, const BasicTensor<T>& grad_out) {
    BasicTensor<T> dh = grad_out;
    BasicTensor<T> dg = m_fc2.backward(cache.hidden, grad_out);
    BasicTensor<T> du = gelu_backward(cache.hidden_pre, dg);
    BasicTensor<T> db = m_fc1.backward(cache.norm2_out, du);
    add_scaled(dh, layer_norm_backward(cache.norm2, m_norm2_gain, db, m_norm2_gain.grad(), m_norm2_shift.grad()));

    auto [da_query, da_kv] = m_attention.backward(cache.attention, dh);
    add_scaled(da_query, da_kv);
    BasicTensor<T> dx = dh;
    add_scaled(dx, layer_norm_backward(cache.norm1, m_norm1_gain, da_query, m_norm1_gain.grad(), m_norm1_shift.grad()));
    return dx;
}

template <typename T>
void TransformerSubBlock<T>::collect_parameters(std::vector<BasicTensor<T>*>& out) {
    out.push_back(&m_norm1_gain);
    out.push_back(&m_norm1_shift);
    m_attention.collect_parameters(out);
    out.push_back(&m_norm2_gain);
    out.push_back(&m_norm2_shift);
    m_fc1.collect_parameters(out);
    m_fc2.collect_parameters(out);
}

template <typename T>
SpatioTemporalBlock<T>::SpatioTemporalBlock(std::size_t channels, std::size_t heads)
    : m_spatial(channels, heads), m_temporal(channels, heads) {}

template <typename T>
void SpatioTemporalBlock<T>::init(Rng& rng) {
    m_spatial.init(rng);
    m_temporal.init(rng);
}

template <typename T>
BasicTensor<T> SpatioTemporalBlock<T>::forward(const BasicTensor<T>& x, std::size_t frames, std::size_t joints,
                                               BlockCache<T>* cache) const {
    if (x.rank() != 2 || x.rows() != frames * joints) {
        throw DimensionError("block input must have frames*joints rows, got " + shape_to_string(x.shape()));
    }
    if (cache != nullptr) {
        cache->frames = frames;
    }
    BasicTensor<T> s =
        m_spatial.forward(x, spatial_groups(frames, joints), cache != nullptr ? &cache->spatial : nullptr);
    return m_temporal.forward(s, temporal_groups(frames, joints), cache != nullptr ? &cache->temporal : nullptr);
}

template <typename T>
BasicTensor<T> SpatioTemporalBlock<T>::backward(const BlockCache<T>& cache, const BasicTensor<T>& grad_out) {
    BasicTensor<T> ds = m_temporal.backward(cache.temporal, grad_out);
    return m_spatial.backward(cache.spatial, ds);
}

template <typename T>
void SpatioTemporalBlock<T>::collect_parameters(std::vector<BasicTensor<T>*>& out) {
    m_spatial.collect_parameters(out);
    m_temporal.collect_parameters(out);
}

// ---------------------------------------------------------------------------
// Host model

template <typename T>
HostModel<T>::HostModel(const ModelConfig& config)
    : m_config(config),
      m_embed(2, config.channels, true),
      m_joint_position({config.joints, config.channels}),
      m_temporal_position({config.frames, config.channels}),
      m_final_gain({config.channels}, T{1}),
      m_final_shift({config.channels}),
      m_head(config.channels, 3, true) {
    m_config.validate();
    m_blocks.reserve(config.blocks);
    for (std::size_t b = 0; b < config.blocks; ++b) {
        m_blocks.emplace_back(config.channels, config.heads);
    }
    if (config.uses_tra()) {
        m_tra.emplace(config.recovered_frames(), config.channels, config.tra_heads);
    }
    m_joint_position.enable_grad();
    m_temporal_position.enable_grad();
    m_final_gain.enable_grad();
    m_final_shift.enable_grad();
}

template <typename T>
void HostModel<T>::init(std::uint64_t seed) {
    Rng rng(seed);
    m_embed.init(rng);
    std::normal_distribution<double> table(0.0, 0.02);
    for (auto& v : m_joint_position.data()) {
        v = static_cast<T>(table(rng));
    }
    for (auto& v : m_temporal_position.data()) {
        v = static_cast<T>(table(rng));
    }
    for (auto& block : m_blocks) {
        block.init(rng);
    }
    std::fill(m_final_gain.data().begin(), m_final_gain.data().end(), T{1});
    std::fill(m_final_shift.data().begin(), m_final_shift.data().end(), T{0});
    m_head.init(rng);
    if (m_tra) {
        m_tra->init(rng);
    }
}

namespace {

template <typename T>
BasicTensor<T> flatten_input(const PoseSequence& poses2d, const ModelConfig& config) {
    if (poses2d.frames() != config.frames || poses2d.joints() != config.joints || poses2d.dims() != 2) {
        throw DimensionError("model expects " + std::to_string(config.frames) + " x " +
                             std::to_string(config.joints) + " x 2 input, got " +
                             shape_to_string(poses2d.tensor().shape()));
    }
    const auto& src = poses2d.tensor();
    BasicTensor<T> input({config.frames * config.joints, 2});
    for (std::size_t i = 0; i < src.size(); ++i) {
        input[i] = static_cast<T>(src[i]);
    }
    return input;
}

RowGroup frame_rows(std::span<const std::size_t> frames, std::size_t joints) {
    RowGroup rows;
    rows.reserve(frames.size() * joints);
    for (auto t : frames) {
        for (std::size_t j = 0; j < joints; ++j) {
            rows.push_back(t * joints + j);
        }
    }
    return rows;
}

}  // namespace

template <typename T>
BasicTensor<T> HostModel<T>::embed_flat(const BasicTensor<T>& input) const {
    BasicTensor<T> x = m_embed.forward(input);
    const std::size_t joints = m_config.joints, channels = m_config.channels;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const std::size_t t = r / joints, j = r % joints;
        for (std::size_t c = 0; c < channels; ++c) {
            x.at(r, c) += m_joint_position.at(j, c) + m_temporal_position.at(t, c);
        }
    }
    return x;
}

template <typename T>
BasicTensor<T> HostModel<T>::embed(const PoseSequence& poses2d) const {
    return embed_flat(flatten_input<T>(poses2d, m_config))
        .reshaped({m_config.frames, m_config.joints, m_config.channels});
}

template <typename T>
IndexList HostModel<T>::choose_frames(const BasicTensor<T>& tokens, std::size_t frames, const PoseSequence& poses2d,
                                      const BlockCache<T>& prune_block_cache,
                                      std::optional<ClusterResult>* clusters) const {
    const std::size_t keep = m_config.tokens;
    if (keep == frames) {
        IndexList all(frames);
        for (std::size_t t = 0; t < frames; ++t) {
            all[t] = t;
        }
        return all;
    }
    switch (m_config.prune_strategy) {
    case PruneStrategy::tpc: {
        BasicTensor<T> grid = tokens.reshaped({frames, m_config.joints, m_config.channels});
        ClusterResult result = cluster_pooled(spatial_pool(grid), keep, m_config.knn_or_default());
        IndexList selected = result.selected_indexes;
        if (clusters != nullptr) {
            *clusters = std::move(result);
        }
        return selected;
    }
    case PruneStrategy::uniform:
        return select_uniform(frames, keep);
    case PruneStrategy::attention:
        return select_by_attention(frames,
                                   received_attention(prune_block_cache.temporal.attention, frames, m_config.heads),
                                   keep);
    case PruneStrategy::motion:
        return select_by_motion(poses2d, keep);
    }
    throw ConfigError("unhandled prune strategy");
}

template <typename T>
BasicTensor<T> HostModel<T>::forward(const PoseSequence& poses2d, ForwardCache<T>* cache,
                                     const ForwardOptions& options) const {
    const ModelConfig& cfg = m_config;
    BasicTensor<T> input = flatten_input<T>(poses2d, cfg);
    BasicTensor<T> x = embed_flat(input);

    ForwardCache<T> scratch;
    ForwardCache<T>& fc = cache != nullptr ? *cache : scratch;
    fc = ForwardCache<T>{};
    fc.blocks.resize(cfg.blocks);
    const bool keep_all_blocks = cache != nullptr;
    const bool need_prune_block = cfg.prune_strategy == PruneStrategy::attention;

    std::size_t frames_now = cfg.frames;
    std::size_t head_position = cfg.center_frame();
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        if (b == cfg.prune_block && !options.baseline) {
            IndexList selected;
            if (options.selection) {
                selected = *options.selection;
                for (std::size_t i = 0; i < selected.size(); ++i) {
                    if (selected[i] >= cfg.frames || (i > 0 && selected[i] <= selected[i - 1])) {
                        throw DimensionError("selection override must be ascending frame indexes below F");
                    }
                }
                if (selected.empty()) {
                    throw DimensionError("selection override is empty");
                }
            } else {
                selected = choose_frames(x, frames_now, poses2d, fc.blocks[b - 1], &fc.clusters);
            }
            IndexList order = selected;
            if (cfg.pipeline == Pipeline::seq2frame) {
                const std::size_t center = cfg.center_frame();
                auto it = std::find(selected.begin(), selected.end(), center);
                if (it == selected.end()) {
                    order.insert(order.begin(), center);
                    head_position = 0;
                } else {
                    head_position = static_cast<std::size_t>(it - selected.begin());
                }
            }
            RowGroup rows = frame_rows(order, cfg.joints);
            x = gather_rows(x, std::span<const std::size_t>(rows));
            frames_now = order.size();
            fc.pruned = true;
            fc.selected = std::move(selected);
            fc.kept_order = std::move(order);
        }
        const bool store = keep_all_blocks || (need_prune_block && b + 1 == cfg.prune_block);
        x = m_blocks[b].forward(x, frames_now, cfg.joints, store ? &fc.blocks[b] : nullptr);
    }
    fc.kept_frames = frames_now;
    fc.input = std::move(input);

    std::size_t out_frames = 1;
    if (cfg.pipeline == Pipeline::seq2seq) {
        out_frames = cfg.frames;
        if (fc.pruned) {
            BasicTensor<T> grid = x.reshaped({frames_now, cfg.joints, cfg.channels});
            BasicTensor<T> recovered;
            if (cfg.recover_strategy == RecoverStrategy::tra) {
                recovered = m_tra->forward(grid, keep_all_blocks ? &fc.tra : nullptr);
            } else {
                fc.plan = cfg.recover_strategy == RecoverStrategy::nearest
                              ? nearest_plan(fc.selected, cfg.frames)
                              : linear_plan(fc.selected, cfg.frames);
                recovered = apply_plan(fc.plan, grid);
            }
            out_frames = recovered.dim(0);
            x = recovered.reshaped({out_frames * cfg.joints, cfg.channels});
        }
        fc.head_rows.resize(out_frames * cfg.joints);
        for (std::size_t r = 0; r < fc.head_rows.size(); ++r) {
            fc.head_rows[r] = r;
        }
    } else {
        const std::size_t pos = fc.pruned ? head_position : cfg.center_frame();
        fc.head_rows = frame_rows(std::span<const std::size_t>(&pos, 1), cfg.joints);
    }

    BasicTensor<T> h = gather_rows(x, std::span<const std::size_t>(fc.head_rows));
    BasicTensor<T> normed = layer_norm(h, m_final_gain, m_final_shift, &fc.final_norm);
    BasicTensor<T> out = m_head.forward(normed);
    if (keep_all_blocks) {
        fc.head_input = std::move(normed);
    }
    return out.reshaped({out_frames, cfg.joints, 3});
}

template <typename T>
void HostModel<T>::backward(const ForwardCache<T>& cache, const BasicTensor<T>& grad_out) {
    const ModelConfig& cfg = m_config;
    BasicTensor<T> d_pred = grad_out.reshaped({grad_out.size() / 3, 3});
    BasicTensor<T> d_normed = m_head.backward(cache.head_input, d_pred);
    BasicTensor<T> d_h = layer_norm_backward(cache.final_norm, m_final_gain, d_normed, m_final_gain.grad(), m_final_shift.grad());

    std::size_t final_rows = cache.kept_frames * cfg.joints;
    if (cfg.pipeline == Pipeline::seq2seq) {
        final_rows = cache.head_rows.size();
    }
    BasicTensor<T> dx({final_rows, cfg.channels});
    scatter_add_rows(dx, std::span<const std::size_t>(cache.head_rows), d_h);

    if (cfg.pipeline == Pipeline::seq2seq && cache.pruned) {
        BasicTensor<T> d_rec = dx.reshaped({final_rows / cfg.joints, cfg.joints, cfg.channels});
        BasicTensor<T> d_grid = cfg.recover_strategy == RecoverStrategy::tra
                                    ? m_tra->backward(cache.tra, d_rec)
                                    : apply_plan_backward(cache.plan, d_rec, cache.kept_frames);
        dx = d_grid.reshaped({cache.kept_frames * cfg.joints, cfg.channels});
    }

    for (std::size_t b = cfg.blocks; b-- > 0;) {
        dx = m_blocks[b].backward(cache.blocks[b], dx);
        if (b == cfg.prune_block && cache.pruned) {
            BasicTensor<T> full({cfg.frames * cfg.joints, cfg.channels});
            RowGroup rows = frame_rows(cache.kept_order, cfg.joints);
            scatter_add_rows(full, std::span<const std::size_t>(rows), dx);
            dx = std::move(full);
        }
    }

    m_embed.backward(cache.input, dx);
    auto jgrad = m_joint_position.grad();
    auto tgrad = m_temporal_position.grad();
    for (std::size_t r = 0; r < dx.rows(); ++r) {
        const std::size_t t = r / cfg.joints, j = r % cfg.joints;
        for (std::size_t c = 0; c < cfg.channels; ++c) {
            jgrad[j * cfg.channels + c] += dx.at(r, c);
            tgrad[t * cfg.channels + c] += dx.at(r, c);
        }
    }
}

template <typename T>
BasicTensor<T> HostModel<T>::hidden_tokens(const PoseSequence& poses2d, std::size_t block) const {
    if (block > m_config.blocks) {
        throw ConfigError("block " + std::to_string(block) + " exceeds L=" + std::to_string(m_config.blocks));
    }
    BasicTensor<T> x = embed_flat(flatten_input<T>(poses2d, m_config));
    for (std::size_t b = 0; b < block; ++b) {
        x = m_blocks[b].forward(x, m_config.frames, m_config.joints, nullptr);
    }
    return x.reshaped({m_config.frames, m_config.joints, m_config.channels});
}

template <typename T>
std::vector<double> HostModel<T>::temporal_attention_scores(const PoseSequence& poses2d, std::size_t block) const {
    if (block < 1 || block > m_config.prune_block) {
        throw ConfigError("attention block " + std::to_string(block) + " must lie in [1, " +
                          std::to_string(m_config.prune_block) + "]");
    }
    BasicTensor<T> x = embed_flat(flatten_input<T>(poses2d, m_config));
    BlockCache<T> last;
    for (std::size_t b = 0; b < block; ++b) {
        x = m_blocks[b].forward(x, m_config.frames, m_config.joints, b + 1 == block ? &last : nullptr);
    }
    return received_attention(last.temporal.attention, m_config.frames, m_config.heads);
}

template <typename T>
std::vector<BasicTensor<T>*> HostModel<T>::parameters() {
    std::vector<BasicTensor<T>*> out;
    m_embed.collect_parameters(out);
    out.push_back(&m_joint_position);
    out.push_back(&m_temporal_position);
    for (auto& block : m_blocks) {
        block.collect_parameters(out);
    }
    out.push_back(&m_final_gain);
    out.push_back(&m_final_shift);
    m_head.collect_parameters(out);
    if (m_tra) {
        m_tra->collect_parameters(out);
    }
    return out;
}

template <typename T>
std::vector<const BasicTensor<T>*> HostModel<T>::parameters() const {
    auto params = const_cast<HostModel*>(this)->parameters();
    return {params.begin(), params.end()};
}

template <typename T>
std::size_t HostModel<T>::parameter_count() const {
    std::size_t total = 0;
    for (const auto* p : parameters()) {
        total += p->size();
    }
    return total;
}

template <typename T>
void HostModel<T>::zero_grad() {
    for (auto* p : parameters()) {
        p->zero_grad();
    }
}

// ---------------------------------------------------------------------------
// Pipelines and training

namespace {

PoseSequence to_pose(const BasicTensor<float>& out) {
    return PoseSequence(out);
}

}  // namespace

PoseSequence forward_seq2seq(const PoseSequence& poses2d, const HostModel<float>& model) {
    if (model.config().pipeline != Pipeline::seq2seq) {
        throw ConfigError("model is configured for the seq2frame pipeline");
    }
    return to_pose(model.forward(poses2d));
}

PoseSequence forward_seq2frame(const PoseSequence& poses2d, const HostModel<float>& model) {
    if (model.config().pipeline != Pipeline::seq2frame) {
        throw ConfigError("model is configured for the seq2seq pipeline");
    }
    return to_pose(model.forward(poses2d));
}

PoseSequence forward_unpruned(const PoseSequence& poses2d, const HostModel<float>& model) {
    ForwardOptions options;
    options.baseline = true;
    return to_pose(model.forward(poses2d, nullptr, options));
}

std::vector<double> temporal_attention_scores(const HostModel<float>& model, const PoseSequence& poses2d,
                                              std::size_t block) {
    return model.temporal_attention_scores(poses2d, block);
}

template <typename T>
double mpjpe_loss(const BasicTensor<T>& prediction, const PoseSequence& target, std::size_t center_frame,
                  BasicTensor<T>* grad) {
    if (prediction.rank() != 3 || prediction.dim(2) != 3 || target.dims() != 3 ||
        prediction.dim(1) != target.joints()) {
        throw DimensionError("prediction " + shape_to_string(prediction.shape()) + " does not match target " +
                             shape_to_string(target.tensor().shape()));
    }
    const std::size_t frames = prediction.dim(0), joints = prediction.dim(1);
    std::size_t first = 0;
    if (frames != target.frames()) {
        if (frames != 1 || center_frame >= target.frames()) {
            throw DimensionError("prediction has " + std::to_string(frames) + " frames, target " +
                                 std::to_string(target.frames()));
        }
        first = center_frame;
    }
    const double count = static_cast<double>(frames * joints);
    if (grad != nullptr) {
        *grad = BasicTensor<T>(prediction.shape());
    }
    double total = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t j = 0; j < joints; ++j) {
            double diff[3];
            double sq = 0.0;
            for (std::size_t d = 0; d < 3; ++d) {
                diff[d] = static_cast<double>(prediction.at(t, j, d)) - target.at(first + t, j, d);
                sq += diff[d] * diff[d];
            }
            const double norm = std::sqrt(sq);
            total += norm;
            if (grad != nullptr && norm > 0.0) {
                for (std::size_t d = 0; d < 3; ++d) {
                    grad->at(t, j, d) = static_cast<T>(diff[d] / (norm * count));
                }
            }
        }
    }
    return total / count;
}

template <typename T>
double sample_loss(HostModel<T>& model, const TrainingSample& sample, bool with_grad, double weight,
                   const ForwardOptions& options) {
    if (!with_grad) {
        return mpjpe_loss(model.forward(sample.input2d, nullptr, options), sample.target3d,
                          model.config().center_frame(), static_cast<BasicTensor<T>*>(nullptr));
    }
    ForwardCache<T> cache;
    BasicTensor<T> prediction = model.forward(sample.input2d, &cache, options);
    BasicTensor<T> grad;
    const double loss = mpjpe_loss(prediction, sample.target3d, model.config().center_frame(), &grad);
    for (auto& g : grad.data()) {
        g = static_cast<T>(g * weight);
    }
    model.backward(cache, grad);
    return loss;
}

double train_step(HostModel<float>& model, std::span<const TrainingSample> batch, float learning_rate) {
    if (batch.empty()) {
        throw ConfigError("training batch is empty");
    }
    model.zero_grad();
    const double weight = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& sample : batch) {
        total += sample_loss(model, sample, true, weight);
    }
    const double loss = total * weight;
    if (!std::isfinite(loss)) {
        throw NumericalError("non-finite training loss " + std::to_string(loss));
    }
    auto params = model.parameters();
    for (auto* p : params) {
        for (auto g : p->grad()) {
            if (!std::isfinite(g)) {
                throw NumericalError("non-finite gradient at loss " + std::to_string(loss));
            }
        }
    }
    for (auto* p : params) {
        auto grad = p->grad();
        auto data = p->data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] -= learning_rate * grad[i];
        }
    }
    return loss;
}

template class TransformerSubBlock<float>;
template class TransformerSubBlock<double>;
template class SpatioTemporalBlock<float>;
template class SpatioTemporalBlock<double>;
template class HostModel<float>;
template class HostModel<double>;
template std::vector<double> received_attention(const AttentionCache<float>&, std::size_t, std::size_t);
template std::vector<double> received_attention(const AttentionCache<double>&, std::size_t, std::size_t);
template double mpjpe_loss(const BasicTensor<float>&, const PoseSequence&, std::size_t, BasicTensor<float>*);
template double mpjpe_loss(const BasicTensor<double>&, const PoseSequence&, std::size_t, BasicTensor<double>*);
template double sample_loss(HostModel<float>&, const TrainingSample&, bool, double, const ForwardOptions&);
template double sample_loss(HostModel<double>&, const TrainingSample&, bool, double, const ForwardOptions&);

}  // namespace posetok
