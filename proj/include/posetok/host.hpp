// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "posetok/layers.hpp"
#include "posetok/pose.hpp"
#include "posetok/recovery.hpp"
#include "posetok/tpc.hpp"

namespace posetok {

enum class Pipeline { seq2seq, seq2frame };

std::string_view to_string(Pipeline pipeline);
Pipeline parse_pipeline(std::string_view name);

/// Architecture and pruning hyperparameters of the host transformer.
struct ModelConfig {
    std::size_t frames = 27;      // F
    std::size_t joints = 17;      // J
    std::size_t channels = 32;    // C
    std::size_t blocks = 2;       // L
    std::size_t heads = 4;        // h, host attention
    std::size_t tra_heads = 8;    // recovery attention
    std::size_t prune_block = 1;  // n, prune after this block (1-based)
    std::size_t tokens = 9;       // f
    std::size_t recovered = 0;    // f', 0 means F
    std::size_t knn = 0;          // k, 0 means default_knn(F)
    Pipeline pipeline = Pipeline::seq2seq;
    PruneStrategy prune_strategy = PruneStrategy::tpc;
    RecoverStrategy recover_strategy = RecoverStrategy::tra;

    std::size_t recovered_frames() const { return recovered == 0 ? frames : recovered; }
    std::size_t knn_or_default() const { return knn == 0 ? default_knn(frames) : knn; }
    std::size_t center_frame() const { return frames / 2; }
    bool uses_tra() const { return pipeline == Pipeline::seq2seq && recover_strategy == RecoverStrategy::tra; }
    PruneConfig prune_config() const;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;

    /// L=8, C=512, F=243, J=17, n=3, f=81, 8 heads.
    static ModelConfig mixste_like();
    /// L=5, C=256, F=243, J=17, n=1, f=81, 8 heads.
    static ModelConfig motionbert_like();
    /// F=27, J=17, C=32, L=2, n=1, f=9.
    static ModelConfig toy();
};

template <typename T>
struct SubBlockCache {
    LayerNormCache<T> norm1;
    AttentionCache<T> attention;
    BasicTensor<T> residual;  // x + attention(...)
    LayerNormCache<T> norm2;
    BasicTensor<T> norm2_out;
    BasicTensor<T> hidden_pre;  // fc1 output
    BasicTensor<T> hidden;      // gelu(fc1 output)
};

/// Pre-norm attention + pre-norm feed-forward (expansion 2), both residual.
template <typename T>
class TransformerSubBlock {
public:
    TransformerSubBlock() = default;
    TransformerSubBlock(std::size_t channels, std::size_t heads);

    void init(Rng& rng);

    BasicTensor<T> forward(const BasicTensor<T>& x, const std::vector<RowGroup>& groups,
                           SubBlockCache<T>* cache) const;
    BasicTensor<T> backward(const SubBlockCache<T>& cache, const BasicTensor<T>& grad_out);

    void collect_parameters(std::vector<BasicTensor<T>*>& out);

    const MultiHeadAttention<T>& attention() const { return m_attention; }

private:
    BasicTensor<T> m_norm1_gain, m_norm1_shift;
    MultiHeadAttention<T> m_attention;
    BasicTensor<T> m_norm2_gain, m_norm2_shift;
    LinearLayer<T> m_fc1, m_fc2;
};

template <typename T>
struct BlockCache {
    std::size_t frames = 0;
    SubBlockCache<T> spatial;
    SubBlockCache<T> temporal;
};

/// Spatial attention among the J joints of each frame, then temporal attention
/// among the frames of each joint. Tokens are rows t * J + j of a (frames*J) x C matrix.
template <typename T>
class SpatioTemporalBlock {
public:
    SpatioTemporalBlock() = default;
    SpatioTemporalBlock(std::size_t channels, std::size_t heads);

    void init(Rng& rng);

    BasicTensor<T> forward(const BasicTensor<T>& x, std::size_t frames, std::size_t joints,
                           BlockCache<T>* cache) const;
    BasicTensor<T> backward(const BlockCache<T>& cache, const BasicTensor<T>& grad_out);

    void collect_parameters(std::vector<BasicTensor<T>*>& out);

private:
    TransformerSubBlock<T> m_spatial;
    TransformerSubBlock<T> m_temporal;
};

std::vector<RowGroup> spatial_groups(std::size_t frames, std::size_t joints);
std::vector<RowGroup> temporal_groups(std::size_t frames, std::size_t joints);

/// Received attention per frame: column means of the temporal attention maps,
/// averaged over joints and heads. Sums to 1.
template <typename T>
std::vector<double> received_attention(const AttentionCache<T>& temporal_attention, std::size_t frames,
                                       std::size_t heads);

struct ForwardOptions {
    /// Skip the prune/recover stage altogether (the unpruned reference model).
    bool baseline = false;
    /// Use these frames (ascending) instead of running the prune strategy.
    std::optional<IndexList> selection;
};

template <typename T>
struct ForwardCache {
    BasicTensor<T> input;  // (F*J) x 2
    std::vector<BlockCache<T>> blocks;
    bool pruned = false;
    IndexList kept_order;  // frames fed to the blocks after the prune point, in row order
    IndexList selected;    // strategy output, ascending
    std::optional<ClusterResult> clusters;
    std::size_t kept_frames = 0;
    TraCache<T> tra;
    InterpolationPlan plan;
    LayerNormCache<T> final_norm;
    BasicTensor<T> head_input;
    RowGroup head_rows;  // rows of the final token matrix fed to the head
};

/// Minimal spatio-temporal lifting transformer hosting the prune/recover stage.
template <typename T>
class HostModel {
public:
    explicit HostModel(const ModelConfig& config);

    /// Deterministic initialization from a seed. TRA queries start at zero.
    void init(std::uint64_t seed);

    const ModelConfig& config() const { return m_config; }

    /// F x J x 2 -> F x J x C token grid.
    BasicTensor<T> embed(const PoseSequence& poses2d) const;

    /// seq2seq: F x J x 3. seq2frame: 1 x J x 3 (center frame).
    BasicTensor<T> forward(const PoseSequence& poses2d, ForwardCache<T>* cache = nullptr,
                           const ForwardOptions& options = {}) const;

    /// Accumulates parameter gradients for dL/d output.
    void backward(const ForwardCache<T>& cache, const BasicTensor<T>& grad_out);

    /// Token grid F x J x C after `block` unpruned blocks (0 gives the embedding).
    BasicTensor<T> hidden_tokens(const PoseSequence& poses2d, std::size_t block) const;

    /// Received-attention frame scores of the temporal attention in `block` (1-based, <= n).
    std::vector<double> temporal_attention_scores(const PoseSequence& poses2d, std::size_t block) const;

    std::vector<BasicTensor<T>*> parameters();
    std::vector<const BasicTensor<T>*> parameters() const;
    std::size_t parameter_count() const;
    void zero_grad();

    /// Same architecture and values in another precision.
    template <typename U>
    HostModel<U> cast() const {
        HostModel<U> out(m_config);
        copy_parameter_values(parameters(), out.parameters());
        return out;
    }

    std::optional<TokenRecoveringAttention<T>>& recovery() { return m_tra; }
    const std::optional<TokenRecoveringAttention<T>>& recovery() const { return m_tra; }

private:
    BasicTensor<T> embed_flat(const BasicTensor<T>& input) const;
    IndexList choose_frames(const BasicTensor<T>& tokens, std::size_t frames, const PoseSequence& poses2d,
                            const BlockCache<T>& prune_block_cache,
                            std::optional<ClusterResult>* clusters) const;

    ModelConfig m_config;
    LinearLayer<T> m_embed;
    BasicTensor<T> m_joint_position;     // J x C
    BasicTensor<T> m_temporal_position;  // F x C
    std::vector<SpatioTemporalBlock<T>> m_blocks;
    BasicTensor<T> m_final_gain, m_final_shift;
    LinearLayer<T> m_head;
    std::optional<TokenRecoveringAttention<T>> m_tra;
};

PoseSequence forward_seq2seq(const PoseSequence& poses2d, const HostModel<float>& model);
PoseSequence forward_seq2frame(const PoseSequence& poses2d, const HostModel<float>& model);
/// Same pipeline without pruning or recovery.
PoseSequence forward_unpruned(const PoseSequence& poses2d, const HostModel<float>& model);

std::vector<double> temporal_attention_scores(const HostModel<float>& model, const PoseSequence& poses2d,
                                              std::size_t block);

struct TrainingSample {
    PoseSequence input2d;   // F x J x 2
    PoseSequence target3d;  // F x J x 3
};

/// Mean per-joint Euclidean error between prediction and target; writes
/// dL/d prediction into grad (same shape) when non-null. For seq2frame the
/// prediction is compared with the center frame of the target.
template <typename T>
double mpjpe_loss(const BasicTensor<T>& prediction, const PoseSequence& target, std::size_t center_frame,
                  BasicTensor<T>* grad);

/// Loss of one sample; with_grad accumulates parameter gradients scaled by `weight`.
template <typename T>
double sample_loss(HostModel<T>& model, const TrainingSample& sample, bool with_grad, double weight = 1.0,
                   const ForwardOptions& options = {});

/// One plain gradient-descent step on the mean MPJPE of the batch. Returns the
/// pre-step loss. Throws NumericalError (parameters untouched) on a non-finite loss.
double train_step(HostModel<float>& model, std::span<const TrainingSample> batch, float learning_rate);

/// "HOT1" + config as little-endian int32 + parameters as little-endian float32 in declaration order.
void save_model(const HostModel<float>& model, std::ostream& out);
HostModel<float> load_model(std::istream& in);

}  // namespace posetok
