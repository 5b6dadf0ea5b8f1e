// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/tpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace posetok {

std::string_view to_string(PruneStrategy strategy) {
    switch (strategy) {
    case PruneStrategy::tpc:
        return "tpc";
    case PruneStrategy::uniform:
        return "uniform";
    case PruneStrategy::attention:
        return "attention";
    case PruneStrategy::motion:
        return "motion";
    }
    return "unknown";
}

PruneStrategy parse_prune_strategy(std::string_view name) {
    for (auto s : {PruneStrategy::tpc, PruneStrategy::uniform, PruneStrategy::attention, PruneStrategy::motion}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown prune strategy '" + std::string(name) + "'");
}

void PruneConfig::validate(std::size_t frames, std::size_t blocks) const {
    if (tokens < 1 || tokens > frames) {
        throw ConfigError("token count f=" + std::to_string(tokens) + " must lie in [1, " + std::to_string(frames) +
                          "]");
    }
    if (strategy == PruneStrategy::tpc && tokens < frames && (knn < 1 || knn >= frames)) {
        throw ConfigError("neighbor count k=" + std::to_string(knn) + " must lie in [1, " +
                          std::to_string(frames) + ")");
    }
    if (block < 1 || block >= blocks) {
        throw ConfigError("prune block n=" + std::to_string(block) + " must lie in [1, " + std::to_string(blocks) +
                          ")");
    }
}

std::size_t default_knn(std::size_t frames) {
    if (frames < 2) {
        return 1;
    }
    return std::clamp<std::size_t>(std::max<std::size_t>(2, frames / 10), 1, frames - 1);
}

namespace {

template <typename T>
double squared_distance(const BasicTensor<T>& pooled, std::size_t a, std::size_t b) {
    const std::size_t c = pooled.cols();
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        const double d = static_cast<double>(pooled.at(a, i)) - static_cast<double>(pooled.at(b, i));
        sum += d * d;
    }
    return sum;
}

template <typename T>
void require_pooled(const BasicTensor<T>& pooled) {
    if (pooled.rank() != 2) {
        throw DimensionError("pooled tokens must be F x C, got " + shape_to_string(pooled.shape()));
    }
}

}  // namespace

template <typename T>
BasicTensor<T> spatial_pool(const BasicTensor<T>& tokens) {
    if (tokens.rank() != 3) {
        throw DimensionError("token grid must be F x J x C, got " + shape_to_string(tokens.shape()));
    }
    const std::size_t frames = tokens.dim(0), joints = tokens.dim(1), channels = tokens.dim(2);
    BasicTensor<T> pooled({frames, channels});
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            T sum{0};
            for (std::size_t j = 0; j < joints; ++j) {
                sum += tokens.at(t, j, c);
            }
            pooled.at(t, c) = sum / static_cast<T>(joints);
        }
    }
    return pooled;
}

template <typename T>
std::vector<double> local_density(const BasicTensor<T>& pooled, std::size_t knn) {
    require_pooled(pooled);
    const std::size_t frames = pooled.rows();
    if (knn < 1 || knn >= frames) {
        throw ConfigError("neighbor count k=" + std::to_string(knn) + " must lie in [1, " + std::to_string(frames) +
                          ")");
    }
    std::vector<double> density(frames);
    std::vector<double> dists;
    dists.reserve(frames - 1);
    for (std::size_t i = 0; i < frames; ++i) {
        dists.clear();
        for (std::size_t j = 0; j < frames; ++j) {
            if (j != i) {
                dists.push_back(squared_distance(pooled, i, j));
            }
        }
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(knn - 1), dists.end());
        // nth_element leaves the k smallest in the first k slots, unordered.
        double sum = 0.0;
        for (std::size_t n = 0; n < knn; ++n) {
            sum += dists[n];
        }
        density[i] = std::exp(-sum / static_cast<double>(knn));
    }
    return density;
}

std::vector<std::size_t> density_ranks(std::span<const double> density) {
    std::vector<std::size_t> order(density.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return density[a] > density[b]; });
    std::vector<std::size_t> rank(density.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        rank[order[r]] = r;
    }
    return rank;
}

template <typename T>
std::vector<double> min_distance_delta(const BasicTensor<T>& pooled, std::span<const double> density) {
    require_pooled(pooled);
    const std::size_t frames = pooled.rows();
    if (density.size() != frames) {
        throw DimensionError("density has " + std::to_string(density.size()) + " entries for " +
                             std::to_string(frames) + " tokens");
    }
    const auto rank = density_ranks(density);
    std::vector<double> delta(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double nearest_higher = std::numeric_limits<double>::infinity();
        double farthest = 0.0;
        for (std::size_t j = 0; j < frames; ++j) {
            if (j == i) {
                continue;
            }
            const double d = std::sqrt(squared_distance(pooled, i, j));
            farthest = std::max(farthest, d);
            if (rank[j] < rank[i]) {
                nearest_higher = std::min(nearest_higher, d);
            }
        }
        delta[i] = rank[i] == 0 ? farthest : nearest_higher;
    }
    return delta;
}

IndexList top_scoring(std::span<const double> score, std::size_t count) {
    if (count > score.size()) {
        throw ConfigError("cannot select " + std::to_string(count) + " of " + std::to_string(score.size()) +
                          " frames");
    }
    IndexList order(score.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    order.resize(count);
    std::sort(order.begin(), order.end());
    return order;
}

template <typename T>
ClusterResult cluster_pooled(const BasicTensor<T>& pooled, std::size_t tokens, std::size_t knn) {
    require_pooled(pooled);
    const std::size_t frames = pooled.rows();
    if (tokens < 1 || tokens > frames) {
        throw ConfigError("token count f=" + std::to_string(tokens) + " must lie in [1, " + std::to_string(frames) +
                          "]");
    }
    ClusterResult result;
    result.density = local_density(pooled, knn);
    result.delta = min_distance_delta(pooled, result.density);
    result.score.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        result.score[i] = result.density[i] * result.delta[i];
    }
    result.selected_indexes = top_scoring(result.score, tokens);

    // Each remaining frame joins the nearest center of higher density; when no
    // center outranks it, the nearest center overall.
    const auto rank = density_ranks(result.density);
    std::vector<bool> is_center(frames, false);
    for (auto c : result.selected_indexes) {
        is_center[c] = true;
    }
    result.cluster_label.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        if (is_center[i]) {
            result.cluster_label[i] = i;
            continue;
        }
        std::optional<std::size_t> best_higher, best_any;
        double best_higher_d = 0.0, best_any_d = 0.0;
        for (auto c : result.selected_indexes) {
            const double d = squared_distance(pooled, i, c);
            if (!best_any || d < best_any_d) {
                best_any = c;
                best_any_d = d;
            }
            if (rank[c] < rank[i] && (!best_higher || d < best_higher_d)) {
                best_higher = c;
                best_higher_d = d;
            }
        }
        result.cluster_label[i] = best_higher ? *best_higher : *best_any;
    }
    return result;
}

template <typename T>
BasicTensor<T> gather_frames(const BasicTensor<T>& tokens, std::span<const std::size_t> frames) {
    if (tokens.rank() != 3) {
        throw DimensionError("token grid must be F x J x C, got " + shape_to_string(tokens.shape()));
    }
    if (frames.empty()) {
        throw DimensionError("frame selection is empty");
    }
    const std::size_t row = tokens.dim(1) * tokens.dim(2);
    BasicTensor<T> out({frames.size(), tokens.dim(1), tokens.dim(2)});
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i] >= tokens.dim(0)) {
            throw DimensionError("frame index " + std::to_string(frames[i]) + " out of range for " +
                                 std::to_string(tokens.dim(0)) + " frames");
        }
        std::copy_n(tokens.raw() + frames[i] * row, row, out.raw() + i * row);
    }
    return out;
}

template <typename T>
std::pair<BasicTensor<T>, ClusterResult> select_tpc(const BasicTensor<T>& tokens, const PruneConfig& config) {
    if (tokens.rank() != 3) {
        throw DimensionError("token grid must be F x J x C, got " + shape_to_string(tokens.shape()));
    }
    if (config.tokens > tokens.dim(0)) {
        throw ConfigError("token count f=" + std::to_string(config.tokens) + " exceeds frame count " +
                          std::to_string(tokens.dim(0)));
    }
    ClusterResult result = cluster_pooled(spatial_pool(tokens), config.tokens, config.knn);
    BasicTensor<T> kept = gather_frames(tokens, std::span<const std::size_t>(result.selected_indexes));
    return {std::move(kept), std::move(result)};
}

IndexList select_uniform(std::size_t frames, std::size_t tokens) {
    if (tokens < 1 || tokens > frames) {
        throw ConfigError("uniform sampling needs 1 <= f <= F, got f=" + std::to_string(tokens) +
                          " F=" + std::to_string(frames));
    }
    if (tokens == 1) {
        return {frames / 2};
    }
    IndexList out(tokens);
    const std::size_t span = frames - 1, steps = tokens - 1;
    for (std::size_t i = 0; i < tokens; ++i) {
        // round-half-up of i * span / steps in integer arithmetic
        out[i] = (2 * i * span + steps) / (2 * steps);
    }
    return out;
}

IndexList select_by_attention(std::size_t frames, std::span<const double> scores, std::size_t tokens) {
    if (scores.size() != frames) {
        throw DimensionError("attention scores have " + std::to_string(scores.size()) + " entries for " +
                             std::to_string(frames) + " frames");
    }
    return top_scoring(scores, tokens);
}

std::vector<double> frame_motion(const PoseSequence& poses2d) {
    const std::size_t frames = poses2d.frames(), joints = poses2d.joints(), dims = poses2d.dims();
    std::vector<double> motion(frames, 0.0);
    for (std::size_t t = 1; t < frames; ++t) {
        double total = 0.0;
        for (std::size_t j = 0; j < joints; ++j) {
            double sq = 0.0;
            for (std::size_t d = 0; d < dims; ++d) {
                const double diff = static_cast<double>(poses2d.at(t, j, d)) - poses2d.at(t - 1, j, d);
                sq += diff * diff;
            }
            total += std::sqrt(sq);
        }
        motion[t] = total / static_cast<double>(joints);
    }
    return motion;
}

IndexList select_by_motion(const PoseSequence& poses2d, std::size_t tokens) {
    return top_scoring(frame_motion(poses2d), tokens);
}

double frame_noise(std::span<const std::size_t> selected, const PoseSequence& detected, const PoseSequence& truth) {
    if (detected.tensor().shape() != truth.tensor().shape()) {
        throw DimensionError("detected and ground-truth poses differ in shape: " +
                             shape_to_string(detected.tensor().shape()) + " vs " +
                             shape_to_string(truth.tensor().shape()));
    }
    if (selected.empty()) {
        throw DimensionError("frame noise needs at least one selected frame");
    }
    double total = 0.0;
    for (auto t : selected) {
        if (t >= detected.frames()) {
            throw DimensionError("selected frame " + std::to_string(t) + " out of range");
        }
        for (std::size_t j = 0; j < detected.joints(); ++j) {
            double sq = 0.0;
            for (std::size_t d = 0; d < detected.dims(); ++d) {
                const double diff = static_cast<double>(detected.at(t, j, d)) - truth.at(t, j, d);
                sq += diff * diff;
            }
            total += std::sqrt(sq);
        }
    }
    return total / static_cast<double>(selected.size() * detected.joints());
}

template BasicTensor<float> spatial_pool(const BasicTensor<float>&);
template BasicTensor<double> spatial_pool(const BasicTensor<double>&);
template std::vector<double> local_density(const BasicTensor<float>&, std::size_t);
template std::vector<double> local_density(const BasicTensor<double>&, std::size_t);
template std::vector<double> min_distance_delta(const BasicTensor<float>&, std::span<const double>);
template std::vector<double> min_distance_delta(const BasicTensor<double>&, std::span<const double>);
template ClusterResult cluster_pooled(const BasicTensor<float>&, std::size_t, std::size_t);
template ClusterResult cluster_pooled(const BasicTensor<double>&, std::size_t, std::size_t);
template std::pair<BasicTensor<float>, ClusterResult> select_tpc(const BasicTensor<float>&, const PruneConfig&);
template std::pair<BasicTensor<double>, ClusterResult> select_tpc(const BasicTensor<double>&, const PruneConfig&);
template BasicTensor<float> gather_frames(const BasicTensor<float>&, std::span<const std::size_t>);
template BasicTensor<double> gather_frames(const BasicTensor<double>&, std::span<const std::size_t>);

}  // namespace posetok
