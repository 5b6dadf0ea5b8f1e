// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/toy.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace posetok {

namespace {

struct JointMotion {
    double base[3];
    double amplitude[3];
    double frequency[2];
};

}  // namespace

std::vector<TrainingSample> make_toy_dataset(std::size_t frames, std::size_t joints, std::size_t samples,
                                             std::uint64_t seed) {
    if (frames == 0 || joints == 0) {
        throw ConfigError("toy data needs at least one frame and one joint");
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> base(-1.0, 1.0);
    std::uniform_real_distribution<double> amplitude(0.2, 0.5);
    std::uniform_real_distribution<double> frequency(0.1, 0.4);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    std::vector<JointMotion> skeleton(joints);
    for (auto& jm : skeleton) {
        for (int d = 0; d < 3; ++d) {
            jm.base[d] = base(rng);
            jm.amplitude[d] = amplitude(rng);
        }
        jm.frequency[0] = frequency(rng);
        jm.frequency[1] = frequency(rng);
    }

    std::vector<TrainingSample> data;
    data.reserve(samples);
    for (std::size_t s = 0; s < samples; ++s) {
        PoseSequence in(frames, joints, 2), target(frames, joints, 3);
        for (std::size_t j = 0; j < joints; ++j) {
            const JointMotion& jm = skeleton[j];
            const double phase_x = phase(rng), phase_y = phase(rng);
            for (std::size_t t = 0; t < frames; ++t) {
                const double ax = jm.frequency[0] * static_cast<double>(t) + phase_x;
                const double ay = jm.frequency[1] * static_cast<double>(t) + phase_y;
                const double x = jm.base[0] + jm.amplitude[0] * std::sin(ax);
                const double y = jm.base[1] + jm.amplitude[1] * std::sin(ay);
                const double z = jm.base[2] + jm.amplitude[2] * std::cos(ax);
                in.at(t, j, 0) = static_cast<float>(x);
                in.at(t, j, 1) = static_cast<float>(y);
                target.at(t, j, 0) = static_cast<float>(x);
                target.at(t, j, 1) = static_cast<float>(y);
                target.at(t, j, 2) = static_cast<float>(z);
            }
        }
        data.push_back({std::move(in), std::move(target)});
    }
    return data;
}

double dataset_mpjpe(const HostModel<float>& model, const std::vector<TrainingSample>& data) {
    if (data.empty()) {
        throw ConfigError("empty dataset");
    }
    double total = 0.0;
    for (const auto& sample : data) {
        total += mpjpe_loss(model.forward(sample.input2d), sample.target3d, model.config().center_frame(),
                            static_cast<Tensor*>(nullptr));
    }
    return total / static_cast<double>(data.size());
}

TrainResult train_toy(const RunConfig& config) {
    const TrainOptions& opt = config.train;
    if (opt.batch == 0 || opt.samples == 0) {
        throw ConfigError("batch and samples must be positive");
    }
    if (!(opt.learning_rate >= 0.0)) {
        throw ConfigError("learning rate must be non-negative");
    }
    const ModelConfig& mc = config.model;
    const auto data = make_toy_dataset(mc.frames, mc.joints, opt.samples, config.seed);

    TrainResult result{{}, 0.0, 0.0, HostModel<float>(mc)};
    result.model.init(config.seed);
    result.initial_mpjpe = dataset_mpjpe(result.model, data);
    result.losses.reserve(opt.steps);

    std::vector<TrainingSample> batch(opt.batch);
    std::size_t cursor = 0;
    for (std::size_t step = 0; step < opt.steps; ++step) {
        for (auto& sample : batch) {
            sample = data[cursor];
            cursor = (cursor + 1) % data.size();
        }
        result.losses.push_back(train_step(result.model, batch, static_cast<float>(opt.learning_rate)));
    }
    result.final_mpjpe = dataset_mpjpe(result.model, data);
    return result;
}

}  // namespace posetok
