// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "posetok/host.hpp"
#include "posetok/io.hpp"

namespace posetok {

/// Seeded synthetic sequences. Each joint follows two sinusoids in 2D with
/// random phases; its depth is a third sinusoid locked to the phase of the
/// horizontal one. The 3D target is (x, y, depth).
std::vector<TrainingSample> make_toy_dataset(std::size_t frames, std::size_t joints, std::size_t samples,
                                             std::uint64_t seed);

struct TrainResult {
    std::vector<double> losses;  // pre-step batch loss of every step
    double initial_mpjpe = 0.0;  // over the whole training set
    double final_mpjpe = 0.0;
    HostModel<float> model;
};

double dataset_mpjpe(const HostModel<float>& model, const std::vector<TrainingSample>& data);

/// Plain gradient descent on cycling mini-batches of the toy dataset.
TrainResult train_toy(const RunConfig& config);

}  // namespace posetok
