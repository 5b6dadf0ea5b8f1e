// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "posetok/tensor.hpp"

namespace posetok {

/// Evaluates the scalar loss at the current parameter values. When `with_grad`
/// is true it must also accumulate analytic gradients into each parameter's
/// gradient buffer.
using LossFunction = std::function<double(bool with_grad)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_tensor = 0;
    std::size_t worst_element = 0;
    std::size_t checked = 0;
};

/// Compares analytic gradients against central differences in 64-bit arithmetic.
///
/// The error of one element is |analytic - numeric| / max(1, |numeric|). Parameters
/// have their gradient buffers enabled and zeroed before the analytic pass, and
/// are restored bit-exactly after each perturbation. Throws NumericalError if the
/// loss is non-finite at any evaluated point, and ConfigError if step <= 0.
GradCheckReport grad_check(const LossFunction& loss, std::span<Tensor64* const> params, double step);

}  // namespace posetok
