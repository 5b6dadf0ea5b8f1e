// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace posetok {

/// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A configuration value violates an invariant (f > F, k >= F, n >= L, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (pose files, model files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A loss or gradient became non-finite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace posetok
