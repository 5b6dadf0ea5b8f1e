// Copyright (C) 2026 The posetok Authors
// SPDX-License-Identifier: Apache-2.0

#include "posetok/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace posetok {

namespace {

double finite_or_throw(double value, const char* where) {
    if (!std::isfinite(value)) {
        throw NumericalError(std::string("grad_check: non-finite loss during ") + where);
    }
    return value;
}

}  // namespace

GradCheckReport grad_check(const LossFunction& loss, std::span<Tensor64* const> params, double step) {
    if (!(step > 0.0)) {
        throw ConfigError("grad_check step must be positive");
    }
    for (Tensor64* p : params) {
        p->enable_grad();
        p->zero_grad();
    }
    finite_or_throw(loss(true), "analytic pass");

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Tensor64* p : params) {
        analytic.emplace_back(p->grad().begin(), p->grad().end());
    }

    GradCheckReport report;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor64& p = *params[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + step;
            const double plus = finite_or_throw(loss(false), "forward perturbation");
            p[i] = saved - step;
            const double minus = finite_or_throw(loss(false), "backward perturbation");
            p[i] = saved;

            const double numeric = (plus - minus) / (2.0 * step);
            const double err = std::abs(analytic[t][i] - numeric) / std::max(1.0, std::abs(numeric));
            if (err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst_tensor = t;
                report.worst_element = i;
            }
            ++report.checked;
        }
    }
    return report;
}

}  // namespace posetok
