// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pointy/tensor.hpp"

namespace pointy {

// =====================================================================
//  Finite-difference gradient verification
// =====================================================================

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::int64_t worst_index = -1;
    double tolerance = 0.0;
    bool passed = false;
};

/// Compares reverse-mode gradients against central differences for a
/// deterministic scalar-valued function of the given parameters. The
/// function must rebuild its graph on every call; run in 64-bit mode.
/// rel_err = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
template <typename LossFn>
GradCheckReport grad_check(LossFn&& f, std::vector<Tensor<double>>& params, double step, double tolerance) {
    for (auto& p : params) p.zero_grad();

    Tensor<double> loss = f();
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: loss is non-finite at the base point");
    loss.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());
    for (auto& p : params) p.zero_grad();

    GradCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& data = params[pi].data();
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double saved = data[j];
            data[j] = saved + step;
            const double up = f().item();
            data[j] = saved - step;
            const double down = f().item();
            data[j] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("grad_check: non-finite loss while perturbing '" + params[pi].name() +
                                   "' at index " + std::to_string(j));
            }
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[pi][j];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = params[pi].name();
                report.worst_index = static_cast<std::int64_t>(j);
            }
        }
    }
    report.passed = report.max_rel_err <= tolerance;
    return report;
}

}  // namespace pointy
