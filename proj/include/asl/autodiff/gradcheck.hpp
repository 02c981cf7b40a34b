// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "asl/autodiff/optim.hpp"

namespace asl::ad {

struct GradCheckOptions {
    double step = 1e-5;
    /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
    double floor = 1e-4;
    /// Entries sampled across all parameters; 0 checks every entry.
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "param[index]"
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

double relative_error(double analytic, double numeric, double floor);

/// Compares reverse-mode gradients of loss_fn against central differences.
/// loss_fn must rebuild the loss from the current parameter values; it is
/// called under an active tape once and without a tape for each probe.
GradCheckResult gradient_check(const std::function<Array()>& loss_fn, std::vector<ParamRef> params,
                               const GradCheckOptions& options = {});

}  // namespace asl::ad
