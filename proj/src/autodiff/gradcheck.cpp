// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "asl/util/random.hpp"

namespace asl::ad {

double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult gradient_check(const std::function<Array()>& loss_fn, std::vector<ParamRef> params,
                               const GradCheckOptions& options) {
    zero_grad(params);
    {
        Tape tape;
        Tape::Scope scope(tape);
        const Array loss = loss_fn();
        tape.backward(loss);
    }
    std::vector<std::pair<std::size_t, std::size_t>> entries;
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].array.requires_grad()) continue;
        for (std::size_t i = 0; i < params[p].array.size(); ++i) entries.emplace_back(p, i);
    }
    if (options.samples > 0 && options.samples < entries.size()) {
        Rng rng(options.seed);
        for (std::size_t i = 0; i < options.samples; ++i) {
            const std::size_t j = i + rng.below(entries.size() - i);
            std::swap(entries[i], entries[j]);
        }
        entries.resize(options.samples);
    }

    GradCheckResult result;
    for (const auto& [p, i] : entries) {
        auto data = params[p].array.mutable_data();
        const double analytic = params[p].array.grad()[i];
        const double saved = data[i];
        data[i] = saved + options.step;
        const double plus = loss_fn().item();
        data[i] = saved - options.step;
        const double minus = loss_fn().item();
        data[i] = saved;
        const double numeric = (plus - minus) / (2.0 * options.step);
        const double err = relative_error(analytic, numeric, options.floor);
        ++result.checked;
        if (err > result.max_rel_error || result.worst.empty()) {
            result.max_rel_error = err;
            result.worst = params[p].name + "[" + std::to_string(i) + "]";
            result.worst_analytic = analytic;
            result.worst_numeric = numeric;
        }
    }
    zero_grad(params);
    return result;
}

}  // namespace asl::ad
