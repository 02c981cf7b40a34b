// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/autodiff/optim.hpp"

#include <cmath>
#include <numbers>

namespace asl::ad {

void Adam::step(std::vector<ParamRef>& params, double lr_multiplier) {
    for (const auto& p : params) {
        if (!p.array.has_grad()) continue;
        for (double g : p.array.node()->grad) {
            if (!std::isfinite(g)) throw NumericalError("adam: non-finite gradient in parameter '" + p.name + "'");
        }
    }
    if (state_.size() != params.size()) state_.assign(params.size(), {});
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.array.has_grad()) continue;
        auto& st = state_[i];
        const auto& g = p.array.node()->grad;
        if (st.m.size() != g.size()) {
            st.m.assign(g.size(), 0.0);
            st.v.assign(g.size(), 0.0);
        }
        const double lr = config_.lr * lr_multiplier * p.lr_scale;
        auto w = p.array.mutable_data();
        for (std::size_t j = 0; j < g.size(); ++j) {
            st.m[j] = config_.beta1 * st.m[j] + (1.0 - config_.beta1) * g[j];
            st.v[j] = config_.beta2 * st.v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            const double mhat = st.m[j] / bc1;
            const double vhat = st.v[j] / bc2;
            w[j] -= lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * w[j]);
        }
    }
}

WarmupCosineSchedule::WarmupCosineSchedule(std::size_t total_steps, std::size_t warmup_steps)
    : total_(total_steps), warmup_(warmup_steps) {}

double WarmupCosineSchedule::multiplier(std::size_t step) const {
    if (step < warmup_) return static_cast<double>(step) / static_cast<double>(warmup_);
    if (total_ <= warmup_) return 1.0;
    const double progress =
        std::min(1.0, static_cast<double>(step - warmup_) / static_cast<double>(total_ - warmup_));
    return 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void zero_grad(std::vector<ParamRef>& params) {
    for (auto& p : params) p.array.zero_grad();
}

}  // namespace asl::ad
