// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "asl/autodiff/array.hpp"

namespace asl::ad {

/// Raised when a gradient or loss is not finite. The optimizer leaves all
/// parameters untouched when it throws.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

/// A parameter slot: the array plus a multiplier on the learning rate.
struct ParamRef {
    std::string name;
    Array array;
    double lr_scale = 1.0;
};

class Adam {
public:
    explicit Adam(AdamConfig config) : config_(config) {}

    /// One update with lr = config.lr * lr_multiplier. Parameters without a
    /// gradient are skipped. Throws NumericalError on non-finite gradients.
    void step(std::vector<ParamRef>& params, double lr_multiplier = 1.0);

    std::size_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    AdamConfig config_;
    std::size_t t_ = 0;
    std::vector<Moments> state_;
};

/// Linear warm-up to 1 over warmup_steps, then cosine decay to 0 at
/// total_steps.
class WarmupCosineSchedule {
public:
    WarmupCosineSchedule(std::size_t total_steps, std::size_t warmup_steps);

    double multiplier(std::size_t step) const;

private:
    std::size_t total_;
    std::size_t warmup_;
};

void zero_grad(std::vector<ParamRef>& params);

}  // namespace asl::ad
