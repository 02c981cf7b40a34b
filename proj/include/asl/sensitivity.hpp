// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "asl/autodiff/array.hpp"
#include "asl/core.hpp"

namespace asl {

enum class SubTask { Classification, Localization };

/// Projection bounds applied after every optimizer step.
inline constexpr double kSigmaMin = 0.1;
inline constexpr double kSigmaMax = 1.0e4;
inline constexpr double kMuMin = 0.0;
inline constexpr double kMuMax = 1.0;

/// Learnable class-aware Gaussians over instance-relative position, one per
/// class per sub-task. Each array has shape [C].
struct SensitivityParams {
    ad::Array mu_cls;
    ad::Array sigma_cls;
    ad::Array mu_loc;
    ad::Array sigma_loc;

    static SensitivityParams create(std::size_t num_classes, double mu_init = 0.5, double sigma_init = 2.0);

    std::size_t num_classes() const { return mu_cls.size(); }
    const ad::Array& mu(SubTask task) const { return task == SubTask::Classification ? mu_cls : mu_loc; }
    const ad::Array& sigma(SubTask task) const {
        return task == SubTask::Classification ? sigma_cls : sigma_loc;
    }

    /// Clamp sigma into [kSigmaMin, kSigmaMax] and mu into [0, 1].
    void project();
    /// The ASL-off configuration: sigma pinned at kSigmaMax, nothing trainable.
    void freeze_flat();
    void set_trainable(bool on);
};

/// (t_center - start) / duration. Throws InvalidInput if the point lies
/// outside the instance.
double normalized_position(const PyramidPoint& point, const ActionInstance& instance);

/// exp(-(t - mu)^2 / (2 sigma^2)).
double raw_weight(double t, double mu, double sigma);

/// One positive point feeding the sensitivity weights.
struct PositiveSample {
    std::size_t instance = 0;  // dense id in [0, num_instances)
    std::size_t label = 0;     // class channel of the Gaussian
    double position = 0.0;     // normalized position in [0, 1]
};

/// Differentiable per-point weights h, normalized to mean 1 within each
/// instance. Gradients flow to mu and sigma. Shape [samples.size()].
ad::Array sensitivity_weights(const ad::Array& mu, const ad::Array& sigma, std::span<const PositiveSample> samples,
                              std::size_t num_instances);

/// Weights for one instance's positive points. Throws on empty positions.
std::vector<double> instance_weights(const SensitivityParams& params, SubTask task, std::size_t label,
                                     std::span<const double> positions);

}  // namespace asl
