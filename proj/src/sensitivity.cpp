// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "asl/autodiff/ops.hpp"

namespace asl {

SensitivityParams SensitivityParams::create(std::size_t num_classes, double mu_init, double sigma_init) {
    if (num_classes == 0) throw InvalidInput("sensitivity: need at least one class");
    SensitivityParams p;
    p.mu_cls = ad::Array::full({num_classes}, mu_init, true);
    p.sigma_cls = ad::Array::full({num_classes}, sigma_init, true);
    p.mu_loc = ad::Array::full({num_classes}, mu_init, true);
    p.sigma_loc = ad::Array::full({num_classes}, sigma_init, true);
    p.project();
    return p;
}

void SensitivityParams::project() {
    for (auto* a : {&mu_cls, &mu_loc}) {
        for (double& v : a->mutable_data()) v = std::clamp(v, kMuMin, kMuMax);
    }
    for (auto* a : {&sigma_cls, &sigma_loc}) {
        for (double& v : a->mutable_data()) v = std::clamp(v, kSigmaMin, kSigmaMax);
    }
}

void SensitivityParams::freeze_flat() {
    for (auto* a : {&mu_cls, &mu_loc}) std::ranges::fill(a->mutable_data(), 0.5);
    for (auto* a : {&sigma_cls, &sigma_loc}) std::ranges::fill(a->mutable_data(), kSigmaMax);
    set_trainable(false);
}

void SensitivityParams::set_trainable(bool on) {
    for (auto* a : {&mu_cls, &sigma_cls, &mu_loc, &sigma_loc}) a->set_requires_grad(on);
}

double normalized_position(const PyramidPoint& point, const ActionInstance& instance) {
    const auto& seg = instance.segment;
    if (point.t_center < seg.start || point.t_center > seg.end) {
        throw InvalidInput("normalized_position: point at " + std::to_string(point.t_center) +
                           " outside instance [" + std::to_string(seg.start) + ", " + std::to_string(seg.end) + "]");
    }
    return (point.t_center - seg.start) / seg.duration();
}

double raw_weight(double t, double mu, double sigma) {
    const double d = t - mu;
    return std::exp(-d * d / (2.0 * sigma * sigma));
}

ad::Array sensitivity_weights(const ad::Array& mu, const ad::Array& sigma, std::span<const PositiveSample> samples,
                              std::size_t num_instances) {
    if (samples.empty()) throw InvalidInput("sensitivity_weights: no positive points");
    const std::size_t n = samples.size();
    std::vector<std::size_t> labels(n), instances(n);
    std::vector<double> positions(n);
    std::vector<double> counts(num_instances, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (samples[i].instance >= num_instances) throw InvalidInput("sensitivity_weights: instance id out of range");
        if (samples[i].label >= mu.size()) throw InvalidInput("sensitivity_weights: label out of range");
        labels[i] = samples[i].label;
        instances[i] = samples[i].instance;
        positions[i] = samples[i].position;
        counts[instances[i]] += 1.0;
    }
    // Empty instances keep a count of 1 so their (unused) mean stays finite.
    for (double& c : counts) c = std::max(c, 1.0);

    const ad::Array t({n}, std::move(positions));
    const ad::Array mu_i = ad::gather(mu, labels);
    const ad::Array sigma_i = ad::gather(sigma, labels);
    const ad::Array diff = ad::sub(t, mu_i);
    const ad::Array weight =
        ad::exp(ad::neg(ad::div(ad::mul(diff, diff), ad::scale(ad::mul(sigma_i, sigma_i), 2.0))));
    const ad::Array instance_mean =
        ad::div(ad::segment_sum(weight, instances, num_instances), ad::Array({num_instances}, std::move(counts)));
    return ad::div(weight, ad::gather(instance_mean, instances));
}

std::vector<double> instance_weights(const SensitivityParams& params, SubTask task, std::size_t label,
                                     std::span<const double> positions) {
    if (positions.empty()) throw InvalidInput("instance_weights: empty positions");
    std::vector<PositiveSample> samples;
    for (double t : positions) samples.push_back({0, label, t});
    const auto h = sensitivity_weights(params.mu(task), params.sigma(task), samples, 1);
    return h.values();
}

}  // namespace asl
