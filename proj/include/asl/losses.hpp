// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asl/autodiff/array.hpp"
#include "asl/core.hpp"
#include "asl/dense_output.hpp"

namespace asl {

struct LossConfig {
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    double nce_temperature = 0.07;
    double lambda_loc = 1.0;
    double lambda_nce = 0.5;

    void validate() const;
};

/// Scalar focal loss for probability p and binary target y.
double focal_loss(double p, int y, double alpha, double gamma);
/// Same, from a logit; stable for saturated logits.
double focal_loss_logit(double logit, int y, double alpha, double gamma);

/// 1 - IoU + rho^2 / l^2 for two segments, rho the center distance and l
/// the enclosing span.
double diou_loss_1d(const TimeSegment& pred, const TimeSegment& gt);

/// A loss value with bookkeeping for the training log.
struct LossTerm {
    ad::Array value;  // scalar
    std::size_t num_positive = 0;
    bool degenerate = false;  // no positives (cls/loc) or missing pos/neg (nce)
};

/// Positives weighted by h_cls, background unweighted, one-vs-all focal
/// terms summed over class channels, total divided by max(1, N_pos).
/// h_cls holds one weight per positive point in point order; an empty
/// array means h = 1.
LossTerm weighted_cls_loss(const ad::Array& cls_logits, const PointTargets& targets, const ad::Array& h_cls,
                           const LossConfig& config);

/// Convenience overload on a DenseOutput.
LossTerm weighted_cls_loss(const DenseOutput& dense, const PointTargets& targets, const ad::Array& h_cls,
                           const LossConfig& config);

/// DIoU over positive points weighted by h_loc, divided by N_pos. Zero
/// positives give a constant 0 flagged as degenerate.
LossTerm weighted_loc_loss(const DenseOutput& dense, const PointTargets& targets, const ad::Array& h_loc);

/// InfoNCE over precomputed similarities: -mean_{i in pos} log softmax(s/tau)_i.
LossTerm info_nce_from_similarity(const ad::Array& similarity, std::span<const std::uint8_t> positive,
                                  double temperature);

/// Cosine similarity between each frame row and the query, then InfoNCE.
/// frame_feats: [T, D], query: [D] or [1, D].
LossTerm info_nce(const ad::Array& frame_feats, const ad::Array& query, std::span<const std::uint8_t> positive,
                  double temperature);

/// Concatenate per-video targets into one batch. Matched instance ids are
/// shifted by the running total of instances_per_part so they stay unique.
PointTargets concat_targets(const std::vector<PointTargets>& parts, std::span<const std::size_t> instances_per_part);

}  // namespace asl
