// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <vector>

#include "asl/core.hpp"
#include "asl/dense_output.hpp"

namespace asl {

struct SegmentPrediction {
    std::string video_id;
    TimeSegment segment;
    int label = 0;
    double score = 0.0;
};

struct DecodeConfig {
    double score_floor = 0.001;
    std::size_t pre_nms_topk = 5000;
    double nms_sigma = 0.5;
    double min_score = 0.001;
    std::size_t max_keep = 2000;  // MQ
    std::size_t nlq_topk = 5;     // NLQ

    void validate() const;
};

/// Orders by score descending, then start ascending, then label, then end.
bool score_order(const SegmentPrediction& a, const SegmentPrediction& b);

/// Every (point, class) with sigmoid(logit) >= score_floor becomes a
/// segment (t - d_start, t + d_end) clipped to [0, duration]; the best
/// pre_nms_topk by score are kept.
std::vector<SegmentPrediction> decode_dense(const std::string& video_id, const std::vector<PyramidPoint>& points,
                                            const DenseOutput& dense, double duration, double score_floor,
                                            std::size_t pre_nms_topk);

/// Gaussian SoftNMS: repeatedly take the best remaining prediction and
/// multiply overlapping scores by exp(-tiou^2 / sigma). per_class limits
/// decay to same-label overlaps. Stops at max_keep or when the best score
/// falls below min_score. Output sorted by final score.
std::vector<SegmentPrediction> soft_nms(std::vector<SegmentPrediction> preds, double sigma, double min_score,
                                        std::size_t max_keep, bool per_class = true);

/// Elementwise mean of class logits and of offsets across models.
DenseOutput ensemble_mean_logits(const std::vector<DenseOutput>& outputs);

/// Concatenate per-model lists, sort by raw score, keep k_out.
std::vector<SegmentPrediction> ensemble_topk_merge(const std::vector<std::vector<SegmentPrediction>>& lists,
                                                   std::size_t k_out = 5);

}  // namespace asl
