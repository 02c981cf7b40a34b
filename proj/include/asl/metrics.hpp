// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "asl/core.hpp"
#include "asl/postprocess.hpp"

namespace asl {

struct GroundTruth {
    std::string video_id;
    TimeSegment segment;
    int label = 0;
};

/// Evaluation order: score descending, then earlier start, then video id.
bool eval_order(const SegmentPrediction& a, const SegmentPrediction& b);

/// Greedy matching in eval order: a prediction is a hit iff some unmatched
/// ground truth of the same video reaches tiou >= threshold; the best
/// overlapping one (lowest index on ties) is consumed. Input must already
/// be in eval order.
std::vector<bool> greedy_match(const std::vector<SegmentPrediction>& sorted_preds,
                               const std::vector<GroundTruth>& gts, double threshold);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

/// Raw precision/recall after each ranked prediction.
std::vector<PrPoint> pr_curve(std::vector<SegmentPrediction> preds, const std::vector<GroundTruth>& gts,
                              double threshold);

/// All-point interpolated AP (area under the monotone precision envelope).
/// nullopt when there are no ground truths (class is not scored).
std::optional<double> average_precision(std::vector<SegmentPrediction> preds, const std::vector<GroundTruth>& gts,
                                        double threshold);

struct MapResult {
    std::vector<double> thresholds;
    std::vector<double> map;         // per threshold
    double average = 0.0;
    std::map<int, std::vector<double>> per_class;  // scored classes only
};

inline const std::vector<double> kDefaultTious{0.1, 0.2, 0.3, 0.4, 0.5};

/// mAP per threshold over classes that have ground truth; average over
/// thresholds. Throws InvalidInput when no class is scorable.
MapResult average_map(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruth>& gts,
                      const std::vector<double>& thresholds = kDefaultTious);

/// Per class c keep the top k * x_c predictions (x_c = its GT count), match
/// greedily, and return total matched / total GT (micro average).
double recall_at_kx(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruth>& gts,
                    std::size_t k = 1, double threshold = 0.5);

/// Fraction of queries whose top-k predictions contain one with
/// tiou >= threshold. Queries without predictions count as misses.
double recall_at_k_queries(const std::map<std::string, std::vector<SegmentPrediction>>& per_query_preds,
                           const std::map<std::string, TimeSegment>& per_query_gt, std::size_t k, double threshold);

struct EvalReport {
    std::vector<double> thresholds;
    std::vector<double> map;
    double average_map = 0.0;
    std::optional<double> recall_at_kx;
    std::size_t recall_k = 1;
    double recall_tiou = 0.5;
    std::map<std::pair<std::size_t, double>, double> r_at_k;  // (k, tiou) -> recall
    std::map<int, std::vector<double>> per_class_ap;
};

EvalReport evaluate_mq(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruth>& gts,
                       const std::vector<double>& thresholds = kDefaultTious, std::size_t recall_k = 1,
                       double recall_tiou = 0.5);

EvalReport evaluate_nlq(const std::map<std::string, std::vector<SegmentPrediction>>& per_query_preds,
                        const std::map<std::string, TimeSegment>& per_query_gt,
                        const std::vector<std::size_t>& ks = {1, 5}, const std::vector<double>& tious = {0.3, 0.5});

}  // namespace asl
