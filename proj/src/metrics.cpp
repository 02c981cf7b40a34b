// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

namespace asl {

bool eval_order(const SegmentPrediction& a, const SegmentPrediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
    if (a.video_id != b.video_id) return a.video_id < b.video_id;
    if (a.segment.end != b.segment.end) return a.segment.end < b.segment.end;
    return a.label < b.label;
}

std::vector<bool> greedy_match(const std::vector<SegmentPrediction>& sorted_preds,
                               const std::vector<GroundTruth>& gts, double threshold) {
    std::unordered_map<std::string, std::vector<std::size_t>> by_video;
    for (std::size_t g = 0; g < gts.size(); ++g) by_video[gts[g].video_id].push_back(g);
    std::vector<bool> used(gts.size(), false);
    std::vector<bool> hit(sorted_preds.size(), false);
    for (std::size_t i = 0; i < sorted_preds.size(); ++i) {
        auto it = by_video.find(sorted_preds[i].video_id);
        if (it == by_video.end()) continue;
        double best = -1.0;
        std::size_t best_g = gts.size();
        for (std::size_t g : it->second) {
            if (used[g]) continue;
            const double o = tiou(sorted_preds[i].segment, gts[g].segment);
            if (o >= threshold && o > best) {
                best = o;
                best_g = g;
            }
        }
        if (best_g < gts.size()) {
            used[best_g] = true;
            hit[i] = true;
        }
    }
    return hit;
}

std::vector<PrPoint> pr_curve(std::vector<SegmentPrediction> preds, const std::vector<GroundTruth>& gts,
                              double threshold) {
    std::stable_sort(preds.begin(), preds.end(), eval_order);
    const auto hit = greedy_match(preds, gts, threshold);
    std::vector<PrPoint> curve;
    curve.reserve(preds.size());
    double tp = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (hit[i]) tp += 1.0;
        curve.push_back({gts.empty() ? 0.0 : tp / static_cast<double>(gts.size()), tp / static_cast<double>(i + 1)});
    }
    return curve;
}

std::optional<double> average_precision(std::vector<SegmentPrediction> preds, const std::vector<GroundTruth>& gts,
                                        double threshold) {
    if (gts.empty()) return std::nullopt;
    const auto curve = pr_curve(std::move(preds), gts, threshold);
    if (curve.empty()) return 0.0;
    std::vector<double> rec{0.0}, prec{0.0};
    for (const auto& p : curve) {
        rec.push_back(p.recall);
        prec.push_back(p.precision);
    }
    rec.push_back(1.0);
    prec.push_back(0.0);
    for (std::size_t i = prec.size() - 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
    double ap = 0.0;
    for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
        if (rec[i + 1] != rec[i]) ap += (rec[i + 1] - rec[i]) * prec[i + 1];
    }
    return ap;
}

namespace {

template <class T>
std::map<int, std::vector<T>> by_label(const std::vector<T>& items) {
    std::map<int, std::vector<T>> out;
    for (const auto& it : items) out[it.label].push_back(it);
    return out;
}

}  // namespace

MapResult average_map(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruth>& gts,
                      const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw InvalidInput("average_map: no thresholds");
    const auto gt_by_class = by_label(gts);
    auto pred_by_class = by_label(preds);
    if (gt_by_class.empty()) throw InvalidInput("average_map: no scorable classes (no ground truth)");
    MapResult r;
    r.thresholds = thresholds;
    r.map.assign(thresholds.size(), 0.0);
    for (const auto& [label, class_gts] : gt_by_class) {
        auto& class_preds = pred_by_class[label];
        std::stable_sort(class_preds.begin(), class_preds.end(), eval_order);
        auto& aps = r.per_class[label];
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            aps.push_back(*average_precision(class_preds, class_gts, thresholds[t]));
            r.map[t] += aps.back();
        }
    }
    for (auto& m : r.map) m /= static_cast<double>(gt_by_class.size());
    r.average = std::accumulate(r.map.begin(), r.map.end(), 0.0) / static_cast<double>(r.map.size());
    return r;
}

double recall_at_kx(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruth>& gts, std::size_t k,
                    double threshold) {
    if (gts.empty()) return 0.0;
    const auto gt_by_class = by_label(gts);
    auto pred_by_class = by_label(preds);
    std::size_t matched = 0;
    for (const auto& [label, class_gts] : gt_by_class) {
        auto& class_preds = pred_by_class[label];
        std::stable_sort(class_preds.begin(), class_preds.end(), eval_order);
        const std::size_t budget = k * class_gts.size();
        if (class_preds.size() > budget) class_preds.resize(budget);
        const auto hit = greedy_match(class_preds, class_gts, threshold);
        matched += static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
    }
    return static_cast<double>(matched) / static_cast<double>(gts.size());
}

double recall_at_k_queries(const std::map<std::string, std::vector<SegmentPrediction>>& per_query_preds,
                           const std::map<std::string, TimeSegment>& per_query_gt, std::size_t k, double threshold) {
    if (per_query_gt.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& [query, gt] : per_query_gt) {
        auto it = per_query_preds.find(query);
        if (it == per_query_preds.end()) continue;
        auto ranked = it->second;
        std::stable_sort(ranked.begin(), ranked.end(), eval_order);
        const std::size_t n = std::min(k, ranked.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (tiou(ranked[i].segment, gt) >= threshold) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(per_query_gt.size());
}

EvalReport evaluate_mq(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruth>& gts,
                       const std::vector<double>& thresholds, std::size_t recall_k, double recall_tiou) {
    const auto m = average_map(preds, gts, thresholds);
    EvalReport report;
    report.thresholds = m.thresholds;
    report.map = m.map;
    report.average_map = m.average;
    report.per_class_ap = m.per_class;
    report.recall_k = recall_k;
    report.recall_tiou = recall_tiou;
    report.recall_at_kx = recall_at_kx(preds, gts, recall_k, recall_tiou);
    return report;
}

EvalReport evaluate_nlq(const std::map<std::string, std::vector<SegmentPrediction>>& per_query_preds,
                        const std::map<std::string, TimeSegment>& per_query_gt, const std::vector<std::size_t>& ks,
                        const std::vector<double>& tious) {
    EvalReport report;
    for (std::size_t k : ks) {
        for (double t : tious) report.r_at_k[{k, t}] = recall_at_k_queries(per_query_preds, per_query_gt, k, t);
    }
    return report;
}

}  // namespace asl
