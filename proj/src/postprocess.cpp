// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/postprocess.hpp"

#include <algorithm>
#include <cmath>

namespace asl {

void DecodeConfig::validate() const {
    if (!(score_floor >= 0.0 && score_floor < 1.0)) throw InvalidInput("decode.score_floor must lie in [0, 1)");
    if (pre_nms_topk == 0) throw InvalidInput("decode.pre_nms_topk must be >= 1");
    if (!(nms_sigma > 0.0)) throw InvalidInput("decode.nms_sigma must be > 0");
    if (!(min_score >= 0.0)) throw InvalidInput("decode.min_score must be >= 0");
    if (max_keep == 0 || nlq_topk == 0) throw InvalidInput("decode.max_keep and decode.nlq_topk must be >= 1");
}

bool score_order(const SegmentPrediction& a, const SegmentPrediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.segment.start != b.segment.start) return a.segment.start < b.segment.start;
    if (a.label != b.label) return a.label < b.label;
    return a.segment.end < b.segment.end;
}

std::vector<SegmentPrediction> decode_dense(const std::string& video_id, const std::vector<PyramidPoint>& points,
                                            const DenseOutput& dense, double duration, double score_floor,
                                            std::size_t pre_nms_topk) {
    const std::size_t n = dense.num_points();
    const std::size_t classes = dense.num_classes();
    if (points.size() != n || dense.offsets.size() != 2 * n) {
        throw InvalidInput("decode_dense: " + std::to_string(points.size()) + " points vs dense output of " +
                           std::to_string(n));
    }
    const auto& logits = dense.cls_logits.values();
    const auto& off = dense.offsets.values();
    std::vector<SegmentPrediction> out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < classes; ++c) {
            const double score = 1.0 / (1.0 + std::exp(-logits[i * classes + c]));
            if (score < score_floor || score <= 0.0) continue;
            const double t = points[i].t_center;
            const double start = std::clamp(t - off[2 * i], 0.0, duration);
            const double end = std::clamp(t + off[2 * i + 1], 0.0, duration);
            if (!(end > start)) continue;
            out.push_back({video_id, {start, end}, static_cast<int>(c), score});
        }
    }
    if (out.size() > pre_nms_topk) {
        std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(pre_nms_topk), out.end(), score_order);
        out.resize(pre_nms_topk);
    } else {
        std::sort(out.begin(), out.end(), score_order);
    }
    return out;
}

std::vector<SegmentPrediction> soft_nms(std::vector<SegmentPrediction> preds, double sigma, double min_score,
                                        std::size_t max_keep, bool per_class) {
    std::vector<SegmentPrediction> kept;
    std::vector<bool> taken(preds.size(), false);
    while (kept.size() < max_keep) {
        std::size_t best = preds.size();
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (taken[i]) continue;
            if (best == preds.size() || score_order(preds[i], preds[best])) best = i;
        }
        if (best == preds.size() || preds[best].score < min_score) break;
        taken[best] = true;
        const auto& top = preds[best];
        kept.push_back(top);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (taken[i] || (per_class && preds[i].label != top.label)) continue;
            const double overlap = tiou(top.segment, preds[i].segment);
            if (overlap > 0.0) preds[i].score *= std::exp(-overlap * overlap / sigma);
        }
    }
    std::stable_sort(kept.begin(), kept.end(), score_order);
    return kept;
}

DenseOutput ensemble_mean_logits(const std::vector<DenseOutput>& outputs) {
    if (outputs.empty()) throw InvalidInput("ensemble_mean_logits: no outputs");
    const auto& first = outputs.front();
    // Mean as first + mean deviation, so identical members reproduce the
    // single output bit for bit.
    std::vector<double> cls(first.cls_logits.size(), 0.0);
    std::vector<double> off(first.offsets.size(), 0.0);
    for (const auto& o : outputs) {
        if (o.cls_logits.shape() != first.cls_logits.shape()) {
            throw ad::ShapeError("ensemble_mean_logits", first.cls_logits.shape(), o.cls_logits.shape());
        }
        if (o.offsets.shape() != first.offsets.shape()) {
            throw ad::ShapeError("ensemble_mean_logits", first.offsets.shape(), o.offsets.shape());
        }
        for (std::size_t i = 0; i < cls.size(); ++i) cls[i] += o.cls_logits[i] - first.cls_logits[i];
        for (std::size_t i = 0; i < off.size(); ++i) off[i] += o.offsets[i] - first.offsets[i];
    }
    const double e = static_cast<double>(outputs.size());
    for (std::size_t i = 0; i < cls.size(); ++i) cls[i] = first.cls_logits[i] + cls[i] / e;
    for (std::size_t i = 0; i < off.size(); ++i) off[i] = first.offsets[i] + off[i] / e;
    return {ad::Array(first.cls_logits.shape(), std::move(cls)), ad::Array(first.offsets.shape(), std::move(off))};
}

std::vector<SegmentPrediction> ensemble_topk_merge(const std::vector<std::vector<SegmentPrediction>>& lists,
                                                   std::size_t k_out) {
    std::vector<SegmentPrediction> all;
    for (const auto& l : lists) all.insert(all.end(), l.begin(), l.end());
    std::stable_sort(all.begin(), all.end(), score_order);
    if (all.size() > k_out) all.resize(k_out);
    return all;
}

}  // namespace asl
