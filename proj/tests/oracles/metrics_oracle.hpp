// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force evaluation references. Written independently of the library
// metrics: no shared helpers beyond the plain data types.

#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "asl/metrics.hpp"

namespace oracle {

inline double overlap(const asl::TimeSegment& a, const asl::TimeSegment& b) {
    const double lo = std::max(a.start, b.start);
    const double hi = std::min(a.end, b.end);
    if (hi <= lo) return 0.0;
    const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
    // Union of two overlapping intervals is their hull.
    return (hi - lo) / uni;
}

/// Ranks by the documented order using a tuple key.
inline std::vector<asl::SegmentPrediction> ranked(std::vector<asl::SegmentPrediction> p) {
    std::stable_sort(p.begin(), p.end(), [](const auto& a, const auto& b) {
        return std::make_tuple(-a.score, a.segment.start, a.video_id, a.segment.end, a.label) <
               std::make_tuple(-b.score, b.segment.start, b.video_id, b.segment.end, b.label);
    });
    return p;
}

/// Hit flags for ranked predictions; scans the whole ground-truth list.
inline std::vector<int> hits(const std::vector<asl::SegmentPrediction>& preds,
                             const std::vector<asl::GroundTruth>& gts, double thr) {
    std::vector<int> taken(gts.size(), 0), out;
    for (const auto& p : preds) {
        int best = -1;
        double best_o = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g] || gts[g].video_id != p.video_id) continue;
            const double o = overlap(p.segment, gts[g].segment);
            if (o < thr) continue;
            if (best < 0 || o > best_o) {
                best = static_cast<int>(g);
                best_o = o;
            }
        }
        if (best >= 0) taken[best] = 1;
        out.push_back(best >= 0);
    }
    return out;
}

/// AP = (1 / N_gt) * sum over hit ranks k of max_{j >= k} precision(j).
inline double ap(const std::vector<asl::SegmentPrediction>& preds, const std::vector<asl::GroundTruth>& gts,
                 double thr) {
    const auto r = ranked(preds);
    const auto h = hits(r, gts, thr);
    std::vector<double> precision(h.size());
    int tp = 0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        tp += h[k];
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        if (!h[k]) continue;
        double best = 0.0;
        for (std::size_t j = k; j < h.size(); ++j) best = std::max(best, precision[j]);
        total += best;
    }
    return total / static_cast<double>(gts.size());
}

template <class T>
std::vector<T> of_label(const std::vector<T>& v, int label) {
    std::vector<T> out;
    for (const auto& x : v) {
        if (x.label == label) out.push_back(x);
    }
    return out;
}

inline double average_map(const std::vector<asl::SegmentPrediction>& preds, const std::vector<asl::GroundTruth>& gts,
                          const std::vector<double>& thresholds) {
    std::vector<int> labels;
    for (const auto& g : gts) {
        if (std::find(labels.begin(), labels.end(), g.label) == labels.end()) labels.push_back(g.label);
    }
    double total = 0.0;
    for (double t : thresholds) {
        double sum = 0.0;
        for (int c : labels) sum += ap(of_label(preds, c), of_label(gts, c), t);
        total += sum / static_cast<double>(labels.size());
    }
    return total / static_cast<double>(thresholds.size());
}

inline double recall_at_kx(const std::vector<asl::SegmentPrediction>& preds, const std::vector<asl::GroundTruth>& gts,
                           std::size_t k, double thr) {
    std::vector<int> labels;
    for (const auto& g : gts) {
        if (std::find(labels.begin(), labels.end(), g.label) == labels.end()) labels.push_back(g.label);
    }
    int matched = 0;
    for (int c : labels) {
        const auto cg = of_label(gts, c);
        auto cp = ranked(of_label(preds, c));
        if (cp.size() > k * cg.size()) cp.resize(k * cg.size());
        for (int h : hits(cp, cg, thr)) matched += h;
    }
    return static_cast<double>(matched) / static_cast<double>(gts.size());
}

inline double recall_at_k(const std::vector<asl::SegmentPrediction>& preds,
                          const std::map<std::string, asl::TimeSegment>& truth, std::size_t k, double thr) {
    int found = 0;
    for (const auto& [q, seg] : truth) {
        std::vector<asl::SegmentPrediction> mine;
        for (const auto& p : preds) {
            if (p.video_id == q) mine.push_back(p);
        }
        mine = ranked(mine);
        for (std::size_t i = 0; i < mine.size() && i < k; ++i) {
            if (overlap(mine[i].segment, seg) >= thr) {
                ++found;
                break;
            }
        }
    }
    return static_cast<double>(found) / static_cast<double>(truth.size());
}

}  // namespace oracle
