// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/io/report.hpp"

#include <cstdio>
#include <map>

namespace asl::io {

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace

std::string report_text(const EvalReport& r) {
    std::string out;
    if (!r.map.empty()) {
        out += "tIoU    mAP(%)\n";
        for (std::size_t i = 0; i < r.map.size(); ++i) {
            out += fixed(r.thresholds[i], 2) + "    " + fixed(100.0 * r.map[i], 2) + "\n";
        }
        out += "average mAP: " + fixed(100.0 * r.average_map, 2) + "\n";
    }
    if (r.recall_at_kx) {
        out += "Recall@" + std::to_string(r.recall_k) + "x (tIoU=" + fixed(r.recall_tiou, 2) +
               "): " + fixed(100.0 * *r.recall_at_kx, 2) + "\n";
    }
    for (const auto& [key, v] : r.r_at_k) {
        out += "R@" + std::to_string(key.first) + " (tIoU=" + fixed(key.second, 2) + "): " + fixed(100.0 * v, 2) + "\n";
    }
    if (!r.per_class_ap.empty()) {
        out += "per-class AP(%) by tIoU:\n";
        for (const auto& [label, aps] : r.per_class_ap) {
            out += "  class " + std::to_string(label) + ":";
            for (double ap : aps) out += " " + fixed(100.0 * ap, 2);
            out += "\n";
        }
    }
    return out;
}

std::string report_kv(const EvalReport& r) {
    std::map<std::string, std::string> kv;
    for (std::size_t i = 0; i < r.map.size(); ++i) kv["map@" + fixed(r.thresholds[i], 2)] = fixed(r.map[i], 12);
    if (!r.map.empty()) kv["average_map"] = fixed(r.average_map, 12);
    if (r.recall_at_kx) {
        kv["recall@" + std::to_string(r.recall_k) + "x@" + fixed(r.recall_tiou, 2)] = fixed(*r.recall_at_kx, 12);
    }
    for (const auto& [key, v] : r.r_at_k) kv["r@" + std::to_string(key.first) + "@" + fixed(key.second, 2)] = fixed(v, 12);
    for (const auto& [label, aps] : r.per_class_ap) {
        for (std::size_t i = 0; i < aps.size(); ++i) {
            kv["ap.class" + std::to_string(label) + "@" + fixed(r.thresholds[i], 2)] = fixed(aps[i], 12);
        }
    }
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string pr_dump(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruth>& gts,
                    const std::vector<double>& thresholds) {
    std::map<int, std::vector<SegmentPrediction>> pred_by;
    std::map<int, std::vector<GroundTruth>> gt_by;
    for (const auto& p : preds) pred_by[p.label].push_back(p);
    for (const auto& g : gts) gt_by[g.label].push_back(g);
    std::string out = "label\ttiou\trank\trecall\tprecision\n";
    for (const auto& [label, class_gts] : gt_by) {
        for (double t : thresholds) {
            const auto curve = pr_curve(pred_by[label], class_gts, t);
            for (std::size_t i = 0; i < curve.size(); ++i) {
                out += std::to_string(label) + "\t" + fixed(t, 2) + "\t" + std::to_string(i + 1) + "\t" +
                       fixed(curve[i].recall, 6) + "\t" + fixed(curve[i].precision, 6) + "\n";
            }
        }
    }
    return out;
}

}  // namespace asl::io
