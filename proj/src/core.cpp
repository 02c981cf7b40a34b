// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/core.hpp"

#include <algorithm>
#include <cmath>

namespace asl {

TimeSegment make_segment(double start, double end) {
    TimeSegment s{start, end};
    if (!std::isfinite(start) || !std::isfinite(end) || !s.valid()) {
        throw InvalidInput("invalid segment [" + std::to_string(start) + ", " + std::to_string(end) + "]");
    }
    return s;
}

void VideoAnnotation::validate(int num_classes) const {
    if (!(duration > 0.0)) throw InvalidInput("video '" + video_id + "': non-positive duration");
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        const auto where = "video '" + video_id + "' instance " + std::to_string(i);
        if (!inst.segment.valid()) throw InvalidInput(where + ": degenerate segment");
        if (inst.segment.end > duration + 1e-9) throw InvalidInput(where + ": segment exceeds duration");
        if (inst.label < 0 || inst.label >= num_classes) {
            throw InvalidInput(where + ": label " + std::to_string(inst.label) + " outside [0, " +
                               std::to_string(num_classes) + ")");
        }
    }
}

void FeatureSequence::validate() const {
    if (frames == 0 || channels == 0) throw InvalidInput("features '" + video_id + "': empty");
    if (data.size() != frames * channels) throw InvalidInput("features '" + video_id + "': size mismatch");
    if (!(stride_seconds > 0.0)) throw InvalidInput("features '" + video_id + "': non-positive stride");
    for (double v : data) {
        if (!std::isfinite(v)) throw InvalidInput("features '" + video_id + "': non-finite value");
    }
}

std::size_t PointTargets::num_positive() const {
    return static_cast<std::size_t>(std::count(in_mask.begin(), in_mask.end(), std::uint8_t{1}));
}

double tiou(const TimeSegment& a, const TimeSegment& b) {
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = (a.end - a.start) + (b.end - b.start) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::size_t level_length(std::size_t frames, std::size_t level) {
    const std::size_t stride = std::size_t{1} << level;
    return (frames + stride - 1) / stride;
}

std::vector<PyramidPoint> build_pyramid(std::size_t frames, std::size_t levels, double stride_seconds) {
    if (levels == 0) throw InvalidInput("build_pyramid: need at least one level");
    if (levels > 30 || frames < (std::size_t{1} << (levels - 1))) {
        throw InvalidInput("build_pyramid: " + std::to_string(levels) + " levels too deep for " +
                           std::to_string(frames) + " frames");
    }
    std::vector<PyramidPoint> points;
    for (std::size_t level = 0; level < levels; ++level) {
        const std::size_t stride = std::size_t{1} << level;
        const double lo = level == 0 ? 0.0 : static_cast<double>(stride * 2) * stride_seconds;
        const double hi = level + 1 == levels ? std::numeric_limits<double>::infinity()
                                              : static_cast<double>(stride * 4) * stride_seconds;
        const std::size_t n = level_length(frames, level);
        for (std::size_t i = 0; i < n; ++i) {
            points.push_back({step_time(i * stride, stride_seconds), level, stride, i, lo, hi});
        }
    }
    return points;
}

PointTargets assign_labels(const std::vector<PyramidPoint>& points, const VideoAnnotation& annotation) {
    PointTargets targets;
    const std::size_t n = points.size();
    targets.labels.assign(n, PointTargets::kBackground);
    targets.offset_start.assign(n, 0.0);
    targets.offset_end.assign(n, 0.0);
    targets.matched.assign(n, std::nullopt);
    targets.in_mask.assign(n, 0);
    targets.bg_mask.assign(n, 1);

    for (std::size_t p = 0; p < n; ++p) {
        const auto& pt = points[p];
        double best_len = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < annotation.instances.size(); ++g) {
            const auto& seg = annotation.instances[g].segment;
            if (pt.t_center < seg.start || pt.t_center > seg.end) continue;
            const double ds = pt.t_center - seg.start;
            const double de = seg.end - pt.t_center;
            const double reach = std::max(ds, de);
            const bool in_range = (pt.level == 0 ? reach >= pt.range_min : reach > pt.range_min) &&
                                  reach <= pt.range_max;
            if (!in_range) continue;
            const double len = seg.duration();
            if (len < best_len) {
                best_len = len;
                targets.labels[p] = annotation.instances[g].label;
                targets.offset_start[p] = ds;
                targets.offset_end[p] = de;
                targets.matched[p] = g;
            }
        }
        if (targets.matched[p]) {
            targets.in_mask[p] = 1;
            targets.bg_mask[p] = 0;
        }
    }
    return targets;
}

}  // namespace asl
