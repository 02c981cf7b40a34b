// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace asl {

/// Input that violates a domain invariant (bad segment, label, geometry).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Half-open in spirit, closed in arithmetic: [start, end] in seconds.
struct TimeSegment {
    double start = 0.0;
    double end = 0.0;

    double duration() const { return end - start; }
    double center() const { return 0.5 * (start + end); }
    bool valid() const { return start >= 0.0 && end > start; }
};

/// Throws InvalidInput unless start >= 0 and end > start.
TimeSegment make_segment(double start, double end);

struct ActionInstance {
    TimeSegment segment;
    int label = 0;
};

struct VideoAnnotation {
    std::string video_id;
    double duration = 0.0;
    std::vector<ActionInstance> instances;

    /// Checks segment validity, containment in [0, duration], and label < num_classes.
    void validate(int num_classes) const;
};

/// Per-video features, time-major (row t holds D channels).
struct FeatureSequence {
    std::string video_id;
    std::size_t frames = 0;
    std::size_t channels = 0;
    std::vector<double> data;
    double stride_seconds = 1.0;

    double at(std::size_t t, std::size_t c) const { return data[t * channels + c]; }
    void validate() const;
};

struct PyramidPoint {
    double t_center = 0.0;
    std::size_t level = 0;
    std::size_t stride = 1;  // feature steps, 2^level
    std::size_t index = 0;   // position within its level
    double range_min = 0.0;
    double range_max = std::numeric_limits<double>::infinity();
};

/// Per-point training targets in pyramid-point order.
struct PointTargets {
    static constexpr int kBackground = -1;

    std::vector<int> labels;                      // class or kBackground
    std::vector<double> offset_start;             // seconds, valid where in_mask
    std::vector<double> offset_end;
    std::vector<std::optional<std::size_t>> matched;  // instance index
    std::vector<std::uint8_t> in_mask;
    std::vector<std::uint8_t> bg_mask;

    std::size_t size() const { return labels.size(); }
    std::size_t num_positive() const;
};

/// Temporal IoU of two valid segments.
double tiou(const TimeSegment& a, const TimeSegment& b);

/// Time of feature step `step` (its center).
inline double step_time(std::size_t step, double stride_seconds) {
    return (static_cast<double>(step) + 0.5) * stride_seconds;
}

/// Number of points at a pyramid level: ceil(frames / 2^level).
std::size_t level_length(std::size_t frames, std::size_t level);

/// Anchor-free points over `levels` levels. Level l holds ceil(frames/2^l)
/// points spaced 2^l steps apart. Regression range of level l is
/// (2^(l+1) s, 2^(l+2) s] with level 0 starting at 0 and the top level
/// unbounded, s = stride_seconds.
std::vector<PyramidPoint> build_pyramid(std::size_t frames, std::size_t levels, double stride_seconds = 1.0);

/// Positive iff the point lies inside an instance and its larger boundary
/// offset falls in the level's regression range. Overlaps go to the
/// shortest instance.
PointTargets assign_labels(const std::vector<PyramidPoint>& points, const VideoAnnotation& annotation);

}  // namespace asl
