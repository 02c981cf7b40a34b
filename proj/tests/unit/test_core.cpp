// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <cmath>

#include "asl/core.hpp"
#include "asl/util/random.hpp"
#include "doctest.h"

using namespace asl;

namespace {

TimeSegment random_segment(Rng& rng) {
    const double a = rng.uniform(0.0, 50.0);
    return {a, a + rng.uniform(0.01, 30.0)};
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("tiou examples") {
    CHECK(tiou({0, 2}, {0, 2}) == 1.0);
    CHECK(tiou({0, 1}, {2, 3}) == 0.0);
    CHECK(tiou({0, 2}, {1, 3}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("tiou is symmetric and self-overlap is exactly one") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const auto a = random_segment(rng);
        const auto b = random_segment(rng);
        const double ab = tiou(a, b);
        CHECK(ab == tiou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(tiou(a, a) == 1.0);
    }
}

TEST_CASE("make_segment rejects degenerate input") {
    CHECK_THROWS_AS(make_segment(1.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(make_segment(-1.0, 2.0), InvalidInput);
    CHECK_THROWS_AS(make_segment(0.0, NAN), InvalidInput);
    CHECK(make_segment(0.5, 2.0).duration() == 1.5);
}

TEST_CASE("pyramid point counts") {
    CHECK(build_pyramid(8, 1).size() == 8);
    for (const auto& p : build_pyramid(8, 1)) CHECK(p.level == 0);
    CHECK(build_pyramid(8, 3).size() == 14);

    // 1024 + 512 + ... + 8, summed by hand below rather than via level_length.
    std::size_t expected = 0;
    for (std::size_t l = 0, n = 1024; l < 8; ++l, n /= 2) expected += n;
    CHECK(expected == 2040);
    CHECK(build_pyramid(1024, 8).size() == expected);
}

TEST_CASE("pyramid count matches closed form for all small geometries") {
    for (std::size_t levels = 1; levels <= 8; ++levels) {
        for (std::size_t t = std::size_t{1} << (levels - 1); t <= 4096; ++t) {
            std::size_t closed = 0;
            for (std::size_t l = 0; l < levels; ++l) {
                const double d = std::ceil(static_cast<double>(t) / std::pow(2.0, static_cast<double>(l)));
                closed += static_cast<std::size_t>(d);
            }
            REQUIRE(build_pyramid(t, levels).size() == closed);
        }
    }
}

TEST_CASE("pyramid geometry: spacing and tiled ranges") {
    const double s = 0.5;
    const auto pts = build_pyramid(40, 4, s);
    std::size_t i = 0;
    double prev_hi = 0.0;
    for (std::size_t level = 0; level < 4; ++level) {
        const std::size_t n = level_length(40, level);
        for (std::size_t k = 0; k < n; ++k, ++i) {
            CHECK(pts[i].level == level);
            CHECK(pts[i].stride == (std::size_t{1} << level));
            CHECK(pts[i].t_center == doctest::Approx((static_cast<double>(k << level) + 0.5) * s));
        }
        CHECK(pts[i - 1].range_min == prev_hi);
        prev_hi = pts[i - 1].range_max;
    }
    CHECK(std::isinf(prev_hi));
}

TEST_CASE("pyramid deeper than the sequence is rejected") {
    CHECK_THROWS_AS(build_pyramid(3, 3), InvalidInput);
    CHECK_THROWS_AS(build_pyramid(8, 0), InvalidInput);
    CHECK_NOTHROW(build_pyramid(4, 3));
}

TEST_CASE("assign_labels examples") {
    PyramidPoint centered{1.0, 0, 1, 1, 0.0, 4.0};
    VideoAnnotation single{"v", 10.0, {{{0.0, 2.0}, 3}}};
    auto t = assign_labels({centered}, single);
    CHECK(t.labels[0] == 3);
    CHECK(t.offset_start[0] == 1.0);
    CHECK(t.offset_end[0] == 1.0);
    CHECK(t.num_positive() == 1);

    PyramidPoint outside{5.0, 0, 1, 5, 0.0, 4.0};
    t = assign_labels({outside}, single);
    CHECK(t.labels[0] == PointTargets::kBackground);
    CHECK(t.bg_mask[0] == 1);

    PyramidPoint nested{5.0, 0, 1, 5, 0.0, 100.0};
    VideoAnnotation two{"v", 10.0, {{{0.0, 10.0}, 0}, {{4.0, 6.0}, 1}}};
    t = assign_labels({nested}, two);
    CHECK(t.labels[0] == 1);
    CHECK(t.matched[0] == std::optional<std::size_t>{1});

    VideoAnnotation empty{"v", 10.0, {}};
    t = assign_labels(build_pyramid(10, 2), empty);
    CHECK(t.num_positive() == 0);
}

TEST_CASE("assign_labels properties on random videos") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t frames = 16 + rng.below(200);
        const double stride = rng.uniform(0.25, 2.0);
        const double duration = static_cast<double>(frames) * stride;
        VideoAnnotation ann{"v", duration, {}};
        const std::size_t n = rng.below(6);
        for (std::size_t g = 0; g < n; ++g) {
            const double a = rng.uniform(0.0, duration * 0.9);
            const double b = std::min(duration, a + rng.uniform(0.2, duration * 0.5));
            ann.instances.push_back({{a, b}, static_cast<int>(rng.below(4))});
        }
        const auto pts = build_pyramid(frames, 1 + rng.below(4), stride);
        const auto t = assign_labels(pts, ann);
        std::size_t in = 0;
        for (std::size_t p = 0; p < pts.size(); ++p) {
            CHECK((t.in_mask[p] ^ t.bg_mask[p]) == 1);
            if (!t.in_mask[p]) continue;
            ++in;
            const auto& seg = ann.instances[*t.matched[p]].segment;
            CHECK(t.offset_start[p] >= 0.0);
            CHECK(t.offset_end[p] >= 0.0);
            CHECK(std::abs(pts[p].t_center - t.offset_start[p] - seg.start) < 1e-9);
            CHECK(std::abs(pts[p].t_center + t.offset_end[p] - seg.end) < 1e-9);
        }
        CHECK(t.num_positive() == in);
    }
}

TEST_CASE("annotation validation") {
    VideoAnnotation ok{"v", 10.0, {{{1.0, 3.0}, 1}}};
    CHECK_NOTHROW(ok.validate(2));
    CHECK_THROWS_AS(ok.validate(1), InvalidInput);
    VideoAnnotation outside{"v", 2.0, {{{1.0, 3.0}, 0}}};
    CHECK_THROWS_AS(outside.validate(2), InvalidInput);
    VideoAnnotation degenerate{"v", 5.0, {{{1.0, 1.0}, 0}}};
    CHECK_THROWS_AS(degenerate.validate(2), InvalidInput);
}

}  // TEST_SUITE
