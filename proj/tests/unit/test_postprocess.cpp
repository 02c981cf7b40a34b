// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>

#include "asl/autodiff/array.hpp"
#include "asl/postprocess.hpp"
#include "asl/util/random.hpp"
#include "doctest.h"

using namespace asl;
using ad::Array;

namespace {

SegmentPrediction pred(double s, double e, double score, int label = 0, std::string vid = "v") {
    return {std::move(vid), {s, e}, label, score};
}

std::vector<SegmentPrediction> random_grid_preds(Rng& rng, std::size_t n, int classes) {
    std::vector<SegmentPrediction> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(rng.below(15));
        const double e = s + 1.0 + static_cast<double>(rng.below(6));
        out.push_back(pred(s, e, rng.uniform(0.01, 1.0), static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)))));
    }
    return out;
}

/// Greedy hard NMS: keep a prediction unless it overlaps an already kept
/// one of the same class.
std::vector<SegmentPrediction> hard_nms(std::vector<SegmentPrediction> p) {
    std::stable_sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    std::vector<SegmentPrediction> kept;
    for (const auto& x : p) {
        bool clash = false;
        for (const auto& k : kept) clash = clash || (k.label == x.label && tiou(k.segment, x.segment) > 0.0);
        if (!clash) kept.push_back(x);
    }
    return kept;
}

}  // namespace

TEST_SUITE("postprocess") {

TEST_CASE("decode examples") {
    const auto pts = build_pyramid(10, 1);
    DenseOutput dense{Array::full({10, 2}, -50.0), Array::full({10, 2}, 1.0)};
    CHECK(decode_dense("v", pts, dense, 10.0, 0.001, 100).empty());

    auto logits = dense.cls_logits.clone();
    logits.mutable_data()[4 * 2 + 1] = 3.0;  // point at t=4.5
    auto off = dense.offsets.clone();
    DenseOutput one{logits, off};
    auto out = decode_dense("v", pts, one, 10.0, 0.001, 100);
    REQUIRE(out.size() == 1);
    CHECK(out[0].segment.start == 3.5);
    CHECK(out[0].segment.end == 5.5);
    CHECK(out[0].label == 1);
    CHECK(out[0].score == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))));

    const std::vector<PyramidPoint> at5{{5.0, 0, 1, 5, 0.0, 1e9}};
    DenseOutput five{Array({1, 1}, {2.0}), Array({1, 2}, {1.0, 1.0})};
    out = decode_dense("v", at5, five, 10.0, 0.001, 10);
    REQUIRE(out.size() == 1);
    CHECK(out[0].segment.start == 4.0);
    CHECK(out[0].segment.end == 6.0);

    DenseOutput wide{Array({1, 1}, {2.0}), Array({1, 2}, {7.0, 9.0})};
    out = decode_dense("v", at5, wide, 10.0, 0.001, 10);
    REQUIRE(out.size() == 1);
    CHECK(out[0].segment.start == 0.0);
    CHECK(out[0].segment.end == 10.0);
}

TEST_CASE("decode keeps the best pre_nms_topk") {
    Rng rng(1);
    const auto pts = build_pyramid(20, 2);
    std::vector<double> lg(pts.size() * 2);
    for (auto& v : lg) v = rng.uniform(-3.0, 3.0);
    DenseOutput d{Array({pts.size(), 2}, lg), Array::full({pts.size(), 2}, 1.0)};
    const auto all = decode_dense("v", pts, d, 20.0, 0.0, 100000);
    const auto top = decode_dense("v", pts, d, 20.0, 0.0, 7);
    REQUIRE(top.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(top[i].score == all[i].score);
}

TEST_CASE("decode of perfect dense outputs recovers every ground truth") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t frames = 64;
        const auto pts = build_pyramid(frames, 4, 0.5);
        VideoAnnotation ann{"v", 32.0, {}};
        for (int g = 0; g < 3; ++g) {
            const double a = rng.uniform(0.0, 24.0);
            ann.instances.push_back({{a, a + rng.uniform(1.0, 8.0)}, static_cast<int>(rng.below(2))});
        }
        const auto t = assign_labels(pts, ann);
        std::vector<double> lg(pts.size() * 2, -30.0), off(pts.size() * 2, 1.0);
        for (std::size_t p = 0; p < pts.size(); ++p) {
            if (!t.in_mask[p]) continue;
            lg[p * 2 + static_cast<std::size_t>(t.labels[p])] = 30.0;
            off[2 * p] = t.offset_start[p];
            off[2 * p + 1] = t.offset_end[p];
        }
        const auto preds = decode_dense("v", pts, {Array({pts.size(), 2}, lg), Array({pts.size(), 2}, off)}, 32.0,
                                        0.5, 100000);
        for (std::size_t g = 0; g < ann.instances.size(); ++g) {
            const bool represented = std::any_of(t.matched.begin(), t.matched.end(),
                                                 [&](const auto& m) { return m && *m == g; });
            if (!represented) continue;
            double best = 0.0;
            for (const auto& p : preds) {
                if (p.label == ann.instances[g].label) best = std::max(best, tiou(p.segment, ann.instances[g].segment));
            }
            CHECK(best == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("soft-NMS examples") {
    const auto single = soft_nms({pred(1, 3, 0.7)}, 0.5, 0.001, 10);
    REQUIRE(single.size() == 1);
    CHECK(single[0].score == 0.7);

    const auto twin = soft_nms({pred(1, 3, 0.9), pred(1, 3, 0.8)}, 0.5, 0.001, 10);
    REQUIRE(twin.size() == 2);
    CHECK(twin[0].score == 0.9);
    CHECK(std::abs(twin[1].score - 0.8 * std::exp(-2.0)) <= 1e-12);
    CHECK(twin[1].score == doctest::Approx(0.10827).epsilon(1e-4));

    const auto disjoint = soft_nms({pred(0, 1, 0.5), pred(2, 3, 0.6), pred(4, 5, 0.4)}, 0.5, 0.001, 10);
    REQUIRE(disjoint.size() == 3);
    CHECK(disjoint[0].score == 0.6);
    CHECK(disjoint[1].score == 0.5);
    CHECK(disjoint[2].score == 0.4);

    const auto other_class = soft_nms({pred(1, 3, 0.9, 0), pred(1, 3, 0.8, 1)}, 0.5, 0.001, 10);
    CHECK(other_class[1].score == 0.8);
    const auto global = soft_nms({pred(1, 3, 0.9, 0), pred(1, 3, 0.8, 1)}, 0.5, 0.001, 10, false);
    CHECK(global[1].score < 0.8);
}

TEST_CASE("soft-NMS properties on random inputs") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const auto in = random_grid_preds(rng, 1 + rng.below(40), 3);
        const std::size_t cap = 1 + rng.below(30);
        const auto out = soft_nms(in, 0.5, 0.001, cap);
        CHECK(out.size() <= cap);
        const auto top = *std::min_element(in.begin(), in.end(), score_order);
        REQUIRE_FALSE(out.empty());
        CHECK(out[0].score == top.score);
        CHECK(out[0].segment.start == top.segment.start);
        for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i].score <= out[i - 1].score);
        for (const auto& o : out) {
            const bool from_input = std::any_of(in.begin(), in.end(), [&](const auto& p) {
                return p.label == o.label && p.segment.start == o.segment.start && p.segment.end == o.segment.end &&
                       o.score <= p.score;
            });
            CHECK(from_input);
        }
    }
}

TEST_CASE("soft-NMS with a vanishing sigma behaves like hard NMS") {
    Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const auto in = random_grid_preds(rng, 1 + rng.below(25), 2);
        auto soft = soft_nms(in, 1e-6, 1e-3, 1000);
        auto hard = hard_nms(in);
        std::sort(soft.begin(), soft.end(), score_order);
        std::sort(hard.begin(), hard.end(), score_order);
        REQUIRE(soft.size() == hard.size());
        for (std::size_t i = 0; i < soft.size(); ++i) {
            CHECK(soft[i].segment.start == hard[i].segment.start);
            CHECK(soft[i].segment.end == hard[i].segment.end);
            CHECK(soft[i].label == hard[i].label);
            CHECK(soft[i].score == hard[i].score);
        }
    }
}

TEST_CASE("default decode caps") {
    const DecodeConfig d;
    CHECK(d.max_keep == 2000);
    CHECK(d.nlq_topk == 5);
    CHECK(d.nms_sigma == 0.5);
    CHECK(d.min_score == 0.001);
}

TEST_CASE("mean-logit ensemble") {
    const DenseOutput a{Array({2, 1}, {0.0, -1.0}), Array({2, 2}, {1, 2, 3, 4})};
    const DenseOutput b{Array({2, 1}, {2.0, 1.0}), Array({2, 2}, {3, 2, 1, 0})};
    const auto m = ensemble_mean_logits({a, b});
    CHECK(m.cls_logits.values() == std::vector<double>{1.0, 0.0});
    CHECK(m.offsets.values() == std::vector<double>{2, 2, 2, 2});

    Rng rng(5);
    std::vector<double> lg(30), off(20);
    for (auto& v : lg) v = rng.uniform(-5.0, 5.0);
    for (auto& v : off) v = rng.uniform(0.1, 5.0);
    const DenseOutput r{Array({10, 3}, lg), Array({10, 2}, off)};
    for (std::size_t e = 1; e <= 5; ++e) {
        const auto same = ensemble_mean_logits(std::vector<DenseOutput>(e, r));
        CHECK(same.cls_logits.values() == lg);
        CHECK(same.offsets.values() == off);
    }
    CHECK(ensemble_mean_logits({r, r, r}).cls_logits.values() == lg);

    const DenseOutput small{Array({9, 3}, std::vector<double>(27, 0.0)), Array({9, 2}, std::vector<double>(18, 1.0))};
    CHECK_THROWS_AS(ensemble_mean_logits({r, small}), ad::ShapeError);
    CHECK_THROWS_AS(ensemble_mean_logits({}), InvalidInput);
}

TEST_CASE("top-k merge") {
    std::vector<SegmentPrediction> one;
    for (int i = 0; i < 8; ++i) one.push_back(pred(i, i + 1, 0.9 - 0.1 * i));
    const auto only = ensemble_topk_merge({one});
    REQUIRE(only.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(only[i].score == one[i].score);

    std::vector<SegmentPrediction> low;
    for (int i = 0; i < 5; ++i) low.push_back(pred(i, i + 1, 0.05 - 0.01 * i));
    const auto merged = ensemble_topk_merge({low, one});
    REQUIRE(merged.size() == 5);
    for (const auto& p : merged) CHECK(p.score >= 0.5 - 1e-12);
}

}  // TEST_SUITE
