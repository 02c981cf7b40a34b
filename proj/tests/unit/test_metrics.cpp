// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <cmath>

#include "../oracles/metrics_oracle.hpp"
#include "asl/metrics.hpp"
#include "asl/util/random.hpp"
#include "doctest.h"

using namespace asl;

namespace {

SegmentPrediction pred(std::string vid, double s, double e, double score, int label = 0) {
    return {std::move(vid), {s, e}, label, score};
}

struct RandomSet {
    std::vector<SegmentPrediction> preds;
    std::vector<GroundTruth> gts;
};

RandomSet random_set(Rng& rng, int classes) {
    RandomSet r;
    const std::size_t videos = 1 + rng.below(5);
    for (std::size_t v = 0; v < videos; ++v) {
        const std::string id = "v" + std::to_string(v);
        const std::size_t n = rng.below(5);
        for (std::size_t g = 0; g < n; ++g) {
            const double a = std::round(rng.uniform(0.0, 40.0));
            const GroundTruth gt{id, {a, a + 1.0 + std::round(rng.uniform(0.0, 10.0))},
                                 static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)))};
            r.gts.push_back(gt);
            for (std::size_t k = 0, m = rng.below(3); k < m; ++k) {
                const double j = rng.uniform(-2.0, 2.0);
                r.preds.push_back(pred(id, std::max(0.0, gt.segment.start + j), gt.segment.end + rng.uniform(-2.0, 2.0) + 2.1,
                                       std::round(rng.uniform() * 10.0) / 10.0, gt.label));
            }
        }
        for (std::size_t k = 0, m = rng.below(4); k < m; ++k) {
            const double a = rng.uniform(0.0, 40.0);
            r.preds.push_back(pred(id, a, a + rng.uniform(0.5, 8.0), rng.uniform(),
                                   static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)))));
        }
    }
    if (r.gts.empty()) r.gts.push_back({"v0", {1.0, 4.0}, 0});
    return r;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("average precision examples") {
    const std::vector<GroundTruth> gts{{"a", {0, 2}, 0}, {"a", {5, 7}, 0}};
    CHECK(*average_precision({pred("a", 0, 2, 0.9), pred("a", 5, 7, 0.8)}, gts, 0.5) == 1.0);
    CHECK(*average_precision({}, gts, 0.5) == 0.0);
    CHECK_FALSE(average_precision({pred("a", 0, 2, 0.9)}, {}, 0.5).has_value());

    const std::vector<SegmentPrediction> three{pred("a", 0, 2, 0.9), pred("a", 10, 12, 0.8), pred("a", 5, 7, 0.7)};
    CHECK(*average_precision(three, gts, 0.5) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("ties break deterministically by start then video") {
    CHECK(eval_order(pred("b", 1, 2, 0.5), pred("a", 3, 4, 0.5)));
    CHECK(eval_order(pred("a", 1, 2, 0.5), pred("b", 1, 2, 0.5)));
    CHECK(eval_order(pred("z", 9, 10, 0.6), pred("a", 0, 1, 0.5)));
}

TEST_CASE("mAP examples") {
    const std::vector<GroundTruth> gts{{"a", {0, 2}, 0}, {"b", {1, 4}, 1}, {"b", {6, 9}, 2}};
    std::vector<SegmentPrediction> perfect;
    for (const auto& g : gts) perfect.push_back({g.video_id, g.segment, g.label, 0.9});
    const auto r = average_map(perfect, gts);
    CHECK(r.average == 1.0);
    CHECK(r.thresholds == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
    CHECK(kDefaultTious == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
    CHECK_THROWS_AS(average_map(perfect, {}), InvalidInput);

    // A class with predictions but no ground truth is not scored.
    auto extra = perfect;
    extra.push_back(pred("a", 0, 2, 0.99, 7));
    CHECK(average_map(extra, gts).average == 1.0);
    CHECK(average_map(extra, gts).per_class.count(7) == 0);
}

TEST_CASE("mAP on a random 5-video, 3-class set equals the brute-force reference") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_set(rng, 3);
        const auto r = average_map(s.preds, s.gts);
        CHECK(std::abs(r.average - oracle::average_map(s.preds, s.gts, kDefaultTious)) <= 1e-9);
        double mean = 0.0;
        for (double m : r.map) mean += m / static_cast<double>(r.map.size());
        CHECK(std::abs(mean - r.average) <= 1e-15);
        for (double m : r.map) {
            CHECK(m >= 0.0);
            CHECK(m <= 1.0);
        }
    }
}

TEST_CASE("Recall@kx examples") {
    const std::vector<GroundTruth> gts{{"a", {0, 2}, 0}, {"a", {5, 7}, 0}, {"a", {3, 4}, 1}};
    std::vector<SegmentPrediction> perfect;
    for (const auto& g : gts) perfect.push_back({g.video_id, g.segment, g.label, 0.5});
    CHECK(recall_at_kx(perfect, gts) == 1.0);
    CHECK(recall_at_kx({}, gts) == 0.0);

    const std::vector<GroundTruth> two{{"a", {0, 2}, 0}, {"a", {5, 7}, 0}};
    const std::vector<SegmentPrediction> ranked{pred("a", 0, 2, 0.9), pred("a", 20, 22, 0.8), pred("a", 5, 7, 0.7)};
    CHECK(recall_at_kx(ranked, two, 1, 0.5) == 0.5);
    CHECK(recall_at_kx(ranked, two, 2, 0.5) == 1.0);
}

TEST_CASE("Recall@kx equals the brute-force reference") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_set(rng, 3);
        for (std::size_t k : {1, 2}) {
            CHECK(std::abs(recall_at_kx(s.preds, s.gts, k, 0.5) - oracle::recall_at_kx(s.preds, s.gts, k, 0.5)) <= 1e-9);
        }
    }
}

TEST_CASE("query recall") {
    std::map<std::string, TimeSegment> gt{{"q1", {0, 2}}, {"q2", {3, 5}}, {"q3", {10, 12}}};
    std::map<std::string, std::vector<SegmentPrediction>> exact;
    for (const auto& [q, seg] : gt) exact[q] = {{q, seg, 0, 0.9}, {q, {30, 31}, 0, 0.1}};
    for (double t : {0.3, 0.5}) CHECK(recall_at_k_queries(exact, gt, 1, t) == 1.0);

    std::map<std::string, std::vector<SegmentPrediction>> partial;
    partial["q1"] = {pred("q1", 20, 22, 0.9), pred("q1", 0, 2, 0.5)};
    partial["q2"] = {pred("q2", 3, 5, 0.9)};
    CHECK(recall_at_k_queries(partial, gt, 1, 0.5) == doctest::Approx(1.0 / 3.0));
    CHECK(recall_at_k_queries(partial, gt, 5, 0.5) == doctest::Approx(2.0 / 3.0));

    const auto report = evaluate_nlq(partial, gt);
    CHECK(report.r_at_k.size() == 4);
    CHECK(report.r_at_k.at({5, 0.3}) >= report.r_at_k.at({1, 0.3}));
}

TEST_CASE("query recall on a mixed 10-query case equals the brute-force reference") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<std::string, TimeSegment> gt;
        std::map<std::string, std::vector<SegmentPrediction>> per;
        std::vector<SegmentPrediction> flat;
        for (int q = 0; q < 10; ++q) {
            const std::string id = "q" + std::to_string(q);
            const double a = rng.uniform(0.0, 20.0);
            gt[id] = {a, a + rng.uniform(1.0, 6.0)};
            for (std::size_t k = 0, m = rng.below(8); k < m; ++k) {
                const double b = a + rng.uniform(-4.0, 4.0);
                const auto p = pred(id, std::max(0.0, b), std::max(0.0, b) + rng.uniform(0.5, 6.0), rng.uniform());
                per[id].push_back(p);
                flat.push_back(p);
            }
        }
        double prev = 0.0;
        for (std::size_t k : {1, 2, 3, 5, 10}) {
            for (double t : {0.3, 0.5}) {
                CHECK(std::abs(recall_at_k_queries(per, gt, k, t) - oracle::recall_at_k(flat, gt, k, t)) <= 1e-9);
            }
            const double r = recall_at_k_queries(per, gt, k, 0.5);
            CHECK(r >= prev);
            prev = r;
        }
    }
}

TEST_CASE("metrics are invariant to input order") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = random_set(rng, 2);
        const auto base = average_map(s.preds, s.gts);
        const double rec = recall_at_kx(s.preds, s.gts);
        for (std::size_t i = s.preds.size(); i > 1; --i) std::swap(s.preds[i - 1], s.preds[rng.below(i)]);
        CHECK(average_map(s.preds, s.gts).average == base.average);
        CHECK(recall_at_kx(s.preds, s.gts) == rec);
    }
}

TEST_CASE("adding a true positive never lowers AP") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto s = random_set(rng, 1);
        for (auto& g : s.gts) g.label = 0;
        for (auto& p : s.preds) p.label = 0;
        for (double t : {0.3, 0.5}) {
            const double before = *average_precision(s.preds, s.gts, t);
            std::vector<SegmentPrediction> sorted = s.preds;
            std::stable_sort(sorted.begin(), sorted.end(), eval_order);
            const auto hit = oracle::hits(sorted, s.gts, t);
            // Find a ground truth nobody matched and add an exact hit for it.
            std::vector<int> matched(s.gts.size(), 0);
            {
                std::vector<int> taken(s.gts.size(), 0);
                for (std::size_t i = 0; i < sorted.size(); ++i) {
                    if (!hit[i]) continue;
                    int best = -1;
                    double bo = 0.0;
                    for (std::size_t g = 0; g < s.gts.size(); ++g) {
                        if (taken[g] || s.gts[g].video_id != sorted[i].video_id) continue;
                        const double o = oracle::overlap(sorted[i].segment, s.gts[g].segment);
                        if (o >= t && (best < 0 || o > bo)) best = static_cast<int>(g), bo = o;
                    }
                    taken[best] = 1;
                }
                matched = taken;
            }
            for (std::size_t g = 0; g < s.gts.size(); ++g) {
                if (matched[g]) continue;
                auto more = s.preds;
                more.push_back({s.gts[g].video_id, s.gts[g].segment, 0, rng.uniform()});
                CHECK(*average_precision(more, s.gts, t) >= before - 1e-15);
                break;
            }
        }
    }
}

TEST_CASE("PR curve points are consistent") {
    const std::vector<GroundTruth> gts{{"a", {0, 2}, 0}, {"a", {5, 7}, 0}};
    const auto c = pr_curve({pred("a", 0, 2, 0.9), pred("a", 10, 12, 0.8), pred("a", 5, 7, 0.7)}, gts, 0.5);
    REQUIRE(c.size() == 3);
    CHECK(c[0].precision == 1.0);
    CHECK(c[1].recall == 0.5);
    CHECK(c[2].recall == 1.0);
    CHECK(c[2].precision == doctest::Approx(2.0 / 3.0));
}

}  // TEST_SUITE
