// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <cmath>

#include "asl/autodiff/ops.hpp"
#include "asl/io/checkpoint.hpp"
#include "asl/pipeline.hpp"
#include "doctest.h"

using namespace asl;

namespace {

io::SynthSpec tiny_spec(Mode mode) {
    io::SynthSpec s;
    s.mode = mode;
    s.n_videos = 6;
    s.n_val = 2;
    s.frames = 32;
    s.dim = 8;
    s.num_classes = 3;
    s.instances_per_video = 2;
    s.min_len = 4;
    s.max_len = 12;
    return s;
}

io::RunConfig tiny_run() {
    io::RunConfig rc;
    rc.model.embed_dim = 8;
    rc.model.heads = 2;
    rc.model.depth = 1;
    rc.model.levels = 3;
    rc.train.epochs = 2;
    rc.train.warmup_epochs = 1;
    rc.train.batch = 2;
    rc.train.lr = 1e-3;
    return rc;
}

/// Classification and localization losses with no sensitivity weights,
/// assembled directly from per-item forwards.
std::pair<double, double> unweighted(const Model& model, const Dataset& data, const std::vector<std::size_t>& items,
                                     const LossConfig& loss) {
    std::vector<ad::Array> cls, off;
    std::vector<PointTargets> parts;
    std::vector<std::size_t> counts;
    for (std::size_t item : items) {
        const bool nlq = data.mode == Mode::NLQ;
        const auto& video = nlq ? data.videos[data.queries[item].video] : data.videos[item];
        VideoAnnotation ann = video.annotation;
        if (nlq) ann.instances = {{data.queries[item].segment, 0}};
        const auto fr = model.forward(video.sources, nlq ? &data.queries[item].text : nullptr);
        parts.push_back(assign_labels(fr.points, ann));
        counts.push_back(ann.instances.size());
        cls.push_back(fr.dense.cls_logits);
        off.push_back(fr.dense.offsets);
    }
    const DenseOutput dense{ad::concat(cls, 0), ad::concat(off, 0)};
    const auto targets = concat_targets(parts, counts);
    return {weighted_cls_loss(dense, targets, ad::Array(), loss).value.item(),
            weighted_loc_loss(dense, targets, ad::Array()).value.item()};
}

Dataset split(const io::SynthSpec& s, bool val) {
    const auto ds = io::synth_build(s);
    return dataset_from_synth(s, val ? ds.val : ds.train, ds.sensitive_positions);
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("spearman") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(0.9486832980505138));
}

TEST_CASE("flat Gaussians reproduce the unweighted losses") {
    for (Mode mode : {Mode::MQ, Mode::NLQ}) {
        const auto s = tiny_spec(mode);
        const Dataset data = split(s, false);
        const auto rc = tiny_run();
        Model model(rc.model_config(mode, data.source_dims(), data.num_classes, data.text_dim()), 3);
        model.sensitivity().freeze_flat();
        const std::size_t n = mode == Mode::NLQ ? data.queries.size() : data.videos.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::vector<std::size_t> items{i, i + 1};
            const auto bl = batch_loss(model, data, items, rc.loss);
            const auto plain = unweighted(model, data, items, rc.loss);
            CHECK(std::abs(bl.cls.value.item() - plain.first) <= 1e-6);
            CHECK(std::abs(bl.loc.value.item() - plain.second) <= 1e-6);
            REQUIRE(bl.h_cls.size() > 0);
            for (double h : bl.h_cls.values()) CHECK(std::abs(h - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("training, prediction and evaluation are deterministic") {
    const auto s = tiny_spec(Mode::MQ);
    const Dataset train_set = split(s, false);
    const auto rc = tiny_run();
    const auto cfg = rc.model_config(Mode::MQ, train_set.source_dims(), train_set.num_classes);
    std::vector<std::string> logs;
    const auto cb = [&](const EpochStats& st, const Model&) { logs.push_back(std::to_string(st.loss)); };
    const Model a = train(train_set, cfg, rc.loss, rc.train, cb);
    const Model b = train(train_set, cfg, rc.loss, rc.train);
    CHECK(logs.size() == 2);
    CHECK(io::encode_checkpoint(io::snapshot(a, 2)) == io::encode_checkpoint(io::snapshot(b, 2)));

    const auto pa = predict_mq({&a}, train_set, rc.decode, 1);
    const auto pb = predict_mq({&b}, train_set, rc.decode, 3);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].video_id == pb[i].video_id);
        CHECK(pa[i].score == pb[i].score);
        CHECK(pa[i].segment.start == pb[i].segment.start);
    }
    const auto ra = evaluate_mq(pa, train_set, rc.eval), rb = evaluate_mq(pb, train_set, rc.eval);
    CHECK(ra.average_map == rb.average_map);

    const auto same = predict_mq({&a, &b, &a}, train_set, rc.decode, 2);
    CHECK(evaluate_mq(same, train_set, rc.eval).average_map == ra.average_map);
}

TEST_CASE("ASL-off training keeps the Gaussians flat") {
    const auto s = tiny_spec(Mode::MQ);
    const Dataset data = split(s, false);
    auto rc = tiny_run();
    rc.train.asl = false;
    const Model m = train(data, rc.model_config(Mode::MQ, data.source_dims(), data.num_classes), rc.loss, rc.train);
    for (double v : m.sensitivity().sigma_cls.values()) CHECK(v == kSigmaMax);
    for (double v : m.sensitivity().mu_loc.values()) CHECK(v == 0.5);
}

TEST_CASE("NLQ predictions stay within the top-k cap") {
    const auto s = tiny_spec(Mode::NLQ);
    const Dataset data = split(s, false);
    const auto rc = tiny_run();
    const Model m(rc.model_config(Mode::NLQ, data.source_dims(), 1, data.text_dim()), 4);
    const auto preds = predict_nlq(m, data, rc.decode, 2);
    std::map<std::string, std::size_t> per;
    for (const auto& p : preds) ++per[p.video_id];
    CHECK(per.size() == data.queries.size());
    for (const auto& [q, n] : per) CHECK(n <= 5);
    const auto report = evaluate_nlq(preds, data, rc.eval);
    CHECK(report.r_at_k.size() == 4);

    const auto merged = merge_nlq({preds, preds}, 5);
    std::map<std::string, std::size_t> merged_per;
    for (const auto& p : merged) ++merged_per[p.video_id];
    for (const auto& [q, n] : merged_per) CHECK(n <= 5);
}

TEST_CASE("mismatched ensemble members are rejected") {
    const auto s = tiny_spec(Mode::MQ);
    const Dataset data = split(s, false);
    auto rc = tiny_run();
    const Model a(rc.model_config(Mode::MQ, data.source_dims(), data.num_classes), 1);
    rc.model.levels = 2;
    const Model b(rc.model_config(Mode::MQ, data.source_dims(), data.num_classes), 1);
    CHECK_THROWS(predict_mq({&a, &b}, data, rc.decode, 1));
}

}  // TEST_SUITE
