// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <cmath>
#include <limits>

#include "asl/io/binary.hpp"
#include "asl/io/checkpoint.hpp"
#include "asl/io/feature_file.hpp"
#include "asl/io/manifest.hpp"
#include "asl/io/predictions.hpp"
#include "asl/io/report.hpp"
#include "asl/io/run_config.hpp"
#include "asl/io/synth.hpp"
#include "asl/util/random.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace asl;
using namespace asl::io;

namespace {

FeatureMatrix random_matrix(Rng& rng, std::uint32_t rows, std::uint32_t cols) {
    FeatureMatrix m{rows, cols, std::vector<double>(std::size_t{rows} * cols)};
    for (auto& v : m.values) v = rng.normal() * 1e3;
    return m;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

SynthSpec small_spec(Mode mode) {
    SynthSpec s;
    s.mode = mode;
    s.n_videos = 3;
    s.n_val = 1;
    s.frames = 32;
    s.dim = 6;
    s.num_classes = mode == Mode::NLQ ? 3 : 3;
    s.instances_per_video = 2;
    s.min_len = 4;
    s.max_len = 10;
    return s;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("feature file round trip is bit-identical") {
    Rng rng(1);
    TempDir dir;
    for (int i = 0; i < 10; ++i) {
        const auto m = random_matrix(rng, 1 + static_cast<std::uint32_t>(rng.below(50)),
                                     1 + static_cast<std::uint32_t>(rng.below(20)));
        const auto bytes = encode_features(m);
        CHECK(bytes.size() == kFeatureHeaderBytes + 8 * m.values.size());
        CHECK(bytes.substr(0, 4) == "ASLF");
        CHECK(decode_features(bytes) == m);
        save_features(dir / "f.aslf", m);
        CHECK(read_file(dir / "f.aslf") == bytes);
        CHECK(load_features(dir / "f.aslf") == m);
        CHECK(peek_feature_shape(dir / "f.aslf") == std::pair{m.rows, m.cols});
    }
}

TEST_CASE("feature file header is little-endian") {
    const FeatureMatrix m{2, 3, {1, 2, 3, 4, 5, 6}};
    const auto b = encode_features(m);
    CHECK(static_cast<unsigned char>(b[4]) == 1);
    CHECK(static_cast<unsigned char>(b[8]) == 2);
    CHECK(static_cast<unsigned char>(b[12]) == 3);
    // 1.0 is 0x3FF0000000000000.
    CHECK(static_cast<unsigned char>(b[16 + 7]) == 0x3F);
    CHECK(static_cast<unsigned char>(b[16 + 6]) == 0xF0);
}

TEST_CASE("corrupt feature files give structured errors") {
    const FeatureMatrix m{2, 2, {1, 2, 3, 4}};
    auto bytes = encode_features(m);

    const auto truncated = bytes.substr(0, bytes.size() - 5);
    const auto msg = message_of([&] { decode_features(truncated, "x.aslf"); });
    CHECK(msg.find("expected 32") != std::string::npos);
    CHECK(msg.find("got 27") != std::string::npos);
    CHECK(msg.find("x.aslf") != std::string::npos);

    auto v2 = bytes;
    v2[4] = 2;
    try {
        decode_features(v2);
        FAIL("version 2 accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("unsupported") != std::string::npos);
        CHECK(e.offset() == 4);
    }

    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode_features(magic), FormatError);

    auto nan = bytes;
    std::string q;
    put_f64(q, std::numeric_limits<double>::quiet_NaN());
    std::copy(q.begin(), q.end(), nan.begin() + 24);
    try {
        decode_features(nan);
        FAIL("NaN accepted");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 24);
    }

    CHECK_THROWS_AS(decode_features(bytes + "zz"), FormatError);
    CHECK_THROWS_AS(decode_features(bytes.substr(0, 10)), FormatError);
}

TEST_CASE("manifest round trip and validation") {
    TempDir dir;
    synth_generate(small_spec(Mode::MQ), dir.str());
    auto m = load_manifest(dir / "train.json");
    CHECK(m.videos.size() == 3);
    CHECK(m.num_classes == 3);
    CHECK(m.sensitive_positions.size() == 3);
    const auto again = manifest_from_json(manifest_to_json(m), m.base_dir, "again");
    CHECK(manifest_to_json(again) == manifest_to_json(m));

    auto dup = m;
    dup.videos[1].id = dup.videos[0].id;
    CHECK_THROWS_AS(validate_manifest(dup), DataError);

    auto missing = m;
    missing.videos[0].feature_paths[0] = "features/nope.aslf";
    CHECK(message_of([&] { validate_manifest(missing); }).find("missing feature file") != std::string::npos);

    auto dur = m;
    dur.videos[0].duration *= 2.0;
    CHECK_THROWS_AS(validate_manifest(dur), DataError);

    auto label = m;
    label.videos[0].instances[0].label = 7;
    CHECK_THROWS_AS(validate_manifest(label), DataError);

    auto seg = m;
    seg.videos[0].instances[0].segment = {5.0, 5.0};
    CHECK_THROWS_AS(validate_manifest(seg), DataError);

    write_file(dir / "bad.json", "{\"version\": 1, \"mode\": \"mq\"");
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), DataError);
}

TEST_CASE("NLQ manifest validation") {
    TempDir dir;
    synth_generate(small_spec(Mode::NLQ), dir.str());
    auto m = load_manifest(dir / "train.json");
    CHECK(m.mode == Mode::NLQ);
    CHECK(m.num_classes == 1);
    REQUIRE_FALSE(m.videos[0].queries.empty());
    auto gone = m;
    gone.videos[0].queries[0].text_path = "text/none.aslf";
    CHECK_THROWS_AS(validate_manifest(gone), DataError);
    auto classes = m;
    classes.num_classes = 2;
    CHECK_THROWS_AS(validate_manifest(classes), DataError);
}

TEST_CASE("run config") {
    RunConfig c;
    CHECK(c.train.lr == 1e-4);
    CHECK(c.train.warmup_epochs == 5);
    CHECK(c.decode.max_keep == 2000);
    CHECK(c.eval.tious == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});

    const auto text = c.resolved();
    CHECK(RunConfig::parse(text).resolved() == text);

    c.apply_override("train.epochs=7");
    CHECK(c.train.epochs == 7);
    CHECK(c.get("train.epochs") == "7");
    c.apply_override("eval.tious=0.3,0.7");
    CHECK(c.eval.tious == std::vector<double>{0.3, 0.7});

    CHECK(message_of([&] { c.apply_override("train.nope=1"); }).find("unknown key 'train.nope'") != std::string::npos);
    CHECK_THROWS_AS(c.apply_override("train.lr=abc"), DataError);
    CHECK_THROWS_AS(c.apply_override("train.lr=-1"), DataError);
    CHECK_THROWS_AS(c.apply_override("model.heads=3"), DataError);
    CHECK_THROWS_AS(c.apply_override("no_equals"), DataError);
    RunConfig d;
    d.apply_overrides({"synth.T=32", "synth.max_len=10", "synth.min_len=4", "synth.instances_per_video=2"});
    CHECK(d.synth.frames == 32);
    CHECK_THROWS_AS(RunConfig::parse("# comment\nmodel.depth=2\nbogus.key=1\n"), DataError);
    CHECK(RunConfig::parse("# comment\n\nmodel.depth = 3\n").model.depth == 3);

    const auto keys = RunConfig::keys();
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    for (const auto& k : keys) CHECK_NOTHROW(c.set(k, c.get(k)));
}

TEST_CASE("checkpoint round trip") {
    TempDir dir;
    ModelConfig cfg;
    cfg.sources = {{6, 8}};
    cfg.embed_dim = 8;
    cfg.heads = 2;
    cfg.depth = 1;
    cfg.levels = 2;
    cfg.num_classes = 3;
    Model model(cfg, 5);
    model.sensitivity().mu_cls.mutable_data()[1] = 0.2;
    save_checkpoint(dir / "m.aslm", model, 4);
    const auto bytes = read_file(dir / "m.aslm");
    CHECK(bytes.substr(0, 4) == "ASLM");
    const auto ckpt = load_checkpoint(dir / "m.aslm");
    CHECK(ckpt.epoch == 4);
    CHECK(ckpt.config == cfg);
    CHECK(encode_checkpoint(ckpt) == bytes);

    const Model back = instantiate(ckpt);
    CHECK(back.sensitivity().mu_cls[1] == 0.2);
    Rng rng(6);
    FeatureSequence f{"v", 16, 6, std::vector<double>(96), 1.0};
    for (auto& v : f.data) v = rng.uniform(-1, 1);
    CHECK(back.forward(std::span(&f, 1)).dense.cls_logits.values() ==
          model.forward(std::span(&f, 1)).dense.cls_logits.values());

    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
    auto v2 = bytes;
    v2[4] = 2;
    CHECK_THROWS_AS(decode_checkpoint(v2), FormatError);
    CHECK_THROWS_AS(decode_checkpoint("ASLF" + bytes.substr(4)), FormatError);
}

TEST_CASE("prediction file round trip") {
    std::vector<SegmentPrediction> preds{{"vid_a", {0.5, 2.25}, 1, 0.9},
                                         {"vid_b", {10.0, 12.123456789}, 0, 0.123456789}};
    const auto text = encode_predictions(preds);
    CHECK(text.rfind("video_id\tlabel\tstart_s\tend_s\tscore\n", 0) == 0);
    CHECK(text.find("0.123457") != std::string::npos);
    const auto back = decode_predictions(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].video_id == "vid_a");
    CHECK(back[1].segment.end == 12.123457);
    CHECK(encode_predictions(back) == text);
    CHECK_THROWS_AS(decode_predictions("bad header\n"), DataError);
    CHECK_THROWS_AS(decode_predictions("video_id\tlabel\tstart_s\tend_s\tscore\nv\t0\t1\n"), DataError);
    CHECK_THROWS_AS(decode_predictions("video_id\tlabel\tstart_s\tend_s\tscore\nv\t0\t1\t2\tnan\n"), DataError);

    TempDir dir;
    save_predictions(dir / "p.tsv", preds);
    CHECK(read_file(dir / "p.tsv") == text);
    CHECK(load_predictions(dir / "p.tsv").size() == 2);
}

TEST_CASE("report formats") {
    const std::vector<GroundTruth> gts{{"a", {0, 2}, 0}, {"a", {5, 7}, 1}};
    const std::vector<SegmentPrediction> preds{{"a", {0, 2}, 0, 0.9}, {"a", {5, 6}, 1, 0.4}};
    const auto r = evaluate_mq(preds, gts);
    const auto kv = report_kv(r);
    CHECK(kv.find("average_map=") != std::string::npos);
    CHECK(kv.find("map@0.10=") != std::string::npos);
    CHECK(kv.find("recall@1x@0.50=") != std::string::npos);
    CHECK(report_text(r).find("average") != std::string::npos);
    CHECK(pr_dump(preds, gts, {0.5}).find("0.5") != std::string::npos);
}

}  // TEST_SUITE
