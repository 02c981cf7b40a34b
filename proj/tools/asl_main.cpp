// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point: synth, train-mq, train-nlq, predict, eval-mq,
// eval-nlq, ensemble, gradcheck.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asl/gradcheck_suite.hpp"
#include "asl/io/binary.hpp"
#include "asl/io/checkpoint.hpp"
#include "asl/io/predictions.hpp"
#include "asl/io/report.hpp"
#include "asl/io/run_config.hpp"
#include "asl/io/synth.hpp"
#include "asl/pipeline.hpp"

namespace fs = std::filesystem;
using namespace asl;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::string out = ".";
    std::size_t threads = 1;
    std::optional<std::uint64_t> seed;
    std::string manifest;
    std::vector<std::string> checkpoints;
    std::vector<std::string> predictions;
    std::size_t cases = 20;
};

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "key=value configuration file");
    sub->add_option("--set", o.sets, "override KEY=VALUE (repeatable)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--threads", o.threads, "worker threads for inference and evaluation")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "seed for training and generation");
}

io::RunConfig resolve_config(const Options& o) {
    io::RunConfig c;
    try {
        if (!o.config.empty()) c = io::RunConfig::load(o.config);
        auto sets = o.sets;
        if (o.seed) {
            sets.push_back("train.seed=" + std::to_string(*o.seed));
            sets.push_back("synth.seed=" + std::to_string(*o.seed));
        }
        c.apply_overrides(sets);
    } catch (const io::DataError& e) {
        throw UsageError(e.what());
    }
    return c;
}

void prepare_out(const Options& o, const io::RunConfig& c) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw io::DataError("cannot create " + o.out + ": " + ec.message());
    io::write_file((fs::path(o.out) / "config.resolved").string(), c.resolved());
}

std::string out_path(const Options& o, const std::string& name) { return (fs::path(o.out) / name).string(); }

std::string pick_manifest(const Options& o, const std::string& fallback, const char* key) {
    const std::string m = o.manifest.empty() ? fallback : o.manifest;
    if (m.empty()) throw UsageError(std::string("no dataset: pass --manifest or set ") + key);
    return m;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", v[i]);
        s += (i ? "," : "") + std::string(buf);
    }
    return s;
}

void write_report(const Options& o, const std::string& stem, const EvalReport& r) {
    io::write_file(out_path(o, stem + ".txt"), io::report_text(r));
    io::write_file(out_path(o, stem + ".kv"), io::report_kv(r));
    std::cout << io::report_text(r);
}

int cmd_synth(const Options& o) {
    const auto c = resolve_config(o);
    prepare_out(o, c);
    const auto ds = io::synth_generate(c.synth, o.out);
    std::cout << "wrote " << ds.train.size() << " train and " << ds.val.size() << " val videos to " << o.out << "\n";
    return kOk;
}

int cmd_train(const Options& o, Mode mode) {
    const auto c = resolve_config(o);
    const auto data = load_dataset(pick_manifest(o, c.data.train, "data.train"));
    if (data.mode != mode) throw UsageError("manifest mode is " + to_string(data.mode) + ", command expects " + to_string(mode));
    prepare_out(o, c);
    const auto mc = c.model_config(mode, data.source_dims(), data.num_classes, data.text_dim());

    std::string log = "epoch\tloss\tcls\tloc\tnce\tlr\th_cls_mean\th_cls_std\th_loc_mean\th_loc_std\tdegenerate_batches"
                      "\tmu_cls\tsigma_cls\tmu_loc\tsigma_loc\n";
    const auto model = train(data, mc, c.loss, c.train, [&](const EpochStats& s, const Model&) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%zu\t", s.epoch, s.loss,
                      s.cls, s.loc, s.nce, s.lr, s.h_cls_mean, s.h_cls_std, s.h_loc_mean, s.h_loc_std,
                      s.degenerate_batches);
        log += buf + join(s.mu_cls) + "\t" + join(s.sigma_cls) + "\t" + join(s.mu_loc) + "\t" + join(s.sigma_loc) + "\n";
        std::cout << "epoch " << s.epoch << " loss " << s.loss << "\n";
        io::write_file(out_path(o, "train_log.tsv"), log);
    });
    io::save_checkpoint(out_path(o, "checkpoint.aslm"), model, static_cast<std::uint32_t>(c.train.epochs));

    if (!c.data.val.empty()) {
        const auto val = load_dataset(c.data.val);
        if (mode == Mode::MQ) {
            const auto preds = predict_mq({&model}, val, c.decode, o.threads);
            io::save_predictions(out_path(o, "val_predictions.tsv"), preds);
            write_report(o, "val_report", evaluate_mq(preds, val, c.eval));
        } else {
            const auto preds = predict_nlq(model, val, c.decode, o.threads);
            io::save_predictions(out_path(o, "val_predictions.tsv"), preds);
            write_report(o, "val_report", evaluate_nlq(preds, val, c.eval));
        }
    }
    return kOk;
}

int cmd_predict(const Options& o) {
    const auto c = resolve_config(o);
    if (o.checkpoints.size() != 1) throw UsageError("predict takes exactly one --checkpoint");
    const auto model = io::instantiate(io::load_checkpoint(o.checkpoints.front()));
    const auto data = load_dataset(pick_manifest(o, c.data.val, "data.val"));
    if (data.mode != model.config().mode) throw UsageError("checkpoint and manifest modes differ");
    prepare_out(o, c);
    const auto preds = data.mode == Mode::MQ ? predict_mq({&model}, data, c.decode, o.threads)
                                             : predict_nlq(model, data, c.decode, o.threads);
    io::save_predictions(out_path(o, "predictions.tsv"), preds);
    std::cout << "wrote " << preds.size() << " predictions\n";
    return kOk;
}

int cmd_eval(const Options& o, Mode mode) {
    const auto c = resolve_config(o);
    if (o.predictions.size() != 1) throw UsageError("eval takes exactly one --predictions file");
    const auto data = load_dataset(pick_manifest(o, c.data.val, "data.val"));
    if (data.mode != mode) throw UsageError("manifest mode is " + to_string(data.mode));
    const auto preds = io::load_predictions(o.predictions.front());
    prepare_out(o, c);
    if (mode == Mode::MQ) {
        write_report(o, "report", evaluate_mq(preds, data, c.eval));
        io::write_file(out_path(o, "pr_curves.tsv"), io::pr_dump(preds, data.ground_truth(), c.eval.tious));
    } else {
        write_report(o, "report", evaluate_nlq(preds, data, c.eval));
    }
    return kOk;
}

int cmd_ensemble(const Options& o) {
    const auto c = resolve_config(o);
    if (o.checkpoints.empty() == o.predictions.empty()) {
        throw UsageError("ensemble takes either --checkpoint (MQ, mean logits) or --predictions (NLQ, top-k merge)");
    }
    if (!o.checkpoints.empty()) {
        std::vector<Model> models;
        for (const auto& p : o.checkpoints) models.push_back(io::instantiate(io::load_checkpoint(p)));
        for (const auto& m : models) {
            if (m.config().mode != Mode::MQ) throw UsageError("checkpoint ensembles are MQ only");
            if (!(m.config() == models.front().config())) {
                throw UsageError("ensemble checkpoints must share one model config");
            }
        }
        std::vector<const Model*> ptrs;
        for (const auto& m : models) ptrs.push_back(&m);
        const auto data = load_dataset(pick_manifest(o, c.data.val, "data.val"));
        if (data.mode != Mode::MQ) throw UsageError("checkpoint ensembles need an MQ manifest");
        prepare_out(o, c);
        const auto preds = predict_mq(ptrs, data, c.decode, o.threads);
        io::save_predictions(out_path(o, "predictions.tsv"), preds);
        write_report(o, "report", evaluate_mq(preds, data, c.eval));
        return kOk;
    }
    std::vector<std::vector<SegmentPrediction>> lists;
    for (const auto& p : o.predictions) lists.push_back(io::load_predictions(p));
    prepare_out(o, c);
    const auto merged = merge_nlq(lists, c.decode.nlq_topk);
    io::save_predictions(out_path(o, "predictions.tsv"), merged);
    const std::string manifest = o.manifest.empty() ? c.data.val : o.manifest;
    if (!manifest.empty()) write_report(o, "report", evaluate_nlq(merged, load_dataset(manifest), c.eval));
    return kOk;
}

int cmd_gradcheck(const Options& o) {
    const auto c = resolve_config(o);
    prepare_out(o, c);
    std::string text;
    double worst_primitive = 0.0, worst_e2e = 0.0;
    char buf[256];
    for (const auto& e : primitive_gradcheck_suite(c.train.seed, o.cases)) {
        worst_primitive = std::max(worst_primitive, e.worst.max_rel_error);
        std::snprintf(buf, sizeof buf, "%-22s cases=%zu entries=%zu max_rel_error=%.3e at %s\n", e.name.c_str(), e.cases,
                      e.worst.checked, e.worst.max_rel_error, e.worst.worst.c_str());
        text += buf;
    }
    for (Mode m : {Mode::MQ, Mode::NLQ}) {
        const auto e = end_to_end_gradcheck(m, c.train.seed, 64);
        worst_e2e = std::max(worst_e2e, e.worst.max_rel_error);
        std::snprintf(buf, sizeof buf, "%-22s entries=%zu max_rel_error=%.3e at %s\n", e.name.c_str(), e.worst.checked,
                      e.worst.max_rel_error, e.worst.worst.c_str());
        text += buf;
    }
    std::snprintf(buf, sizeof buf, "worst primitive %.3e (limit 1e-6), worst end-to-end %.3e (limit 1e-5)\n",
                  worst_primitive, worst_e2e);
    text += buf;
    io::write_file(out_path(o, "gradcheck.txt"), text);
    std::cout << text;
    return worst_primitive < 1e-6 && worst_e2e < 1e-5 ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Action sensitivity learning toolkit for temporal action localization"};
    app.require_subcommand(1);
    Options o;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    auto* train_mq = app.add_subcommand("train-mq", "train a moment-query model");
    auto* train_nlq = app.add_subcommand("train-nlq", "train a natural-language-query model");
    auto* predict = app.add_subcommand("predict", "write predictions for a dataset");
    auto* eval_mq = app.add_subcommand("eval-mq", "evaluate MQ predictions (mAP, Recall@kx)");
    auto* eval_nlq = app.add_subcommand("eval-nlq", "evaluate NLQ predictions (R@k)");
    auto* ensemble = app.add_subcommand("ensemble", "combine checkpoints (MQ) or prediction files (NLQ)");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    for (auto* s : {synth, train_mq, train_nlq, predict, eval_mq, eval_nlq, ensemble, gradcheck}) add_common(s, o);
    for (auto* s : {train_mq, train_nlq, predict, eval_mq, eval_nlq, ensemble}) {
        s->add_option("--manifest", o.manifest, "dataset manifest (defaults to data.train / data.val)");
    }
    predict->add_option("--checkpoint", o.checkpoints, "model checkpoint")->required();
    ensemble->add_option("--checkpoint", o.checkpoints, "MQ checkpoint (repeatable)");
    for (auto* s : {eval_mq, eval_nlq}) s->add_option("--predictions", o.predictions, "prediction file")->required();
    ensemble->add_option("--predictions", o.predictions, "NLQ prediction file (repeatable)");
    gradcheck->add_option("--cases", o.cases, "random shapes per primitive")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(o);
        if (train_mq->parsed()) return cmd_train(o, Mode::MQ);
        if (train_nlq->parsed()) return cmd_train(o, Mode::NLQ);
        if (predict->parsed()) return cmd_predict(o);
        if (eval_mq->parsed()) return cmd_eval(o, Mode::MQ);
        if (eval_nlq->parsed()) return cmd_eval(o, Mode::NLQ);
        if (ensemble->parsed()) return cmd_ensemble(o);
        if (gradcheck->parsed()) return cmd_gradcheck(o);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ad::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
