// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "asl/autodiff/ops.hpp"
#include "asl/autodiff/optim.hpp"
#include "asl/io/binary.hpp"
#include "asl/io/feature_file.hpp"
#include "asl/sensitivity.hpp"
#include "asl/util/random.hpp"

namespace asl {

std::vector<std::size_t> Dataset::source_dims() const {
    std::vector<std::size_t> dims;
    if (!videos.empty()) {
        for (const auto& s : videos.front().sources) dims.push_back(s.channels);
    }
    return dims;
}

std::size_t Dataset::text_dim() const { return queries.empty() ? 0 : queries.front().text.dim(1); }

std::vector<GroundTruth> Dataset::ground_truth() const {
    std::vector<GroundTruth> out;
    for (const auto& v : videos) {
        for (const auto& a : v.annotation.instances) out.push_back({v.id, a.segment, a.label});
    }
    return out;
}

std::map<std::string, TimeSegment> Dataset::query_truth() const {
    std::map<std::string, TimeSegment> out;
    for (const auto& q : queries) out[q.id] = q.segment;
    return out;
}

namespace {

FeatureSequence to_sequence(const std::string& id, const io::FeatureMatrix& m, double stride) {
    return {id, m.rows, m.cols, m.values, stride};
}

ad::Array to_array(const io::FeatureMatrix& m) { return ad::Array({m.rows, m.cols}, m.values); }

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
    const auto m = io::load_manifest(manifest_path);
    Dataset d;
    d.mode = m.mode;
    d.num_classes = m.num_classes;
    d.sensitive_positions = m.sensitive_positions;
    for (const auto& rec : m.videos) {
        VideoSample v;
        v.id = rec.id;
        v.duration = rec.duration;
        for (const auto& p : rec.feature_paths) {
            v.sources.push_back(to_sequence(rec.id, io::load_features(m.resolve(p)), rec.stride_seconds));
        }
        v.annotation = {rec.id, rec.duration, rec.instances};
        for (const auto& q : rec.queries) {
            d.queries.push_back({q.id, d.videos.size(), q.segment, to_array(io::load_features(m.resolve(q.text_path)))});
        }
        d.videos.push_back(std::move(v));
    }
    return d;
}

Dataset dataset_from_synth(const io::SynthSpec& spec, const std::vector<io::SynthVideo>& videos,
                           const std::vector<double>& sensitive_positions) {
    Dataset d;
    d.mode = spec.mode;
    d.num_classes = spec.mode == Mode::NLQ ? 1 : spec.num_classes;
    d.sensitive_positions = sensitive_positions;
    for (const auto& sv : videos) {
        VideoSample v;
        v.id = sv.id;
        v.duration = sv.duration;
        for (const auto& m : sv.sources) v.sources.push_back(to_sequence(sv.id, m, spec.stride_seconds));
        v.annotation = {sv.id, sv.duration, sv.instances};
        for (std::size_t q = 0; q < sv.queries.size(); ++q) {
            d.queries.push_back({sv.queries[q].id, d.videos.size(), sv.queries[q].segment, to_array(sv.query_text[q])});
        }
        d.videos.push_back(std::move(v));
    }
    return d;
}

BatchLoss batch_loss(const Model& model, const Dataset& data, std::span<const std::size_t> items,
                     const LossConfig& loss) {
    const bool nlq = data.mode == Mode::NLQ;
    std::vector<ad::Array> cls_parts, off_parts;
    std::vector<PointTargets> target_parts;
    std::vector<std::size_t> instance_counts;
    std::vector<PositiveSample> samples;
    std::vector<ad::Array> nce_terms;
    std::size_t instance_base = 0;
    bool nce_seen = false;

    for (std::size_t item : items) {
        const VideoSample& video = nlq ? data.videos.at(data.queries.at(item).video) : data.videos.at(item);
        VideoAnnotation annotation = video.annotation;
        const ad::Array* text = nullptr;
        if (nlq) {
            const auto& q = data.queries[item];
            annotation.instances = {{q.segment, 0}};
            text = &q.text;
        }
        const auto fr = model.forward(video.sources, text);
        auto targets = assign_labels(fr.points, annotation);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            if (!targets.in_mask[i]) continue;
            const auto inst = *targets.matched[i];
            const auto& a = annotation.instances[inst];
            samples.push_back({instance_base + inst, static_cast<std::size_t>(a.label),
                               normalized_position(fr.points[i], a)});
        }
        instance_base += annotation.instances.size();
        instance_counts.push_back(annotation.instances.size());
        cls_parts.push_back(fr.dense.cls_logits);
        off_parts.push_back(fr.dense.offsets);
        target_parts.push_back(std::move(targets));

        if (nlq) {
            nce_seen = true;
            const auto& seg = data.queries[item].segment;
            const auto& seq = video.sources.front();
            std::vector<std::uint8_t> positive(seq.frames, 0);
            for (std::size_t t = 0; t < seq.frames; ++t) {
                const double c = step_time(t, seq.stride_seconds);
                positive[t] = c >= seg.start && c <= seg.end;
            }
            auto term = info_nce(fr.frame_features, fr.query, positive, loss.nce_temperature);
            if (!term.degenerate) nce_terms.push_back(term.value);
        }
    }

    BatchLoss out;
    const DenseOutput dense{ad::concat(cls_parts, 0), ad::concat(off_parts, 0)};
    const auto targets = concat_targets(target_parts, instance_counts);
    const auto& sens = model.sensitivity();
    if (!samples.empty()) {
        out.h_cls = sensitivity_weights(sens.mu_cls, sens.sigma_cls, samples, instance_base);
        out.h_loc = sensitivity_weights(sens.mu_loc, sens.sigma_loc, samples, instance_base);
    }
    out.cls = weighted_cls_loss(dense, targets, out.h_cls, loss);
    out.loc = weighted_loc_loss(dense, targets, out.h_loc);
    out.total = ad::add(out.cls.value, ad::scale(out.loc.value, loss.lambda_loc));
    if (nce_seen) {
        LossTerm nce;
        if (nce_terms.empty()) {
            nce = {ad::Array::scalar(0.0), 0, true};
        } else {
            ad::Array acc = nce_terms.front();
            for (std::size_t i = 1; i < nce_terms.size(); ++i) acc = ad::add(acc, nce_terms[i]);
            nce = {ad::scale(acc, 1.0 / static_cast<double>(nce_terms.size())), nce_terms.size(), false};
        }
        out.total = ad::add(out.total, ad::scale(nce.value, loss.lambda_nce));
        out.nce = nce;
    }
    return out;
}

namespace {

void accumulate_stats(const ad::Array& h, double& sum, double& sum_sq, std::size_t& n) {
    for (double v : h.data()) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
}

std::pair<double, double> mean_std(double sum, double sum_sq, std::size_t n) {
    if (n == 0) return {0.0, 0.0};
    const double mean = sum / static_cast<double>(n);
    return {mean, std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean))};
}

}  // namespace

Model train(const Dataset& data, const ModelConfig& config, const LossConfig& loss, const io::TrainSettings& train,
            const EpochCallback& on_epoch) {
    loss.validate();
    Model model(config, train.seed);
    auto& sens = model.sensitivity();
    if (train.asl) {
        for (auto* a : {&sens.mu_cls, &sens.mu_loc}) std::ranges::fill(a->mutable_data(), train.mu_init);
        for (auto* a : {&sens.sigma_cls, &sens.sigma_loc}) std::ranges::fill(a->mutable_data(), train.sigma_init);
        sens.project();
    } else {
        sens.freeze_flat();
    }
    auto& params = model.params();
    for (auto& p : params) {
        if (p.name.rfind("sensitivity.", 0) == 0) p.lr_scale = train.sensitivity_lr_mult;
    }

    const std::size_t n_items = data.mode == Mode::NLQ ? data.queries.size() : data.videos.size();
    if (n_items == 0) throw io::DataError("train: empty dataset");
    const std::size_t per_epoch = (n_items + train.batch - 1) / train.batch;
    ad::Adam adam({train.lr, 0.9, 0.999, 1e-8, train.weight_decay});
    const ad::WarmupCosineSchedule schedule(per_epoch * train.epochs, per_epoch * train.warmup_epochs);
    Rng rng(train.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
        for (std::size_t i = n_items; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        EpochStats stats;
        stats.epoch = epoch;
        double hc_sum = 0, hc_sq = 0, hl_sum = 0, hl_sq = 0;
        std::size_t hc_n = 0, hl_n = 0;
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const std::size_t begin = b * train.batch;
            const std::size_t end = std::min(n_items, begin + train.batch);
            ad::zero_grad(params);
            ad::Tape tape;
            ad::Tape::Scope scope(tape);
            const auto bl = batch_loss(model, data, std::span(order).subspan(begin, end - begin), loss);
            const double value = bl.total.item();
            if (!std::isfinite(value)) {
                throw ad::NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            tape.backward(bl.total);
            const double mult = schedule.multiplier(++step);
            adam.step(params, mult);
            sens.project();
            stats.loss += value;
            stats.cls += bl.cls.value.item();
            stats.loc += bl.loc.value.item();
            if (bl.nce) stats.nce += bl.nce->value.item();
            stats.degenerate_batches += bl.cls.degenerate || bl.loc.degenerate || (bl.nce && bl.nce->degenerate);
            stats.lr = train.lr * mult;
            accumulate_stats(bl.h_cls, hc_sum, hc_sq, hc_n);
            accumulate_stats(bl.h_loc, hl_sum, hl_sq, hl_n);
        }
        const double nb = static_cast<double>(per_epoch);
        stats.loss /= nb;
        stats.cls /= nb;
        stats.loc /= nb;
        stats.nce /= nb;
        std::tie(stats.h_cls_mean, stats.h_cls_std) = mean_std(hc_sum, hc_sq, hc_n);
        std::tie(stats.h_loc_mean, stats.h_loc_std) = mean_std(hl_sum, hl_sq, hl_n);
        stats.mu_cls = sens.mu_cls.values();
        stats.sigma_cls = sens.sigma_cls.values();
        stats.mu_loc = sens.mu_loc.values();
        stats.sigma_loc = sens.sigma_loc.values();
        if (on_epoch) on_epoch(stats, model);
    }
    return model;
}

DenseOutput ensemble_dense(const std::vector<const Model*>& models, const VideoSample& video, const ad::Array* text,
                           std::vector<PyramidPoint>* points) {
    if (models.empty()) throw InvalidInput("ensemble_dense: no models");
    std::vector<DenseOutput> outs;
    for (std::size_t i = 0; i < models.size(); ++i) {
        auto fr = models[i]->forward(video.sources, text);
        if (i == 0 && points) *points = std::move(fr.points);
        outs.push_back(std::move(fr.dense));
    }
    return outs.size() == 1 ? outs.front() : ensemble_mean_logits(outs);
}

namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers, rethrowing the
/// first failure.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<SegmentPrediction> predict_mq(const std::vector<const Model*>& models, const Dataset& data,
                                          const DecodeConfig& decode, std::size_t threads) {
    decode.validate();
    for (const auto* m : models) {
        if (!(m->config() == models.front()->config())) {
            throw InvalidInput("predict_mq: ensemble members must share one model config");
        }
    }
    std::vector<std::vector<SegmentPrediction>> per_video(data.videos.size());
    parallel_for(data.videos.size(), threads, [&](std::size_t i) {
        const auto& v = data.videos[i];
        std::vector<PyramidPoint> points;
        const auto dense = ensemble_dense(models, v, nullptr, &points);
        auto raw = decode_dense(v.id, points, dense, v.duration, decode.score_floor, decode.pre_nms_topk);
        per_video[i] = soft_nms(std::move(raw), decode.nms_sigma, decode.min_score, decode.max_keep, true);
    });
    std::vector<SegmentPrediction> out;
    for (auto& p : per_video) out.insert(out.end(), p.begin(), p.end());
    return out;
}

std::vector<SegmentPrediction> predict_nlq(const Model& model, const Dataset& data, const DecodeConfig& decode,
                                           std::size_t threads) {
    decode.validate();
    std::vector<std::vector<SegmentPrediction>> per_query(data.queries.size());
    parallel_for(data.queries.size(), threads, [&](std::size_t i) {
        const auto& q = data.queries[i];
        const auto& v = data.videos.at(q.video);
        const auto fr = model.forward(v.sources, &q.text);
        auto raw = decode_dense(q.id, fr.points, fr.dense, v.duration, decode.score_floor, decode.pre_nms_topk);
        per_query[i] = soft_nms(std::move(raw), decode.nms_sigma, decode.min_score, decode.nlq_topk, false);
    });
    std::vector<SegmentPrediction> out;
    for (auto& p : per_query) out.insert(out.end(), p.begin(), p.end());
    return out;
}

std::vector<SegmentPrediction> merge_nlq(const std::vector<std::vector<SegmentPrediction>>& per_model,
                                         std::size_t k_out) {
    std::map<std::string, std::vector<std::vector<SegmentPrediction>>> by_query;
    for (std::size_t m = 0; m < per_model.size(); ++m) {
        for (const auto& p : per_model[m]) {
            auto& lists = by_query[p.video_id];
            lists.resize(per_model.size());
            lists[m].push_back(p);
        }
    }
    std::vector<SegmentPrediction> out;
    for (auto& [query, lists] : by_query) {
        for (auto& l : lists) std::stable_sort(l.begin(), l.end(), score_order);
        const auto merged = ensemble_topk_merge(lists, k_out);
        out.insert(out.end(), merged.begin(), merged.end());
    }
    return out;
}

EvalReport evaluate_mq(const std::vector<SegmentPrediction>& preds, const Dataset& data,
                       const io::EvalSettings& eval) {
    return evaluate_mq(preds, data.ground_truth(), eval.tious, eval.recall_k, eval.recall_tiou);
}

EvalReport evaluate_nlq(const std::vector<SegmentPrediction>& preds, const Dataset& data,
                        const io::EvalSettings& eval) {
    std::map<std::string, std::vector<SegmentPrediction>> by_query;
    for (const auto& p : preds) by_query[p.video_id].push_back(p);
    return evaluate_nlq(by_query, data.query_truth(), eval.nlq_ks, eval.nlq_tious);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw InvalidInput("spearman: need two equal-length samples (n >= 2)");
    const auto ranks = [](const std::vector<double>& x) {
        std::vector<std::size_t> idx(x.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return x[i] < x[j]; });
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

}  // namespace asl
