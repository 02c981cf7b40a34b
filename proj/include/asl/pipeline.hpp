// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "asl/io/manifest.hpp"
#include "asl/io/run_config.hpp"
#include "asl/io/synth.hpp"
#include "asl/losses.hpp"
#include "asl/metrics.hpp"
#include "asl/network/model.hpp"
#include "asl/postprocess.hpp"

namespace asl {

struct VideoSample {
    std::string id;
    double duration = 0.0;
    std::vector<FeatureSequence> sources;
    VideoAnnotation annotation;  // MQ instances; empty for NLQ
};

struct QuerySample {
    std::string id;
    std::size_t video = 0;  // index into Dataset::videos
    TimeSegment segment;
    ad::Array text;  // [N_t, text_dim]
};

/// Features and labels in memory.
struct Dataset {
    Mode mode = Mode::MQ;
    std::size_t num_classes = 1;
    std::vector<VideoSample> videos;
    std::vector<QuerySample> queries;
    std::vector<double> sensitive_positions;

    std::vector<std::size_t> source_dims() const;
    std::size_t text_dim() const;
    std::vector<GroundTruth> ground_truth() const;        // MQ
    std::map<std::string, TimeSegment> query_truth() const;  // NLQ
};

/// Loads and validates a manifest, then reads every referenced file.
Dataset load_dataset(const std::string& manifest_path);
Dataset dataset_from_synth(const io::SynthSpec& spec, const std::vector<io::SynthVideo>& videos,
                           const std::vector<double>& sensitive_positions);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
    double cls = 0.0;
    double loc = 0.0;
    double nce = 0.0;
    double lr = 0.0;
    double h_cls_mean = 0.0, h_cls_std = 0.0;
    double h_loc_mean = 0.0, h_loc_std = 0.0;
    std::size_t degenerate_batches = 0;
    std::vector<double> mu_cls, sigma_cls, mu_loc, sigma_loc;
};

using EpochCallback = std::function<void(const EpochStats&, const Model&)>;

/// Loss of one mini-batch recorded on the active tape.
struct BatchLoss {
    ad::Array total;
    LossTerm cls, loc;
    std::optional<LossTerm> nce;
    ad::Array h_cls, h_loc;
};

/// MQ: indices into videos. NLQ: indices into queries.
BatchLoss batch_loss(const Model& model, const Dataset& data, std::span<const std::size_t> items,
                     const LossConfig& loss);

/// Adam with warm-up + cosine schedule, sensitivity projection after every
/// step, reshuffled batches per epoch from train.seed. train.asl = false
/// pins the Gaussians flat. Throws ad::NumericalError on a non-finite loss.
Model train(const Dataset& data, const ModelConfig& config, const LossConfig& loss, const io::TrainSettings& train,
            const EpochCallback& on_epoch = {});

/// Mean-logit ensemble output (one model = that model's output).
DenseOutput ensemble_dense(const std::vector<const Model*>& models, const VideoSample& video,
                           const ad::Array* text, std::vector<PyramidPoint>* points);

/// MQ predictions for every video: mean-logit ensemble, decode, per-class
/// SoftNMS capped at decode.max_keep. Videos run on up to `threads` workers;
/// output order is fixed.
std::vector<SegmentPrediction> predict_mq(const std::vector<const Model*>& models, const Dataset& data,
                                          const DecodeConfig& decode, std::size_t threads = 1);

/// NLQ top-k per query (video_id field holds the query id): decode,
/// global SoftNMS, keep decode.nlq_topk.
std::vector<SegmentPrediction> predict_nlq(const Model& model, const Dataset& data, const DecodeConfig& decode,
                                           std::size_t threads = 1);

/// Per-model NLQ lists merged by raw score, top k_out per query.
std::vector<SegmentPrediction> merge_nlq(const std::vector<std::vector<SegmentPrediction>>& per_model,
                                         std::size_t k_out);

EvalReport evaluate_mq(const std::vector<SegmentPrediction>& preds, const Dataset& data,
                       const io::EvalSettings& eval);
EvalReport evaluate_nlq(const std::vector<SegmentPrediction>& preds, const Dataset& data,
                        const io::EvalSettings& eval);

/// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace asl
