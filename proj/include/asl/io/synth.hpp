// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asl/core.hpp"
#include "asl/io/feature_file.hpp"
#include "asl/io/manifest.hpp"
#include "asl/network/model.hpp"

namespace asl::io {

struct SynthSpec {
    std::uint64_t seed = 1;
    Mode mode = Mode::MQ;
    std::size_t n_videos = 200;  // training split
    std::size_t n_val = 50;
    std::size_t frames = 256;    // T
    std::size_t dim = 32;        // D per source
    std::size_t num_classes = 5; // C (NLQ: number of query concepts)
    std::size_t instances_per_video = 3;
    std::size_t sources = 1;
    std::size_t min_len = 8;     // instance length in steps
    std::size_t max_len = 48;
    std::size_t signature_rank = 4;
    std::size_t text_tokens = 6;
    std::size_t text_dim = 16;
    double noise = 0.6;
    double stride_seconds = 1.0;
    double sensitive_width = 0.12;  // Gaussian width of the strong region, instance-relative
    double signature_floor = 0.15;  // signature strength far from the region
    double actionness = 0.6;        // class-agnostic component over the support
    double distractor = 0.0;        // another class's signature, scaled by (1 - strength)

    void validate() const;
};

struct SynthVideo {
    std::string id;
    double duration = 0.0;
    std::vector<FeatureMatrix> sources;
    std::vector<FeatureMatrix> planted;  // signal without noise
    std::vector<ActionInstance> instances;
    std::vector<QueryRecord> queries;    // text_path left empty
    std::vector<FeatureMatrix> query_text;
};

struct SynthDataset {
    std::vector<SynthVideo> train;
    std::vector<SynthVideo> val;
    std::vector<double> sensitive_positions;  // per class, in [0, 1]
};

/// Deterministic for a fixed spec (the same seed gives the same bytes).
SynthDataset synth_build(const SynthSpec& spec);

/// Writes train.json, val.json and features/ under out_dir.
SynthDataset synth_generate(const SynthSpec& spec, const std::string& out_dir);

}  // namespace asl::io
