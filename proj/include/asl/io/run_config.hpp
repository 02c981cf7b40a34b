// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asl/io/synth.hpp"
#include "asl/losses.hpp"
#include "asl/network/model.hpp"
#include "asl/postprocess.hpp"

namespace asl::io {

struct ModelSettings {
    std::size_t embed_dim = 64;
    std::size_t heads = 4;
    std::size_t depth = 2;
    std::size_t levels = 4;
    std::size_t head_layers = 2;
    std::size_t head_kernel = 3;
    std::size_t ffn_mult = 2;
    std::vector<std::size_t> proj_dims;  // empty: split embed_dim evenly
    std::size_t text_depth = 1;
    std::size_t fusion_depth = 1;
    std::size_t max_text_tokens = 64;
    double prior_prob = 0.01;
};

struct TrainSettings {
    double lr = 1e-4;
    std::size_t epochs = 30;
    std::size_t warmup_epochs = 5;
    std::size_t batch = 4;
    std::uint64_t seed = 1;
    double weight_decay = 0.0;
    double sensitivity_lr_mult = 10.0;
    bool asl = true;
    double mu_init = 0.5;
    double sigma_init = 2.0;
};

struct EvalSettings {
    std::vector<double> tious{0.1, 0.2, 0.3, 0.4, 0.5};
    std::size_t recall_k = 1;
    double recall_tiou = 0.5;
    std::vector<std::size_t> nlq_ks{1, 5};
    std::vector<double> nlq_tious{0.3, 0.5};
};

struct DataSettings {
    std::string train;
    std::string val;
};

/// Flat key=value configuration. Unknown keys are rejected; every value is
/// validated when loaded or overridden.
struct RunConfig {
    ModelSettings model;
    LossConfig loss;
    TrainSettings train;
    DecodeConfig decode;
    EvalSettings eval;
    DataSettings data;
    SynthSpec synth;

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    /// "key=value" override as given on the command line.
    void apply_override(const std::string& assignment);
    /// Applies all overrides, then validates once, so their order does not matter.
    void apply_overrides(const std::vector<std::string>& assignments);
    void validate() const;

    /// Every key in sorted order, one key=value per line.
    std::string resolved() const;

    static const std::vector<std::string>& keys();
    static RunConfig parse(const std::string& text, const std::string& source = "<config>");
    static RunConfig load(const std::string& path);

    /// Network shape for a dataset with the given per-source input dims.
    ModelConfig model_config(Mode mode, const std::vector<std::size_t>& source_dims, std::size_t num_classes,
                             std::size_t text_dim = 0) const;
};

}  // namespace asl::io
