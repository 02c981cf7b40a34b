// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asl/autodiff/optim.hpp"
#include "asl/core.hpp"
#include "asl/dense_output.hpp"
#include "asl/network/layers.hpp"
#include "asl/sensitivity.hpp"

namespace asl {

enum class Mode { MQ, NLQ };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct SourceSpec {
    std::size_t input_dim = 0;
    std::size_t proj_dim = 0;

    bool operator==(const SourceSpec&) const = default;
};

struct ModelConfig {
    Mode mode = Mode::MQ;
    std::vector<SourceSpec> sources;
    std::size_t embed_dim = 64;
    std::size_t heads = 4;
    std::size_t depth = 2;
    std::size_t levels = 4;
    std::size_t head_layers = 2;
    std::size_t head_kernel = 3;
    std::size_t ffn_mult = 2;
    std::size_t num_classes = 1;
    // NLQ only
    std::size_t text_dim = 0;
    std::size_t text_depth = 1;
    std::size_t fusion_depth = 1;
    std::size_t max_text_tokens = 64;
    double prior_prob = 0.01;

    void validate() const;
    /// Line-oriented key=value text, stable across runs.
    std::string serialize() const;
    static ModelConfig parse(const std::string& text);

    bool operator==(const ModelConfig&) const = default;
};

/// Everything one forward pass produces.
struct ForwardResult {
    DenseOutput dense;
    std::vector<PyramidPoint> points;
    ad::Array frame_features;  // [T, E] level-0 features on valid frames
    ad::Array query;           // [E] pooled text encoding (NLQ), empty otherwise
};

class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;

    const ModelConfig& config() const { return config_; }
    std::vector<ad::ParamRef>& params() { return params_; }
    const std::vector<ad::ParamRef>& params() const { return params_; }
    SensitivityParams& sensitivity() { return sensitivity_; }
    const SensitivityParams& sensitivity() const { return sensitivity_; }

    /// Full forward pass. sources must share T and match the configured
    /// dims; text is [N_t, text_dim] in NLQ mode. pad_to (0 = minimal)
    /// pads the time axis further; outputs are cropped to valid points.
    ForwardResult forward(std::span<const FeatureSequence> sources, const ad::Array* text = nullptr,
                          std::size_t pad_to = 0) const;

    // Stages, exposed for tests.
    ad::Array project_and_fuse(std::span<const FeatureSequence> sources, std::size_t padded_len) const;
    const nn::EncoderBlock& encoder_block(std::size_t i) const { return encoder_.at(i); }
    std::vector<ad::Array> build_feature_pyramid(const ad::Array& x, const nn::Mask& mask,
                                                 std::vector<nn::Mask>* level_masks = nullptr) const;
    DenseOutput heads_forward(const std::vector<ad::Array>& pyramid, std::size_t frames,
                              double stride_seconds) const;
    ad::Array text_encode(const ad::Array& tokens) const;
    ad::Array cross_fuse(const ad::Array& video, const ad::Array& text, const nn::Mask& mask) const;

    /// Copy parameter values by name from another model with an identical config.
    void load_values(const std::vector<std::pair<std::string, ad::Array>>& named);

private:
    struct SourceProjection {
        nn::Linear fc1, fc2;
    };
    struct Head {
        std::vector<nn::Conv1d> hidden;
        nn::Conv1d output;
    };

    ad::Array run_head(const Head& head, const ad::Array& x, const nn::Mask& mask) const;

    ModelConfig config_;
    std::vector<ad::ParamRef> params_;
    std::vector<SourceProjection> projections_;
    std::vector<nn::EncoderBlock> encoder_;
    std::vector<nn::Downsample> downsample_;
    std::vector<nn::EncoderBlock> level_blocks_;
    Head cls_head_;
    Head loc_head_;
    std::optional<nn::Linear> text_proj_;
    std::vector<nn::SelfAttentionBlock> text_blocks_;
    std::vector<nn::CrossAttentionBlock> fusion_;
    SensitivityParams sensitivity_;
};

}  // namespace asl
