// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asl/autodiff/array.hpp"
#include "asl/autodiff/optim.hpp"
#include "asl/util/random.hpp"

namespace asl::nn {

using Mask = std::vector<std::uint8_t>;

/// Creates named, initialized parameters and keeps the registry.
class ParamFactory {
public:
    ParamFactory(std::vector<ad::ParamRef>& registry, Rng& rng) : registry_(registry), rng_(rng) {}

    ad::Array uniform(const std::string& name, ad::Shape shape, double bound);
    ad::Array constant(const std::string& name, ad::Shape shape, double value);

private:
    std::vector<ad::ParamRef>& registry_;
    Rng& rng_;
};

struct Linear {
    ad::Array weight;  // [in, out]
    ad::Array bias;    // [out]

    static Linear create(ParamFactory& f, const std::string& name, std::size_t in, std::size_t out);
    ad::Array operator()(const ad::Array& x) const;
};

struct LayerNorm {
    ad::Array gain;
    ad::Array bias;

    static LayerNorm create(ParamFactory& f, const std::string& name, std::size_t width);
    ad::Array operator()(const ad::Array& x) const;
};

struct FeedForward {
    Linear fc1;
    Linear fc2;

    static FeedForward create(ParamFactory& f, const std::string& name, std::size_t width, std::size_t hidden);
    ad::Array operator()(const ad::Array& x) const;
};

/// Multi-head attention with separate query and key/value inputs.
struct MultiHeadAttention {
    Linear q, k, v, out;
    std::size_t heads = 1;

    static MultiHeadAttention create(ParamFactory& f, const std::string& name, std::size_t width,
                                     std::size_t heads);
    ad::Array operator()(const ad::Array& query_in, const ad::Array& kv_in, const Mask& key_mask) const;
};

/// Self-attention across channels: the feature map is transposed so that
/// channels act as tokens and time as their feature axis. Heads split the
/// channels into groups; each head attends among its group's channels.
/// Rows outside row_mask are zeroed before any time-axis reduction.
struct ChannelAttention {
    Linear q, k, v, out;
    std::size_t heads = 1;

    static ChannelAttention create(ParamFactory& f, const std::string& name, std::size_t width, std::size_t heads);
    ad::Array operator()(const ad::Array& x, const Mask& row_mask) const;
};

/// y = x + (TemporalAttn(LN x) + ChannelAttn(LN x)) / 2; y + FFN(LN y).
struct EncoderBlock {
    LayerNorm ln1, ln2;
    MultiHeadAttention temporal;
    ChannelAttention channel;
    FeedForward ffn;

    static EncoderBlock create(ParamFactory& f, const std::string& name, std::size_t width, std::size_t heads,
                               std::size_t ffn_mult);
    ad::Array operator()(const ad::Array& x, const Mask& mask) const;
};

/// Pre-norm self-attention block (text encoder).
struct SelfAttentionBlock {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ffn;

    static SelfAttentionBlock create(ParamFactory& f, const std::string& name, std::size_t width, std::size_t heads,
                                     std::size_t ffn_mult);
    ad::Array operator()(const ad::Array& x) const;
};

/// v + CrossAttn(LN v, text, text); then FFN residual.
struct CrossAttentionBlock {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ffn;

    static CrossAttentionBlock create(ParamFactory& f, const std::string& name, std::size_t width,
                                      std::size_t heads, std::size_t ffn_mult);
    ad::Array operator()(const ad::Array& video, const ad::Array& text, const Mask& video_mask) const;
};

struct Conv1d {
    ad::Array weight;  // [K, Cin, Cout]
    ad::Array bias;    // [Cout]

    static Conv1d create(ParamFactory& f, const std::string& name, std::size_t kernel, std::size_t in,
                         std::size_t out, double bias_init = 0.0);
    ad::Array operator()(const ad::Array& x) const;
};

/// Stride-2 depthwise convolution used between pyramid levels.
struct Downsample {
    ad::Array weight;  // [3, C]
    ad::Array bias;    // [C]

    static Downsample create(ParamFactory& f, const std::string& name, std::size_t width);
    ad::Array operator()(const ad::Array& x) const;
};

/// Zero the rows of x where mask is 0. Identity when every row is valid.
ad::Array apply_row_mask(const ad::Array& x, const Mask& mask);

/// Fixed sinusoidal position table, [length, width].
ad::Array sinusoidal_positions(std::size_t length, std::size_t width);

}  // namespace asl::nn
