// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/network/layers.hpp"

#include <algorithm>
#include <cmath>

#include "asl/autodiff/ops.hpp"

namespace asl::nn {

ad::Array ParamFactory::uniform(const std::string& name, ad::Shape shape, double bound) {
    const std::size_t n = ad::shape_size(shape);
    std::vector<double> values(n);
    for (auto& v : values) v = rng_.uniform(-bound, bound);
    ad::Array a(std::move(shape), std::move(values), true);
    registry_.push_back({name, a, 1.0});
    return a;
}

ad::Array ParamFactory::constant(const std::string& name, ad::Shape shape, double value) {
    ad::Array a = ad::Array::full(std::move(shape), value, true);
    registry_.push_back({name, a, 1.0});
    return a;
}

Linear Linear::create(ParamFactory& f, const std::string& name, std::size_t in, std::size_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return {f.uniform(name + ".weight", {in, out}, bound), f.constant(name + ".bias", {out}, 0.0)};
}

ad::Array Linear::operator()(const ad::Array& x) const { return ad::add(ad::matmul(x, weight), bias); }

LayerNorm LayerNorm::create(ParamFactory& f, const std::string& name, std::size_t width) {
    return {f.constant(name + ".gain", {width}, 1.0), f.constant(name + ".bias", {width}, 0.0)};
}

ad::Array LayerNorm::operator()(const ad::Array& x) const { return ad::layer_norm(x, gain, bias); }

FeedForward FeedForward::create(ParamFactory& f, const std::string& name, std::size_t width, std::size_t hidden) {
    return {Linear::create(f, name + ".fc1", width, hidden), Linear::create(f, name + ".fc2", hidden, width)};
}

ad::Array FeedForward::operator()(const ad::Array& x) const { return fc2(ad::gelu(fc1(x))); }

MultiHeadAttention MultiHeadAttention::create(ParamFactory& f, const std::string& name, std::size_t width,
                                              std::size_t heads) {
    return {Linear::create(f, name + ".q", width, width), Linear::create(f, name + ".k", width, width),
            Linear::create(f, name + ".v", width, width), Linear::create(f, name + ".out", width, width), heads};
}

ad::Array MultiHeadAttention::operator()(const ad::Array& query_in, const ad::Array& kv_in,
                                         const Mask& key_mask) const {
    return out(ad::scaled_dot_attention(q(query_in), k(kv_in), v(kv_in), key_mask, heads));
}

ChannelAttention ChannelAttention::create(ParamFactory& f, const std::string& name, std::size_t width,
                                          std::size_t heads) {
    return {Linear::create(f, name + ".q", width, width), Linear::create(f, name + ".k", width, width),
            Linear::create(f, name + ".v", width, width), Linear::create(f, name + ".out", width, width), heads};
}

ad::Array ChannelAttention::operator()(const ad::Array& x, const Mask& row_mask) const {
    const std::size_t width = x.dim(1);
    const std::size_t group = width / heads;
    const auto valid = static_cast<double>(std::count(row_mask.begin(), row_mask.end(), std::uint8_t{1}));
    const double scale = 1.0 / std::sqrt(std::max(valid, 1.0));
    const ad::Array qt = ad::transpose(apply_row_mask(q(x), row_mask));
    const ad::Array kt = ad::transpose(apply_row_mask(k(x), row_mask));
    const ad::Array vt = ad::transpose(apply_row_mask(v(x), row_mask));
    std::vector<ad::Array> parts;
    parts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t b = h * group, e = b + group;
        parts.push_back(ad::scaled_dot_attention(ad::slice(qt, 0, b, e), ad::slice(kt, 0, b, e),
                                                 ad::slice(vt, 0, b, e), {}, 1, scale));
    }
    const ad::Array mixed = heads == 1 ? parts.front() : ad::concat(parts, 0);
    return out(ad::transpose(mixed));
}

EncoderBlock EncoderBlock::create(ParamFactory& f, const std::string& name, std::size_t width, std::size_t heads,
                                  std::size_t ffn_mult) {
    return {LayerNorm::create(f, name + ".ln1", width), LayerNorm::create(f, name + ".ln2", width),
            MultiHeadAttention::create(f, name + ".temporal", width, heads),
            ChannelAttention::create(f, name + ".channel", width, heads),
            FeedForward::create(f, name + ".ffn", width, width * ffn_mult)};
}

ad::Array EncoderBlock::operator()(const ad::Array& x, const Mask& mask) const {
    const ad::Array normed = ln1(x);
    const ad::Array attended = ad::add(temporal(normed, normed, mask), channel(normed, mask));
    ad::Array y = ad::add(x, ad::scale(attended, 0.5));
    y = ad::add(y, ffn(ln2(y)));
    return apply_row_mask(y, mask);
}

SelfAttentionBlock SelfAttentionBlock::create(ParamFactory& f, const std::string& name, std::size_t width,
                                              std::size_t heads, std::size_t ffn_mult) {
    return {LayerNorm::create(f, name + ".ln1", width), LayerNorm::create(f, name + ".ln2", width),
            MultiHeadAttention::create(f, name + ".attn", width, heads),
            FeedForward::create(f, name + ".ffn", width, width * ffn_mult)};
}

ad::Array SelfAttentionBlock::operator()(const ad::Array& x) const {
    const ad::Array normed = ln1(x);
    ad::Array y = ad::add(x, attn(normed, normed, {}));
    return ad::add(y, ffn(ln2(y)));
}

CrossAttentionBlock CrossAttentionBlock::create(ParamFactory& f, const std::string& name, std::size_t width,
                                                std::size_t heads, std::size_t ffn_mult) {
    return {LayerNorm::create(f, name + ".ln1", width), LayerNorm::create(f, name + ".ln2", width),
            MultiHeadAttention::create(f, name + ".attn", width, heads),
            FeedForward::create(f, name + ".ffn", width, width * ffn_mult)};
}

ad::Array CrossAttentionBlock::operator()(const ad::Array& video, const ad::Array& text,
                                          const Mask& video_mask) const {
    ad::Array y = ad::add(video, attn(ln1(video), text, {}));
    y = ad::add(y, ffn(ln2(y)));
    return apply_row_mask(y, video_mask);
}

Conv1d Conv1d::create(ParamFactory& f, const std::string& name, std::size_t kernel, std::size_t in,
                      std::size_t out, double bias_init) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(kernel * in));
    return {f.uniform(name + ".weight", {kernel, in, out}, bound), f.constant(name + ".bias", {out}, bias_init)};
}

ad::Array Conv1d::operator()(const ad::Array& x) const { return ad::conv1d(x, weight, bias, 1); }

Downsample Downsample::create(ParamFactory& f, const std::string& name, std::size_t width) {
    return {f.uniform(name + ".weight", {3, width}, 1.0 / std::sqrt(3.0)), f.constant(name + ".bias", {width}, 0.0)};
}

ad::Array Downsample::operator()(const ad::Array& x) const { return ad::depthwise_conv1d(x, weight, bias, 2); }

ad::Array apply_row_mask(const ad::Array& x, const Mask& mask) {
    if (mask.empty() || std::all_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) return x;
    if (mask.size() != x.dim(0)) throw ad::ShapeError("apply_row_mask", x.shape(), {mask.size()});
    std::vector<double> m(mask.begin(), mask.end());
    return ad::mul(x, ad::Array({mask.size(), 1}, std::move(m)));
}

ad::Array sinusoidal_positions(std::size_t length, std::size_t width) {
    std::vector<double> pe(length * width);
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t i = 0; i < width; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            const double angle = static_cast<double>(t) * freq;
            pe[t * width + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return ad::Array({length, width}, std::move(pe));
}

}  // namespace asl::nn
