// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/network/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "asl/autodiff/ops.hpp"

namespace asl {

std::string to_string(Mode mode) { return mode == Mode::MQ ? "mq" : "nlq"; }

Mode parse_mode(const std::string& text) {
    if (text == "mq") return Mode::MQ;
    if (text == "nlq") return Mode::NLQ;
    throw InvalidInput("unknown mode '" + text + "' (expected mq or nlq)");
}

void ModelConfig::validate() const {
    if (sources.empty()) throw InvalidInput("model: at least one feature source required");
    std::size_t total = 0;
    for (const auto& s : sources) {
        if (s.input_dim == 0 || s.proj_dim == 0) throw InvalidInput("model: source dims must be positive");
        total += s.proj_dim;
    }
    if (total != embed_dim) {
        throw InvalidInput("model: projection dims sum to " + std::to_string(total) + " but embed_dim is " +
                           std::to_string(embed_dim));
    }
    if (heads == 0 || embed_dim % heads != 0) throw InvalidInput("model: embed_dim must be divisible by heads");
    if (levels == 0 || levels > 16) throw InvalidInput("model: levels must lie in [1, 16]");
    if (head_layers == 0) throw InvalidInput("model: head_layers must be >= 1");
    if (head_kernel % 2 == 0) throw InvalidInput("model: head_kernel must be odd");
    if (ffn_mult == 0) throw InvalidInput("model: ffn_mult must be >= 1");
    if (num_classes == 0) throw InvalidInput("model: num_classes must be >= 1");
    if (!(prior_prob > 0.0 && prior_prob < 1.0)) throw InvalidInput("model: prior_prob must lie in (0, 1)");
    if (mode == Mode::NLQ) {
        if (num_classes != 1) throw InvalidInput("model: NLQ mode uses a single class");
        if (text_dim == 0) throw InvalidInput("model: NLQ mode needs text_dim");
        if (max_text_tokens == 0) throw InvalidInput("model: max_text_tokens must be >= 1");
    }
}

std::string ModelConfig::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "mode=" << to_string(mode) << '\n';
    os << "sources=";
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (i) os << ',';
        os << sources[i].input_dim << ':' << sources[i].proj_dim;
    }
    os << '\n';
    os << "embed_dim=" << embed_dim << '\n'
       << "heads=" << heads << '\n'
       << "depth=" << depth << '\n'
       << "levels=" << levels << '\n'
       << "head_layers=" << head_layers << '\n'
       << "head_kernel=" << head_kernel << '\n'
       << "ffn_mult=" << ffn_mult << '\n'
       << "num_classes=" << num_classes << '\n'
       << "text_dim=" << text_dim << '\n'
       << "text_depth=" << text_depth << '\n'
       << "fusion_depth=" << fusion_depth << '\n'
       << "max_text_tokens=" << max_text_tokens << '\n'
       << "prior_prob=" << prior_prob << '\n';
    return os.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidInput("model config: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto take = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw InvalidInput("model config: missing key '" + key + "'");
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto take_size = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(take(key))); };
    ModelConfig c;
    c.mode = parse_mode(take("mode"));
    std::istringstream ss(take("sources"));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw InvalidInput("model config: bad source '" + item + "'");
        c.sources.push_back({std::stoull(item.substr(0, colon)), std::stoull(item.substr(colon + 1))});
    }
    c.embed_dim = take_size("embed_dim");
    c.heads = take_size("heads");
    c.depth = take_size("depth");
    c.levels = take_size("levels");
    c.head_layers = take_size("head_layers");
    c.head_kernel = take_size("head_kernel");
    c.ffn_mult = take_size("ffn_mult");
    c.num_classes = take_size("num_classes");
    c.text_dim = take_size("text_dim");
    c.text_depth = take_size("text_depth");
    c.fusion_depth = take_size("fusion_depth");
    c.max_text_tokens = take_size("max_text_tokens");
    c.prior_prob = std::stod(take("prior_prob"));
    if (!kv.empty()) throw InvalidInput("model config: unknown key '" + kv.begin()->first + "'");
    c.validate();
    return c;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    nn::ParamFactory f(params_, rng);
    const std::size_t width = config_.embed_dim;
    for (std::size_t s = 0; s < config_.sources.size(); ++s) {
        const auto& src = config_.sources[s];
        const std::string name = "proj." + std::to_string(s);
        projections_.push_back({nn::Linear::create(f, name + ".fc1", src.input_dim, src.proj_dim),
                                nn::Linear::create(f, name + ".fc2", src.proj_dim, src.proj_dim)});
    }
    for (std::size_t i = 0; i < config_.depth; ++i) {
        encoder_.push_back(
            nn::EncoderBlock::create(f, "encoder." + std::to_string(i), width, config_.heads, config_.ffn_mult));
    }
    if (config_.mode == Mode::NLQ) {
        text_proj_ = nn::Linear::create(f, "text.proj", config_.text_dim, width);
        for (std::size_t i = 0; i < config_.text_depth; ++i) {
            text_blocks_.push_back(nn::SelfAttentionBlock::create(f, "text.block." + std::to_string(i), width,
                                                                  config_.heads, config_.ffn_mult));
        }
        for (std::size_t i = 0; i < config_.fusion_depth; ++i) {
            fusion_.push_back(nn::CrossAttentionBlock::create(f, "fusion." + std::to_string(i), width,
                                                              config_.heads, config_.ffn_mult));
        }
    }
    for (std::size_t l = 1; l < config_.levels; ++l) {
        const std::string name = "pyramid." + std::to_string(l);
        downsample_.push_back(nn::Downsample::create(f, name + ".down", width));
        level_blocks_.push_back(nn::EncoderBlock::create(f, name + ".block", width, config_.heads, config_.ffn_mult));
    }
    const double prior_bias = -std::log((1.0 - config_.prior_prob) / config_.prior_prob);
    for (std::size_t i = 0; i + 1 < config_.head_layers; ++i) {
        cls_head_.hidden.push_back(
            nn::Conv1d::create(f, "head.cls." + std::to_string(i), config_.head_kernel, width, width));
    }
    cls_head_.output =
        nn::Conv1d::create(f, "head.cls.out", config_.head_kernel, width, config_.num_classes, prior_bias);
    for (std::size_t i = 0; i + 1 < config_.head_layers; ++i) {
        loc_head_.hidden.push_back(
            nn::Conv1d::create(f, "head.loc." + std::to_string(i), config_.head_kernel, width, width));
    }
    loc_head_.output = nn::Conv1d::create(f, "head.loc.out", config_.head_kernel, width, 2);

    sensitivity_ = SensitivityParams::create(config_.num_classes);
    params_.push_back({"sensitivity.mu_cls", sensitivity_.mu_cls, 1.0});
    params_.push_back({"sensitivity.sigma_cls", sensitivity_.sigma_cls, 1.0});
    params_.push_back({"sensitivity.mu_loc", sensitivity_.mu_loc, 1.0});
    params_.push_back({"sensitivity.sigma_loc", sensitivity_.sigma_loc, 1.0});
}

ad::Array Model::project_and_fuse(std::span<const FeatureSequence> sources, std::size_t padded_len) const {
    if (sources.size() != config_.sources.size()) {
        throw InvalidInput("project_and_fuse: expected " + std::to_string(config_.sources.size()) +
                           " feature sources, got " + std::to_string(sources.size()));
    }
    const std::size_t frames = sources.front().frames;
    std::vector<ad::Array> parts;
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const auto& seq = sources[s];
        if (seq.frames != frames) {
            throw InvalidInput("project_and_fuse: source " + std::to_string(s) + " has " + std::to_string(seq.frames) +
                               " frames, expected " + std::to_string(frames));
        }
        if (seq.channels != config_.sources[s].input_dim) {
            throw InvalidInput("project_and_fuse: source " + std::to_string(s) + " has " +
                               std::to_string(seq.channels) + " channels, expected " +
                               std::to_string(config_.sources[s].input_dim));
        }
        std::vector<double> padded(padded_len * seq.channels, 0.0);
        std::copy(seq.data.begin(), seq.data.end(), padded.begin());
        const ad::Array x({padded_len, seq.channels}, std::move(padded));
        const auto& proj = projections_[s];
        parts.push_back(proj.fc2(ad::gelu(proj.fc1(x))));
    }
    return parts.size() == 1 ? parts.front() : ad::concat(parts, 1);
}

std::vector<ad::Array> Model::build_feature_pyramid(const ad::Array& x, const nn::Mask& mask,
                                                    std::vector<nn::Mask>* level_masks) const {
    std::vector<ad::Array> levels{x};
    std::vector<nn::Mask> masks{mask};
    for (std::size_t l = 1; l < config_.levels; ++l) {
        const nn::Mask& prev = masks.back();
        nn::Mask m((prev.size() + 1) / 2);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = prev[2 * i];
        ad::Array y = nn::apply_row_mask(downsample_[l - 1](levels.back()), m);
        levels.push_back(level_blocks_[l - 1](y, m));
        masks.push_back(std::move(m));
    }
    if (level_masks) *level_masks = std::move(masks);
    return levels;
}

ad::Array Model::run_head(const Head& head, const ad::Array& x, const nn::Mask& mask) const {
    ad::Array h = x;
    for (const auto& conv : head.hidden) h = nn::apply_row_mask(ad::gelu(conv(h)), mask);
    return head.output(h);
}

DenseOutput Model::heads_forward(const std::vector<ad::Array>& pyramid, std::size_t frames,
                                 double stride_seconds) const {
    std::vector<ad::Array> cls, loc;
    for (std::size_t l = 0; l < pyramid.size(); ++l) {
        const std::size_t valid = level_length(frames, l);
        const std::size_t len = pyramid[l].dim(0);
        if (valid > len) throw InvalidInput("heads_forward: pyramid level shorter than its valid length");
        nn::Mask mask(len, 0);
        std::fill_n(mask.begin(), valid, std::uint8_t{1});
        const double unit = static_cast<double>(std::size_t{1} << l) * stride_seconds;
        cls.push_back(ad::slice(run_head(cls_head_, pyramid[l], mask), 0, 0, valid));
        loc.push_back(ad::scale(ad::softplus(ad::slice(run_head(loc_head_, pyramid[l], mask), 0, 0, valid)), unit));
    }
    DenseOutput out;
    out.cls_logits = cls.size() == 1 ? cls.front() : ad::concat(cls, 0);
    out.offsets = loc.size() == 1 ? loc.front() : ad::concat(loc, 0);
    return out;
}

ad::Array Model::text_encode(const ad::Array& tokens) const {
    if (!text_proj_) throw InvalidInput("text_encode: model is not in NLQ mode");
    if (tokens.rank() != 2 || tokens.dim(0) == 0) throw InvalidInput("text_encode: empty token list");
    if (tokens.dim(0) > config_.max_text_tokens) {
        throw InvalidInput("text_encode: " + std::to_string(tokens.dim(0)) + " tokens exceed the configured maximum " +
                           std::to_string(config_.max_text_tokens));
    }
    if (tokens.dim(1) != config_.text_dim) throw ad::ShapeError("text_encode", tokens.shape(), {0, config_.text_dim});
    ad::Array x = (*text_proj_)(tokens);
    for (const auto& block : text_blocks_) x = block(x);
    return x;
}

ad::Array Model::cross_fuse(const ad::Array& video, const ad::Array& text, const nn::Mask& mask) const {
    ad::Array v = video;
    for (const auto& layer : fusion_) v = layer(v, text, mask);
    return v;
}

ForwardResult Model::forward(std::span<const FeatureSequence> sources, const ad::Array* text,
                             std::size_t pad_to) const {
    if (sources.empty()) throw InvalidInput("forward: no feature sources");
    const std::size_t frames = sources.front().frames;
    const double stride_seconds = sources.front().stride_seconds;
    const std::size_t unit = std::size_t{1} << (config_.levels - 1);
    if (frames < unit) {
        throw InvalidInput("forward: " + std::to_string(frames) + " frames too short for " +
                           std::to_string(config_.levels) + " pyramid levels");
    }
    std::size_t padded = (frames + unit - 1) / unit * unit;
    if (pad_to != 0) {
        if (pad_to < padded || pad_to % unit != 0) {
            throw InvalidInput("forward: pad_to must be a multiple of " + std::to_string(unit) + " and >= " +
                               std::to_string(padded));
        }
        padded = pad_to;
    }
    nn::Mask mask(padded, 0);
    std::fill_n(mask.begin(), frames, std::uint8_t{1});

    ad::Array x = project_and_fuse(sources, padded);
    x = nn::apply_row_mask(ad::add(x, nn::sinusoidal_positions(padded, config_.embed_dim)), mask);
    for (const auto& block : encoder_) x = block(x, mask);

    ForwardResult result;
    if (config_.mode == Mode::NLQ) {
        if (!text) throw InvalidInput("forward: NLQ mode needs text tokens");
        const ad::Array encoded = text_encode(*text);
        x = cross_fuse(x, encoded, mask);
        result.query = ad::mean(encoded, 0);
    }
    result.frame_features = ad::slice(x, 0, 0, frames);
    const auto pyramid = build_feature_pyramid(x, mask);
    result.dense = heads_forward(pyramid, frames, stride_seconds);
    result.points = build_pyramid(frames, config_.levels, stride_seconds);
    return result;
}

void Model::load_values(const std::vector<std::pair<std::string, ad::Array>>& named) {
    std::map<std::string, const ad::Array*> by_name;
    for (const auto& [name, array] : named) by_name[name] = &array;
    for (auto& p : params_) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw InvalidInput("load_values: missing parameter '" + p.name + "'");
        if (it->second->shape() != p.array.shape()) {
            throw ad::ShapeError("load_values(" + p.name + ")", p.array.shape(), it->second->shape());
        }
        std::ranges::copy(it->second->data(), p.array.mutable_data().begin());
        by_name.erase(it);
    }
    if (!by_name.empty()) throw InvalidInput("load_values: unexpected parameter '" + by_name.begin()->first + "'");
}

}  // namespace asl
