// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/io/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "asl/io/binary.hpp"

namespace asl::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw DataError("config: " + key + "=" + value + ": expected " + expected);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = first + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) bad_value(key, value, "a number");
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(out)) bad_value(key, value, "a finite number");
    }
    return out;
}

std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
std::string format(std::size_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }
std::string format(Mode m) { return to_string(m); }
template <class T>
std::string format(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format(v[i]);
    return out;
}

template <class T>
void parse_into(const std::string& key, const std::string& value, T& out) {
    if constexpr (std::is_same_v<T, bool>) {
        if (value == "true" || value == "1") out = true;
        else if (value == "false" || value == "0") out = false;
        else bad_value(key, value, "true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
        out = value;
    } else if constexpr (std::is_same_v<T, Mode>) {
        try {
            out = parse_mode(value);
        } catch (const std::exception&) {
            bad_value(key, value, "mq or nlq");
        }
    } else if constexpr (std::is_arithmetic_v<T>) {
        out = parse_number<T>(key, value);
    } else {
        out.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            typename T::value_type v{};
            parse_into(key, trim(item), v);
            out.push_back(v);
        }
    }
}

struct Entry {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Access>
Entry entry(Access access) {
    return {[access](RunConfig& c, const std::string& key, const std::string& value) {
                parse_into(key, value, access(c));
            },
            [access](const RunConfig& c) {
                return format(access(const_cast<RunConfig&>(c)));
            }};
}

#define ASL_KEY(name, member) {name, entry([](RunConfig& c) -> auto& { return c.member; })}

const std::map<std::string, Entry>& table() {
    static const std::map<std::string, Entry> t = {
        ASL_KEY("model.embed_dim", model.embed_dim),
        ASL_KEY("model.heads", model.heads),
        ASL_KEY("model.depth", model.depth),
        ASL_KEY("model.levels", model.levels),
        ASL_KEY("model.head_layers", model.head_layers),
        ASL_KEY("model.head_kernel", model.head_kernel),
        ASL_KEY("model.ffn_mult", model.ffn_mult),
        ASL_KEY("model.proj_dims", model.proj_dims),
        ASL_KEY("model.text_depth", model.text_depth),
        ASL_KEY("model.fusion_depth", model.fusion_depth),
        ASL_KEY("model.max_text_tokens", model.max_text_tokens),
        ASL_KEY("model.prior_prob", model.prior_prob),
        ASL_KEY("loss.focal_alpha", loss.focal_alpha),
        ASL_KEY("loss.focal_gamma", loss.focal_gamma),
        ASL_KEY("loss.nce_temperature", loss.nce_temperature),
        ASL_KEY("loss.lambda_loc", loss.lambda_loc),
        ASL_KEY("loss.lambda_nce", loss.lambda_nce),
        ASL_KEY("loss.asl", train.asl),
        ASL_KEY("loss.mu_init", train.mu_init),
        ASL_KEY("loss.sigma_init", train.sigma_init),
        ASL_KEY("train.lr", train.lr),
        ASL_KEY("train.epochs", train.epochs),
        ASL_KEY("train.warmup_epochs", train.warmup_epochs),
        ASL_KEY("train.batch", train.batch),
        ASL_KEY("train.seed", train.seed),
        ASL_KEY("train.weight_decay", train.weight_decay),
        ASL_KEY("train.sensitivity_lr_mult", train.sensitivity_lr_mult),
        ASL_KEY("decode.score_floor", decode.score_floor),
        ASL_KEY("decode.pre_nms_topk", decode.pre_nms_topk),
        ASL_KEY("decode.nms_sigma", decode.nms_sigma),
        ASL_KEY("decode.min_score", decode.min_score),
        ASL_KEY("decode.max_keep", decode.max_keep),
        ASL_KEY("decode.nlq_topk", decode.nlq_topk),
        ASL_KEY("eval.tious", eval.tious),
        ASL_KEY("eval.recall_k", eval.recall_k),
        ASL_KEY("eval.recall_tiou", eval.recall_tiou),
        ASL_KEY("eval.nlq_ks", eval.nlq_ks),
        ASL_KEY("eval.nlq_tious", eval.nlq_tious),
        ASL_KEY("data.train", data.train),
        ASL_KEY("data.val", data.val),
        ASL_KEY("synth.seed", synth.seed),
        ASL_KEY("synth.mode", synth.mode),
        ASL_KEY("synth.n_videos", synth.n_videos),
        ASL_KEY("synth.n_val", synth.n_val),
        ASL_KEY("synth.T", synth.frames),
        ASL_KEY("synth.D", synth.dim),
        ASL_KEY("synth.C", synth.num_classes),
        ASL_KEY("synth.instances_per_video", synth.instances_per_video),
        ASL_KEY("synth.sources", synth.sources),
        ASL_KEY("synth.min_len", synth.min_len),
        ASL_KEY("synth.max_len", synth.max_len),
        ASL_KEY("synth.signature_rank", synth.signature_rank),
        ASL_KEY("synth.text_tokens", synth.text_tokens),
        ASL_KEY("synth.text_dim", synth.text_dim),
        ASL_KEY("synth.noise", synth.noise),
        ASL_KEY("synth.stride_seconds", synth.stride_seconds),
        ASL_KEY("synth.sensitive_width", synth.sensitive_width),
        ASL_KEY("synth.signature_floor", synth.signature_floor),
        ASL_KEY("synth.actionness", synth.actionness),
        ASL_KEY("synth.distractor", synth.distractor),
    };
    return t;
}

#undef ASL_KEY

const Entry& lookup(const std::string& key) {
    const auto it = table().find(key);
    if (it == table().end()) throw DataError("config: unknown key '" + key + "'");
    return it->second;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { lookup(key).set(*this, key, trim(value)); }

std::string RunConfig::get(const std::string& key) const { return lookup(key).get(*this); }

void RunConfig::apply_override(const std::string& assignment) { apply_overrides({assignment}); }

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw DataError("config: override '" + a + "' is not key=value");
        set(trim(a.substr(0, eq)), a.substr(eq + 1));
    }
    validate();
}

void RunConfig::validate() const {
    try {
        loss.validate();
        decode.validate();
        synth.validate();
    } catch (const InvalidInput& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    const auto fail = [](const std::string& what) { throw DataError("config: " + what); };
    if (model.embed_dim == 0 || model.heads == 0 || model.embed_dim % model.heads != 0) {
        fail("model.embed_dim must be a positive multiple of model.heads");
    }
    if (model.levels == 0 || model.levels > 12) fail("model.levels must lie in [1, 12]");
    if (model.head_layers == 0) fail("model.head_layers must be >= 1");
    if (model.head_kernel % 2 == 0) fail("model.head_kernel must be odd");
    if (model.ffn_mult == 0) fail("model.ffn_mult must be >= 1");
    if (!(model.prior_prob > 0.0 && model.prior_prob < 1.0)) fail("model.prior_prob must lie in (0, 1)");
    if (!(train.lr > 0.0)) fail("train.lr must be > 0");
    if (train.epochs == 0) fail("train.epochs must be >= 1");
    if (train.batch == 0) fail("train.batch must be >= 1");
    if (train.weight_decay < 0.0 || train.sensitivity_lr_mult < 0.0) fail("negative weight decay or lr multiplier");
    if (train.mu_init < kMuMin || train.mu_init > kMuMax) fail("loss.mu_init must lie in [0, 1]");
    if (train.sigma_init < kSigmaMin || train.sigma_init > kSigmaMax) fail("loss.sigma_init out of range");
    if (eval.tious.empty() || eval.nlq_ks.empty() || eval.nlq_tious.empty()) fail("empty evaluation list");
    for (double t : eval.tious) {
        if (!(t > 0.0 && t <= 1.0)) fail("eval.tious entries must lie in (0, 1]");
    }
    for (double t : eval.nlq_tious) {
        if (!(t > 0.0 && t <= 1.0)) fail("eval.nlq_tious entries must lie in (0, 1]");
    }
    if (!(eval.recall_tiou > 0.0 && eval.recall_tiou <= 1.0)) fail("eval.recall_tiou must lie in (0, 1]");
    if (eval.recall_k == 0) fail("eval.recall_k must be >= 1");
    for (auto k : eval.nlq_ks) {
        if (k == 0) fail("eval.nlq_ks entries must be >= 1");
    }
}

std::string RunConfig::resolved() const {
    std::string out;
    for (const auto& [key, e] : table()) out += key + "=" + e.get(*this) + "\n";
    return out;
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& [key, e] : table()) out.push_back(key);
        return out;
    }();
    return k;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
    RunConfig c;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError(source + ":" + std::to_string(lineno) + ": expected key=value");
        try {
            c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const DataError& e) {
            throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) { return parse(read_file(path), path); }

ModelConfig RunConfig::model_config(Mode mode, const std::vector<std::size_t>& source_dims, std::size_t num_classes,
                                    std::size_t text_dim) const {
    ModelConfig m;
    m.mode = mode;
    m.embed_dim = model.embed_dim;
    m.heads = model.heads;
    m.depth = model.depth;
    m.levels = model.levels;
    m.head_layers = model.head_layers;
    m.head_kernel = model.head_kernel;
    m.ffn_mult = model.ffn_mult;
    m.num_classes = num_classes;
    m.text_dim = mode == Mode::NLQ ? text_dim : 0;
    m.text_depth = model.text_depth;
    m.fusion_depth = model.fusion_depth;
    m.max_text_tokens = model.max_text_tokens;
    m.prior_prob = model.prior_prob;
    std::vector<std::size_t> proj = model.proj_dims;
    if (proj.empty()) {
        const std::size_t s = source_dims.size();
        for (std::size_t i = 0; i < s; ++i) proj.push_back(model.embed_dim / s + (i < model.embed_dim % s ? 1 : 0));
    }
    if (proj.size() != source_dims.size()) {
        throw DataError("config: model.proj_dims has " + std::to_string(proj.size()) + " entries for " +
                        std::to_string(source_dims.size()) + " sources");
    }
    for (std::size_t i = 0; i < proj.size(); ++i) m.sources.push_back({source_dims[i], proj[i]});
    try {
        m.validate();
    } catch (const InvalidInput& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    return m;
}

}  // namespace asl::io
