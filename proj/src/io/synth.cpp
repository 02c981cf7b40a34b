// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/io/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "asl/io/binary.hpp"
#include "asl/util/random.hpp"

namespace asl::io {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
    const auto fail = [](const std::string& what) { throw InvalidInput("synth: " + what); };
    if (n_videos == 0) fail("n_videos must be >= 1");
    if (frames == 0 || dim == 0 || num_classes == 0 || sources == 0) fail("T, D, C and sources must be >= 1");
    if (min_len == 0 || min_len > max_len) fail("need 1 <= min_len <= max_len");
    if (instances_per_video * max_len > frames) fail("instances_per_video * max_len exceeds T");
    if (mode == Mode::NLQ && instances_per_video > num_classes) {
        fail("NLQ needs instances_per_video <= C (one query concept per instance)");
    }
    if (mode == Mode::NLQ && (text_tokens == 0 || text_dim == 0)) fail("NLQ needs text_tokens, text_dim >= 1");
    if (signature_rank == 0) fail("signature_rank must be >= 1");
    if (!(noise >= 0.0) || !(stride_seconds > 0.0) || !(sensitive_width > 0.0)) {
        fail("noise >= 0, stride_seconds > 0, sensitive_width > 0 required");
    }
    if (!(signature_floor >= 0.0 && signature_floor <= 1.0)) fail("signature_floor must lie in [0, 1]");
    if (!(actionness >= 0.0)) fail("actionness must be >= 0");
    if (!(distractor >= 0.0)) fail("distractor must be >= 0");
}

namespace {

std::vector<double> unit_rms(std::vector<double> v) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    const double scale = ss > 0.0 ? std::sqrt(static_cast<double>(v.size()) / ss) : 0.0;
    for (auto& x : v) x *= scale;
    return v;
}

struct Generator {
    const SynthSpec& spec;
    Rng rng;
    std::vector<std::vector<std::vector<double>>> signature;  // [source][class][D]
    std::vector<std::vector<double>> action;                  // [source][D]
    std::vector<std::vector<double>> text_anchor;             // [class][text_dim]
    std::vector<double> positions;

    explicit Generator(const SynthSpec& s) : spec(s), rng(s.seed) {
        const std::size_t C = spec.num_classes, D = spec.dim, r = spec.signature_rank;
        signature.resize(spec.sources);
        for (std::size_t k = 0; k < spec.sources; ++k) {
            std::vector<double> basis(D * r);
            for (auto& b : basis) b = rng.normal();
            for (std::size_t c = 0; c < C; ++c) {
                std::vector<double> z(r), s(D, 0.0);
                for (auto& x : z) x = rng.normal();
                for (std::size_t d = 0; d < D; ++d) {
                    for (std::size_t j = 0; j < r; ++j) s[d] += basis[d * r + j] * z[j];
                }
                signature[k].push_back(unit_rms(std::move(s)));
            }
            std::vector<double> u(D);
            for (auto& x : u) x = rng.normal();
            action.push_back(unit_rms(std::move(u)));
        }
        // Evenly spread positions assigned to classes in a seeded order.
        std::vector<std::size_t> order(C);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = C; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        positions.assign(C, 0.5);
        for (std::size_t i = 0; i < C; ++i) {
            const double base = C == 1 ? 0.5 : 0.15 + 0.7 * static_cast<double>(i) / static_cast<double>(C - 1);
            positions[order[i]] = std::clamp(base + rng.uniform(-0.03, 0.03), 0.05, 0.95);
        }
        if (spec.mode == Mode::NLQ) {
            std::vector<double> proj(spec.text_dim * D);
            for (auto& p : proj) p = rng.normal() / std::sqrt(static_cast<double>(D));
            for (std::size_t c = 0; c < C; ++c) {
                std::vector<double> t(spec.text_dim, 0.0);
                for (std::size_t i = 0; i < spec.text_dim; ++i) {
                    for (std::size_t d = 0; d < D; ++d) t[i] += proj[i * D + d] * signature[0][c][d];
                }
                text_anchor.push_back(unit_rms(std::move(t)));
            }
        }
    }

    double strength(std::size_t label, double t) const {
        const double z = (t - positions[label]) / spec.sensitive_width;
        return spec.signature_floor + (1.0 - spec.signature_floor) * std::exp(-0.5 * z * z);
    }

    /// Non-overlapping instances; placement by rejection with a capped retry.
    std::vector<std::pair<std::size_t, std::size_t>> place() {
        std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end) in steps
        for (std::size_t attempt = 0; spans.size() < spec.instances_per_video; ++attempt) {
            if (attempt > 10000) throw InvalidInput("synth: cannot place instances; lower lengths or count");
            const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
            const std::size_t begin = rng.below(spec.frames - len + 1);
            const bool clash = std::any_of(spans.begin(), spans.end(), [&](const auto& s) {
                return begin < s.second && s.first < begin + len;
            });
            if (!clash) spans.emplace_back(begin, begin + len);
        }
        std::sort(spans.begin(), spans.end());
        return spans;
    }

    SynthVideo video(const std::string& id) {
        SynthVideo v;
        v.id = id;
        const double s = spec.stride_seconds;
        v.duration = static_cast<double>(spec.frames) * s;
        const auto spans = place();
        std::vector<std::size_t> labels;
        if (spec.mode == Mode::NLQ) {
            std::vector<std::size_t> pool(spec.num_classes);
            std::iota(pool.begin(), pool.end(), 0);
            for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
            labels.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spans.size()));
        } else {
            for (std::size_t i = 0; i < spans.size(); ++i) labels.push_back(rng.below(spec.num_classes));
        }
        // Low-sensitivity frames blend in a different class's signature.
        std::vector<std::size_t> confusers(spans.size());
        if (spec.distractor > 0.0 && spec.num_classes > 1) {
            for (std::size_t i = 0; i < spans.size(); ++i) {
                confusers[i] = (labels[i] + 1 + rng.below(spec.num_classes - 1)) % spec.num_classes;
            }
        }
        const auto T = static_cast<std::uint32_t>(spec.frames), D = static_cast<std::uint32_t>(spec.dim);
        for (std::size_t k = 0; k < spec.sources; ++k) {
            FeatureMatrix planted{T, D, std::vector<double>(spec.frames * spec.dim, 0.0)};
            for (std::size_t i = 0; i < spans.size(); ++i) {
                const auto [b, e] = spans[i];
                const double len = static_cast<double>(e - b);
                for (std::size_t j = b; j < e; ++j) {
                    const double t = (static_cast<double>(j - b) + 0.5) / len;
                    const double a = strength(labels[i], t);
                    const double confusion = spec.num_classes > 1 ? spec.distractor * (1.0 - a) : 0.0;
                    for (std::size_t d = 0; d < spec.dim; ++d) {
                        planted.values[j * spec.dim + d] = a * signature[k][labels[i]][d] +
                                                           confusion * signature[k][confusers[i]][d] +
                                                           spec.actionness * action[k][d];
                    }
                }
            }
            FeatureMatrix noisy = planted;
            if (spec.noise > 0.0) {
                for (auto& x : noisy.values) x += spec.noise * rng.normal();
            }
            v.planted.push_back(std::move(planted));
            v.sources.push_back(std::move(noisy));
        }
        for (std::size_t i = 0; i < spans.size(); ++i) {
            const TimeSegment seg{static_cast<double>(spans[i].first) * s, static_cast<double>(spans[i].second) * s};
            if (spec.mode == Mode::MQ) {
                v.instances.push_back({seg, static_cast<int>(labels[i])});
                continue;
            }
            char qid[32];
            std::snprintf(qid, sizeof qid, "_q%zu", i);
            v.queries.push_back({id + qid, seg, ""});
            FeatureMatrix text{static_cast<std::uint32_t>(spec.text_tokens), static_cast<std::uint32_t>(spec.text_dim),
                               {}};
            for (std::size_t n = 0; n < spec.text_tokens; ++n) {
                for (std::size_t d = 0; d < spec.text_dim; ++d) {
                    text.values.push_back(text_anchor[labels[i]][d] + spec.noise * rng.normal());
                }
            }
            v.query_text.push_back(std::move(text));
        }
        return v;
    }
};

std::string video_name(const char* split, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04zu", split, i);
    return buf;
}

void write_split(const SynthSpec& spec, const SynthDataset& ds, std::vector<SynthVideo>& videos,
                 const std::string& out_dir, const std::string& name) {
    Manifest m;
    m.mode = spec.mode;
    m.num_classes = spec.mode == Mode::NLQ ? 1 : spec.num_classes;
    m.sensitive_positions = ds.sensitive_positions;
    for (auto& v : videos) {
        VideoRecord r;
        r.id = v.id;
        r.duration = v.duration;
        r.stride_seconds = spec.stride_seconds;
        for (std::size_t k = 0; k < v.sources.size(); ++k) {
            const std::string rel = "features/" + v.id + ".s" + std::to_string(k) + ".aslf";
            save_features((fs::path(out_dir) / rel).string(), v.sources[k]);
            r.feature_paths.push_back(rel);
        }
        r.instances = v.instances;
        for (std::size_t q = 0; q < v.queries.size(); ++q) {
            const std::string rel = "text/" + v.queries[q].id + ".aslf";
            save_features((fs::path(out_dir) / rel).string(), v.query_text[q]);
            v.queries[q].text_path = rel;
        }
        r.queries = v.queries;
        m.videos.push_back(std::move(r));
    }
    save_manifest((fs::path(out_dir) / (name + ".json")).string(), m);
}

}  // namespace

SynthDataset synth_build(const SynthSpec& spec) {
    spec.validate();
    Generator g(spec);
    SynthDataset ds;
    ds.sensitive_positions = g.positions;
    for (std::size_t i = 0; i < spec.n_videos; ++i) ds.train.push_back(g.video(video_name("train", i)));
    for (std::size_t i = 0; i < spec.n_val; ++i) ds.val.push_back(g.video(video_name("val", i)));
    return ds;
}

SynthDataset synth_generate(const SynthSpec& spec, const std::string& out_dir) {
    auto ds = synth_build(spec);
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "features", ec);
    if (spec.mode == Mode::NLQ) fs::create_directories(fs::path(out_dir) / "text", ec);
    if (ec) throw DataError("cannot create " + out_dir + ": " + ec.message());
    write_split(spec, ds, ds.train, out_dir, "train");
    if (!ds.val.empty()) write_split(spec, ds, ds.val, out_dir, "val");
    return ds;
}

}  // namespace asl::io
