// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/io/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include "json.hpp"

#include "asl/io/binary.hpp"
#include "asl/io/feature_file.hpp"

namespace asl::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Manifest::resolve(const std::string& path) const {
    const fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return p.string();
    return (fs::path(base_dir) / p).string();
}

std::string manifest_to_json(const Manifest& m) {
    json j;
    j["version"] = 1;
    j["mode"] = to_string(m.mode);
    j["num_classes"] = m.num_classes;
    json videos = json::array();
    for (const auto& v : m.videos) {
        json jv;
        jv["id"] = v.id;
        jv["duration"] = v.duration;
        jv["stride_seconds"] = v.stride_seconds;
        jv["features"] = v.feature_paths;
        if (m.mode == Mode::MQ) {
            json inst = json::array();
            for (const auto& a : v.instances) {
                inst.push_back({{"label", a.label}, {"start", a.segment.start}, {"end", a.segment.end}});
            }
            jv["instances"] = inst;
        } else {
            json qs = json::array();
            for (const auto& q : v.queries) {
                qs.push_back({{"id", q.id}, {"start", q.segment.start}, {"end", q.segment.end}, {"text", q.text_path}});
            }
            jv["queries"] = qs;
        }
        videos.push_back(jv);
    }
    j["videos"] = videos;
    if (!m.sensitive_positions.empty()) j["sensitive_positions"] = m.sensitive_positions;
    return j.dump(1) + "\n";
}

Manifest manifest_from_json(const std::string& text, const std::string& base_dir, const std::string& source) {
    Manifest m;
    m.base_dir = base_dir;
    try {
        const json j = json::parse(text);
        if (j.at("version").get<int>() != 1) throw DataError(source + ": unsupported manifest version");
        m.mode = parse_mode(j.at("mode").get<std::string>());
        m.num_classes = j.at("num_classes").get<std::size_t>();
        for (const auto& jv : j.at("videos")) {
            VideoRecord v;
            v.id = jv.at("id").get<std::string>();
            v.duration = jv.at("duration").get<double>();
            v.stride_seconds = jv.at("stride_seconds").get<double>();
            v.feature_paths = jv.at("features").get<std::vector<std::string>>();
            if (jv.contains("instances")) {
                for (const auto& ja : jv["instances"]) {
                    v.instances.push_back({{ja.at("start").get<double>(), ja.at("end").get<double>()},
                                           ja.at("label").get<int>()});
                }
            }
            if (jv.contains("queries")) {
                for (const auto& jq : jv["queries"]) {
                    v.queries.push_back({jq.at("id").get<std::string>(),
                                         {jq.at("start").get<double>(), jq.at("end").get<double>()},
                                         jq.at("text").get<std::string>()});
                }
            }
            m.videos.push_back(std::move(v));
        }
        if (j.contains("sensitive_positions")) {
            m.sensitive_positions = j["sensitive_positions"].get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw DataError(source + ": " + e.what());
    } catch (const InvalidInput& e) {
        throw DataError(source + ": " + e.what());
    }
    return m;
}

void save_manifest(const std::string& path, const Manifest& m) { write_file(path, manifest_to_json(m)); }

Manifest load_manifest(const std::string& path) {
    const auto base = fs::path(path).parent_path().string();
    auto m = manifest_from_json(read_file(path), base, path);
    validate_manifest(m);
    return m;
}

void validate_manifest(const Manifest& m) {
    if (m.num_classes == 0) throw DataError("manifest: num_classes must be >= 1");
    if (m.mode == Mode::NLQ && m.num_classes != 1) throw DataError("manifest: NLQ datasets have num_classes = 1");
    if (m.videos.empty()) throw DataError("manifest: no videos");
    std::set<std::string> video_ids, query_ids;
    std::vector<std::uint32_t> source_dims;
    std::uint32_t text_dim = 0;
    for (const auto& v : m.videos) {
        const std::string where = "manifest: video " + v.id;
        if (!video_ids.insert(v.id).second) throw DataError("manifest: duplicate video id " + v.id);
        if (!(v.stride_seconds > 0.0) || !(v.duration > 0.0)) throw DataError(where + ": non-positive duration/stride");
        if (v.feature_paths.empty()) throw DataError(where + ": no feature sources");
        if (source_dims.empty()) source_dims.assign(v.feature_paths.size(), 0);
        if (v.feature_paths.size() != source_dims.size()) throw DataError(where + ": source count differs");
        std::uint32_t frames = 0;
        for (std::size_t s = 0; s < v.feature_paths.size(); ++s) {
            const auto path = m.resolve(v.feature_paths[s]);
            if (!fs::exists(path)) throw DataError(where + ": missing feature file " + path);
            const auto [t, d] = peek_feature_shape(path);
            if (s == 0) frames = t;
            if (t != frames) throw DataError(where + ": sources disagree on T");
            if (source_dims[s] == 0) source_dims[s] = d;
            if (d != source_dims[s]) throw DataError(where + ": source " + std::to_string(s) + " has D=" +
                                                     std::to_string(d) + ", expected " +
                                                     std::to_string(source_dims[s]));
        }
        if (std::abs(v.duration - frames * v.stride_seconds) > v.stride_seconds) {
            throw DataError(where + ": duration " + std::to_string(v.duration) + " inconsistent with T*stride = " +
                            std::to_string(frames * v.stride_seconds));
        }
        const auto check_segment = [&](const TimeSegment& s) {
            if (!s.valid() || s.end > v.duration) throw DataError(where + ": segment outside video or empty");
        };
        if (m.mode == Mode::MQ) {
            if (!v.queries.empty()) throw DataError(where + ": queries in an MQ manifest");
            for (const auto& a : v.instances) {
                check_segment(a.segment);
                if (a.label < 0 || static_cast<std::size_t>(a.label) >= m.num_classes) {
                    throw DataError(where + ": label " + std::to_string(a.label) + " out of range");
                }
            }
        } else {
            for (const auto& q : v.queries) {
                check_segment(q.segment);
                if (!query_ids.insert(q.id).second) throw DataError("manifest: duplicate query id " + q.id);
                const auto path = m.resolve(q.text_path);
                if (!fs::exists(path)) throw DataError(where + ": missing text file " + path);
                const auto [n, d] = peek_feature_shape(path);
                if (n == 0) throw DataError(where + ": empty query text " + q.id);
                if (text_dim == 0) text_dim = d;
                if (d != text_dim) throw DataError(where + ": inconsistent text dimension");
            }
        }
    }
}

}  // namespace asl::io
