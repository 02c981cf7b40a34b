// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/io/predictions.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "asl/io/binary.hpp"

namespace asl::io {

namespace {

constexpr const char* kHeader = "video_id\tlabel\tstart_s\tend_s\tscore";

double parse_real(const std::string& field, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != field.size() || !std::isfinite(v)) throw DataError(where + ": bad number '" + field + "'");
    return v;
}

}  // namespace

std::string encode_predictions(const std::vector<SegmentPrediction>& preds) {
    std::string out = std::string(kHeader) + "\n";
    char buf[128];
    for (const auto& p : preds) {
        if (p.video_id.find_first_of("\t\n") != std::string::npos) {
            throw DataError("prediction id contains a tab or newline: " + p.video_id);
        }
        std::snprintf(buf, sizeof buf, "\t%d\t%.6f\t%.6f\t%.6f\n", p.label, p.segment.start, p.segment.end, p.score);
        out += p.video_id;
        out += buf;
    }
    return out;
}

std::vector<SegmentPrediction> decode_predictions(const std::string& text, const std::string& source) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line) || line != kHeader) throw DataError(source + ":1: missing prediction header");
    std::vector<SegmentPrediction> out;
    std::size_t lineno = 1;
    while (std::getline(ss, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string field;
        while (std::getline(ls, field, '\t')) f.push_back(field);
        if (f.size() != 5) throw DataError(where + ": expected 5 fields, got " + std::to_string(f.size()));
        SegmentPrediction p;
        p.video_id = f[0];
        const double label = parse_real(f[1], where);
        if (label != std::floor(label) || label < 0) throw DataError(where + ": bad label '" + f[1] + "'");
        p.label = static_cast<int>(label);
        p.segment = {parse_real(f[2], where), parse_real(f[3], where)};
        p.score = parse_real(f[4], where);
        out.push_back(std::move(p));
    }
    return out;
}

void save_predictions(const std::string& path, const std::vector<SegmentPrediction>& preds) {
    write_file(path, encode_predictions(preds));
}

std::vector<SegmentPrediction> load_predictions(const std::string& path) {
    return decode_predictions(read_file(path), path);
}

}  // namespace asl::io
