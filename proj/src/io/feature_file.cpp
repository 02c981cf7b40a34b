// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/io/feature_file.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "asl/io/binary.hpp"

namespace asl::io {

namespace {

std::pair<std::uint32_t, std::uint32_t> read_header(Reader& r) {
    r.expect_magic("ASLF");
    const auto version = r.u32("version");
    if (version != kFeatureFileVersion) {
        throw FormatError(r.source(), 4,
                          "unsupported feature file version " + std::to_string(version) + " (supported: 1)");
    }
    const auto rows = r.u32("row count");
    const auto cols = r.u32("column count");
    return {rows, cols};
}

}  // namespace

std::string encode_features(const FeatureMatrix& m) {
    if (m.values.size() != static_cast<std::size_t>(m.rows) * m.cols) {
        throw DataError("encode_features: " + std::to_string(m.values.size()) + " values for " +
                        std::to_string(m.rows) + "x" + std::to_string(m.cols));
    }
    std::string out = "ASLF";
    out.reserve(kFeatureHeaderBytes + 8 * m.values.size());
    put_u32(out, kFeatureFileVersion);
    put_u32(out, m.rows);
    put_u32(out, m.cols);
    for (double v : m.values) {
        if (!std::isfinite(v)) throw DataError("encode_features: non-finite value");
        put_f64(out, v);
    }
    return out;
}

FeatureMatrix decode_features(std::string_view bytes, const std::string& source) {
    Reader r(bytes, source);
    FeatureMatrix m;
    std::tie(m.rows, m.cols) = read_header(r);
    const std::size_t expected = 8ull * m.rows * m.cols;
    if (r.remaining() != expected) {
        r.fail((r.remaining() < expected ? "truncated payload: expected " : "trailing bytes: expected ") +
               std::to_string(expected) + " payload bytes, got " + std::to_string(r.remaining()));
    }
    m.values.resize(static_cast<std::size_t>(m.rows) * m.cols);
    for (auto& v : m.values) {
        const std::size_t at = r.offset();
        v = r.f64("value");
        if (!std::isfinite(v)) throw FormatError(source, at, "non-finite value");
    }
    return m;
}

void save_features(const std::string& path, const FeatureMatrix& m) { write_file(path, encode_features(m)); }

FeatureMatrix load_features(const std::string& path) { return decode_features(read_file(path), path); }

std::pair<std::uint32_t, std::uint32_t> peek_feature_shape(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string head(kFeatureHeaderBytes, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    Reader r(head, path);
    const auto shape = read_header(r);
    const auto size = std::filesystem::file_size(path);
    const auto expected = kFeatureHeaderBytes + 8ull * shape.first * shape.second;
    if (size != expected) {
        throw FormatError(path, kFeatureHeaderBytes,
                          "payload size mismatch: expected " + std::to_string(expected - kFeatureHeaderBytes) +
                              " bytes, got " + std::to_string(size - kFeatureHeaderBytes));
    }
    return shape;
}

}  // namespace asl::io
