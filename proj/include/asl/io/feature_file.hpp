// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace asl::io {

inline constexpr std::uint32_t kFeatureFileVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

/// A dense T x D matrix of doubles, time-major.
struct FeatureMatrix {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<double> values;

    bool operator==(const FeatureMatrix&) const = default;
};

/// "ASLF", u32 version, u32 T, u32 D, then T*D little-endian f64.
std::string encode_features(const FeatureMatrix& m);
FeatureMatrix decode_features(std::string_view bytes, const std::string& source = "<memory>");

void save_features(const std::string& path, const FeatureMatrix& m);
FeatureMatrix load_features(const std::string& path);

/// Header only: {T, D}. Validates magic, version and total size.
std::pair<std::uint32_t, std::uint32_t> peek_feature_shape(const std::string& path);

}  // namespace asl::io
