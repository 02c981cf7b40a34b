// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <vector>

#include "asl/core.hpp"
#include "asl/network/model.hpp"

namespace asl::io {

struct QueryRecord {
    std::string id;
    TimeSegment segment;
    std::string text_path;  // [N_t, text_dim] feature file
};

struct VideoRecord {
    std::string id;
    double duration = 0.0;
    double stride_seconds = 1.0;
    std::vector<std::string> feature_paths;  // one per source
    std::vector<ActionInstance> instances;   // MQ
    std::vector<QueryRecord> queries;        // NLQ
};

/// A dataset description. Relative paths resolve against base_dir.
struct Manifest {
    Mode mode = Mode::MQ;
    std::size_t num_classes = 1;
    std::vector<VideoRecord> videos;
    std::vector<double> sensitive_positions;  // generator metadata, may be empty
    std::string base_dir;

    std::string resolve(const std::string& path) const;
};

/// JSON text <-> Manifest. Parsing checks the schema only.
std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text, const std::string& base_dir, const std::string& source);

void save_manifest(const std::string& path, const Manifest& m);
/// Parses and runs validate_manifest.
Manifest load_manifest(const std::string& path);

/// Referential checks: files exist with consistent shapes, ids unique,
/// segments inside the video, labels in range, duration within one stride
/// of T * stride_seconds. Throws DataError.
void validate_manifest(const Manifest& m);

}  // namespace asl::io
