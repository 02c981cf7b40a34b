// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <vector>

#include "asl/postprocess.hpp"

namespace asl::io {

/// Tab-separated: a header line, then video_id, label, start_s, end_s,
/// score per line, all reals fixed-point with 6 decimals. NLQ files carry
/// the query id in the first column.
std::string encode_predictions(const std::vector<SegmentPrediction>& preds);
std::vector<SegmentPrediction> decode_predictions(const std::string& text, const std::string& source = "<memory>");

void save_predictions(const std::string& path, const std::vector<SegmentPrediction>& preds);
std::vector<SegmentPrediction> load_predictions(const std::string& path);

}  // namespace asl::io
