// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <vector>

#include "asl/metrics.hpp"

namespace asl::io {

/// Human-readable table.
std::string report_text(const EvalReport& report);
/// Sorted key=value lines (values with 12 decimals), stable across runs.
std::string report_kv(const EvalReport& report);

/// "label\ttiou\trank\trecall\tprecision" rows for plotting.
std::string pr_dump(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruth>& gts,
                    const std::vector<double>& thresholds);

}  // namespace asl::io
