// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include "asl/autodiff/array.hpp"

namespace asl {

/// Dense head outputs in pyramid-point order.
struct DenseOutput {
    ad::Array cls_logits;  // [P, C] raw logits
    ad::Array offsets;     // [P, 2] positive distances (start, end) in seconds

    std::size_t num_points() const { return cls_logits.rank() ? cls_logits.dim(0) : 0; }
    std::size_t num_classes() const { return cls_logits.rank() == 2 ? cls_logits.dim(1) : 0; }
};

}  // namespace asl
