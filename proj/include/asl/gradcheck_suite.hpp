// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asl/autodiff/gradcheck.hpp"
#include "asl/network/model.hpp"

namespace asl {

struct GradCheckEntry {
    std::string name;
    std::size_t cases = 0;
    ad::GradCheckResult worst;
};

/// Central-difference checks of every autodiff primitive on `cases` random
/// shapes each.
std::vector<GradCheckEntry> primitive_gradcheck_suite(std::uint64_t seed, std::size_t cases = 20,
                                                      const ad::GradCheckOptions& options = {});

/// Full training loss (classification + localization, + NCE in NLQ mode)
/// of a small model on a synthetic batch. Checks `samples` random network
/// entries plus every sensitivity entry.
GradCheckEntry end_to_end_gradcheck(Mode mode, std::uint64_t seed, std::size_t samples = 64,
                                    const ad::GradCheckOptions& options = {});

}  // namespace asl
