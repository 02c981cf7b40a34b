// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "asl/network/model.hpp"

namespace asl::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    std::uint32_t epoch = 0;
    std::vector<std::pair<std::string, ad::Array>> params;
};

Checkpoint snapshot(const Model& model, std::uint32_t epoch);
/// Builds a model with the stored config and loads every parameter.
Model instantiate(const Checkpoint& ckpt);

/// "ASLM", u32 version, u32 epoch, u32 config length, config text,
/// u32 count, then per parameter: u32 name length, name, u32 rank,
/// u64 dims, little-endian f64 values.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::string& path, const Model& model, std::uint32_t epoch);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace asl::io
