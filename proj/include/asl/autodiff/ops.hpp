// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "asl/autodiff/array.hpp"

namespace asl::ad {

// Elementwise binary ops broadcast with numpy rules (right-aligned dims,
// size-1 dims stretch).
Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array div(const Array& a, const Array& b);

Array scale(const Array& a, double factor);
Array add_scalar(const Array& a, double value);
Array neg(const Array& a);

Array relu(const Array& a);
/// Exact GELU, x * Phi(x).
Array gelu(const Array& a);
Array sigmoid(const Array& a);
Array softplus(const Array& a);
Array exp(const Array& a);
Array log(const Array& a);
Array sqrt(const Array& a);

Array matmul(const Array& a, const Array& b);
Array transpose(const Array& a);
Array reshape(const Array& a, Shape shape);

Array softmax(const Array& a, std::size_t axis);
Array log_softmax(const Array& a, std::size_t axis);
/// Normalizes over the last axis, then applies per-feature gain and bias.
Array layer_norm(const Array& x, const Array& gain, const Array& bias, double eps = 1e-5);

Array sum(const Array& a);
Array mean(const Array& a);
Array sum(const Array& a, std::size_t axis, bool keepdim = false);
Array mean(const Array& a, std::size_t axis, bool keepdim = false);

Array concat(const std::vector<Array>& parts, std::size_t axis);
Array slice(const Array& a, std::size_t axis, std::size_t begin, std::size_t end);

/// x: [T, Cin], weight: [K, Cin, Cout], bias: [Cout] or empty. Same padding
/// (K odd), output length ceil(T / stride).
Array conv1d(const Array& x, const Array& weight, const Array& bias, std::size_t stride = 1);
/// Per-channel convolution. x: [T, C], weight: [K, C], bias: [C] or empty.
Array depthwise_conv1d(const Array& x, const Array& weight, const Array& bias,
                       std::size_t stride = 1);

/// Multi-head scaled dot-product attention. q: [Tq, d], k: [Tk, d],
/// v: [Tk, dv]; heads split d and dv evenly. key_mask (length Tk, nonzero =
/// valid) excludes keys from the softmax. scale defaults to 1/sqrt(d/heads).
Array scaled_dot_attention(const Array& q, const Array& k, const Array& v,
                           std::span<const std::uint8_t> key_mask = {}, std::size_t heads = 1,
                           std::optional<double> scale = std::nullopt);

/// Attention probabilities per head ([Tq, Tk] each), value-only.
std::vector<std::vector<double>> attention_probabilities(const Array& q, const Array& k,
                                                         std::span<const std::uint8_t> key_mask,
                                                         std::size_t heads,
                                                         std::optional<double> scale = std::nullopt);

/// out[i] = flat(x)[indices[i]]; backward scatter-adds.
Array gather(const Array& x, std::span<const std::size_t> indices);
/// out[s] = sum of flat(x)[i] with segment_ids[i] == s.
Array segment_sum(const Array& x, std::span<const std::size_t> segment_ids, std::size_t segments);

/// Elementwise sigmoid focal loss evaluated in logit space. targets are 0/1.
Array sigmoid_focal_loss(const Array& logits, const Array& targets, double alpha, double gamma);

/// 1D distance-IoU loss per row. pred, target: [N, 2] non-negative offsets
/// (to start, to end) around a shared anchor time. Gradient flows to pred.
Array diou_loss(const Array& pred, const Array& target);

}  // namespace asl::ad
