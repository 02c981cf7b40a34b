// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Plain-loop forward references for the attention blocks. Matrices are
// vectors of rows; nothing here touches the autodiff tape.

#pragma once

#include <cmath>
#include <vector>

#include "asl/network/layers.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const asl::ad::Array& a) {
    Mat m(a.dim(0), std::vector<double>(a.dim(1)));
    for (std::size_t i = 0; i < a.dim(0); ++i) {
        for (std::size_t j = 0; j < a.dim(1); ++j) m[i][j] = a.at(i, j);
    }
    return m;
}

inline Mat linear(const Mat& x, const asl::nn::Linear& l) {
    const std::size_t in = l.weight.dim(0), out = l.weight.dim(1);
    Mat y(x.size(), std::vector<double>(out));
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (std::size_t o = 0; o < out; ++o) {
            double s = l.bias[o];
            for (std::size_t i = 0; i < in; ++i) s += x[r][i] * l.weight.at(i, o);
            y[r][o] = s;
        }
    }
    return y;
}

inline Mat layer_norm(const Mat& x, const asl::nn::LayerNorm& ln, double eps = 1e-5) {
    Mat y = x;
    for (std::size_t r = 0; r < x.size(); ++r) {
        const double n = static_cast<double>(x[r].size());
        double mean = 0.0, var = 0.0;
        for (double v : x[r]) mean += v / n;
        for (double v : x[r]) var += (v - mean) * (v - mean) / n;
        for (std::size_t c = 0; c < x[r].size(); ++c) {
            y[r][c] = (x[r][c] - mean) / std::sqrt(var + eps) * ln.gain[c] + ln.bias[c];
        }
    }
    return y;
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

inline Mat feed_forward(const Mat& x, const asl::nn::FeedForward& f) {
    Mat h = linear(x, f.fc1);
    for (auto& row : h) {
        for (auto& v : row) v = gelu(v);
    }
    return linear(h, f.fc2);
}

inline Mat add(const Mat& a, const Mat& b, double scale_b = 1.0) {
    Mat y = a;
    for (std::size_t r = 0; r < a.size(); ++r) {
        for (std::size_t c = 0; c < a[r].size(); ++c) y[r][c] += scale_b * b[r][c];
    }
    return y;
}

/// Attention of query rows over key rows restricted to columns [b, e).
inline Mat attend(const Mat& q, const Mat& k, const Mat& v, std::size_t b, std::size_t e, double scale) {
    Mat out(q.size(), std::vector<double>(e - b, 0.0));
    for (std::size_t i = 0; i < q.size(); ++i) {
        std::vector<double> s(k.size());
        double top = -1e300;
        for (std::size_t j = 0; j < k.size(); ++j) {
            double dot = 0.0;
            for (std::size_t c = b; c < e; ++c) dot += q[i][c] * k[j][c];
            s[j] = dot * scale;
            top = std::max(top, s[j]);
        }
        double z = 0.0;
        for (auto& x : s) z += (x = std::exp(x - top));
        for (std::size_t j = 0; j < k.size(); ++j) {
            for (std::size_t c = b; c < e; ++c) out[i][c - b] += s[j] / z * v[j][c];
        }
    }
    return out;
}

inline Mat multi_head(const Mat& query_in, const Mat& kv_in, const asl::nn::MultiHeadAttention& m) {
    const Mat q = linear(query_in, m.q), k = linear(kv_in, m.k), v = linear(kv_in, m.v);
    const std::size_t width = q[0].size(), d = width / m.heads;
    Mat joined(q.size(), std::vector<double>(width));
    for (std::size_t h = 0; h < m.heads; ++h) {
        const Mat part = attend(q, k, v, h * d, (h + 1) * d, 1.0 / std::sqrt(static_cast<double>(d)));
        for (std::size_t r = 0; r < q.size(); ++r) {
            for (std::size_t c = 0; c < d; ++c) joined[r][h * d + c] = part[r][c];
        }
    }
    return linear(joined, m.out);
}

inline Mat transpose(const Mat& a) {
    Mat t(a[0].size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
    }
    return t;
}

/// Channels as tokens: each head attends among its contiguous channel
/// group, similarity taken over time and scaled by 1/sqrt(T).
inline Mat channel_attention(const Mat& x, const asl::nn::ChannelAttention& m) {
    const Mat qt = transpose(linear(x, m.q)), kt = transpose(linear(x, m.k)), vt = transpose(linear(x, m.v));
    const std::size_t width = qt.size(), group = width / m.heads, frames = x.size();
    Mat mixed(width, std::vector<double>(frames, 0.0));
    const double scale = 1.0 / std::sqrt(static_cast<double>(frames));
    for (std::size_t h = 0; h < m.heads; ++h) {
        for (std::size_t i = h * group; i < (h + 1) * group; ++i) {
            std::vector<double> s(group);
            double top = -1e300;
            for (std::size_t j = 0; j < group; ++j) {
                double dot = 0.0;
                for (std::size_t t = 0; t < frames; ++t) dot += qt[i][t] * kt[h * group + j][t];
                s[j] = dot * scale;
                top = std::max(top, s[j]);
            }
            double z = 0.0;
            for (auto& v : s) z += (v = std::exp(v - top));
            for (std::size_t j = 0; j < group; ++j) {
                for (std::size_t t = 0; t < frames; ++t) mixed[i][t] += s[j] / z * vt[h * group + j][t];
            }
        }
    }
    return linear(transpose(mixed), m.out);
}

inline Mat encoder_block(const Mat& x, const asl::nn::EncoderBlock& b) {
    const Mat n = layer_norm(x, b.ln1);
    const Mat both = add(multi_head(n, n, b.temporal), channel_attention(n, b.channel));
    const Mat y = add(x, both, 0.5);
    return add(y, feed_forward(layer_norm(y, b.ln2), b.ffn));
}

inline Mat self_attention_block(const Mat& x, const asl::nn::SelfAttentionBlock& b) {
    const Mat n = layer_norm(x, b.ln1);
    const Mat y = add(x, multi_head(n, n, b.attn));
    return add(y, feed_forward(layer_norm(y, b.ln2), b.ffn));
}

}  // namespace oracle
