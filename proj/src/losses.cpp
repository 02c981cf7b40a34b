// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "asl/autodiff/ops.hpp"

namespace asl {

namespace {

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

void LossConfig::validate() const {
    if (!(focal_alpha > 0.0 && focal_alpha < 1.0)) throw InvalidInput("loss.focal_alpha must lie in (0, 1)");
    if (!(focal_gamma >= 0.0)) throw InvalidInput("loss.focal_gamma must be >= 0");
    if (!(nce_temperature > 0.0)) throw InvalidInput("loss.nce_temperature must be > 0");
    if (!(lambda_loc >= 0.0) || !(lambda_nce >= 0.0)) throw InvalidInput("loss weights must be >= 0");
}

double focal_loss_logit(double logit, int y, double alpha, double gamma) {
    const double p = 1.0 / (1.0 + std::exp(-logit));
    if (y == 1) return alpha * std::pow(1.0 - p, gamma) * softplus_value(-logit);
    return (1.0 - alpha) * std::pow(p, gamma) * softplus_value(logit);
}

double focal_loss(double p, int y, double alpha, double gamma) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidInput("focal_loss: probability must lie in (0, 1)");
    return focal_loss_logit(std::log(p) - std::log1p(-p), y, alpha, gamma);
}

double diou_loss_1d(const TimeSegment& pred, const TimeSegment& gt) {
    const double inter = std::max(0.0, std::min(pred.end, gt.end) - std::max(pred.start, gt.start));
    const double uni = pred.duration() + gt.duration() - inter;
    const double enclose = std::max(pred.end, gt.end) - std::min(pred.start, gt.start);
    const double rho = pred.center() - gt.center();
    return 1.0 - inter / uni + rho * rho / (enclose * enclose);
}

LossTerm weighted_cls_loss(const ad::Array& cls_logits, const PointTargets& targets, const ad::Array& h_cls,
                           const LossConfig& config) {
    if (cls_logits.rank() != 2 || cls_logits.dim(0) != targets.size()) {
        throw ad::ShapeError("weighted_cls_loss", cls_logits.shape(), {targets.size()});
    }
    const std::size_t points = cls_logits.dim(0);
    const std::size_t classes = cls_logits.dim(1);
    const std::size_t n_pos = targets.num_positive();
    if (!h_cls.empty() && h_cls.size() != n_pos) {
        throw ad::ShapeError("weighted_cls_loss", "h_cls has " + std::to_string(h_cls.size()) + " weights for " +
                                                      std::to_string(n_pos) + " positives");
    }

    std::vector<double> onehot(points * classes, 0.0);
    std::vector<std::size_t> weight_index(points);
    std::size_t next_pos = 0;
    for (std::size_t i = 0; i < points; ++i) {
        if (targets.in_mask[i]) {
            const int label = targets.labels[i];
            if (label < 0 || static_cast<std::size_t>(label) >= classes) {
                throw InvalidInput("weighted_cls_loss: label out of range");
            }
            onehot[i * classes + static_cast<std::size_t>(label)] = 1.0;
            weight_index[i] = next_pos++;
        } else {
            weight_index[i] = n_pos;  // the trailing constant 1
        }
    }
    const ad::Array target({points, classes}, std::move(onehot));
    const ad::Array focal = ad::sigmoid_focal_loss(cls_logits, target, config.focal_alpha, config.focal_gamma);
    ad::Array per_point = ad::sum(focal, 1);
    if (!h_cls.empty() && n_pos > 0) {
        const ad::Array extended = ad::concat({h_cls, ad::Array({1}, {1.0})}, 0);
        per_point = ad::mul(per_point, ad::gather(extended, weight_index));
    }
    const double denom = static_cast<double>(std::max<std::size_t>(1, n_pos));
    return {ad::scale(ad::sum(per_point), 1.0 / denom), n_pos, n_pos == 0};
}

LossTerm weighted_cls_loss(const DenseOutput& dense, const PointTargets& targets, const ad::Array& h_cls,
                           const LossConfig& config) {
    return weighted_cls_loss(dense.cls_logits, targets, h_cls, config);
}

LossTerm weighted_loc_loss(const DenseOutput& dense, const PointTargets& targets, const ad::Array& h_loc) {
    const auto& off = dense.offsets;
    if (off.rank() != 2 || off.dim(1) != 2 || off.dim(0) != targets.size()) {
        throw ad::ShapeError("weighted_loc_loss", off.shape(), {targets.size(), 2});
    }
    const std::size_t n_pos = targets.num_positive();
    if (n_pos == 0) return {ad::Array::scalar(0.0), 0, true};
    if (!h_loc.empty() && h_loc.size() != n_pos) {
        throw ad::ShapeError("weighted_loc_loss", "h_loc has " + std::to_string(h_loc.size()) + " weights for " +
                                                      std::to_string(n_pos) + " positives");
    }
    std::vector<std::size_t> idx;
    std::vector<double> gt;
    idx.reserve(2 * n_pos);
    gt.reserve(2 * n_pos);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!targets.in_mask[i]) continue;
        idx.push_back(2 * i);
        idx.push_back(2 * i + 1);
        gt.push_back(targets.offset_start[i]);
        gt.push_back(targets.offset_end[i]);
    }
    const ad::Array pred = ad::reshape(ad::gather(off, idx), {n_pos, 2});
    ad::Array per_point = ad::diou_loss(pred, ad::Array({n_pos, 2}, std::move(gt)));
    if (!h_loc.empty()) per_point = ad::mul(per_point, h_loc);
    return {ad::scale(ad::sum(per_point), 1.0 / static_cast<double>(n_pos)), n_pos, false};
}

LossTerm info_nce_from_similarity(const ad::Array& similarity, std::span<const std::uint8_t> positive,
                                  double temperature) {
    if (similarity.size() != positive.size()) {
        throw ad::ShapeError("info_nce", similarity.shape(), {positive.size()});
    }
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < positive.size(); ++i) {
        if (positive[i]) pos.push_back(i);
    }
    if (pos.empty() || pos.size() == positive.size()) return {ad::Array::scalar(0.0), pos.size(), true};
    const ad::Array logits = ad::scale(ad::reshape(similarity, {similarity.size()}), 1.0 / temperature);
    const ad::Array logp = ad::log_softmax(logits, 0);
    return {ad::neg(ad::mean(ad::gather(logp, pos))), pos.size(), false};
}

LossTerm info_nce(const ad::Array& frame_feats, const ad::Array& query, std::span<const std::uint8_t> positive,
                  double temperature) {
    if (frame_feats.rank() != 2) throw ad::ShapeError("info_nce", "frame features must be [T, D]");
    const std::size_t d = frame_feats.dim(1);
    if (query.size() != d) throw ad::ShapeError("info_nce", frame_feats.shape(), query.shape());
    constexpr double eps = 1e-12;
    const ad::Array q = ad::reshape(query, {1, d});
    const ad::Array fn =
        ad::div(frame_feats, ad::sqrt(ad::add_scalar(ad::sum(ad::mul(frame_feats, frame_feats), 1, true), eps)));
    const ad::Array qn = ad::div(q, ad::sqrt(ad::add_scalar(ad::sum(ad::mul(q, q), 1, true), eps)));
    const ad::Array sim = ad::matmul(fn, ad::transpose(qn));
    return info_nce_from_similarity(sim, positive, temperature);
}

PointTargets concat_targets(const std::vector<PointTargets>& parts, std::span<const std::size_t> instances_per_part) {
    if (instances_per_part.size() != parts.size()) throw InvalidInput("concat_targets: count mismatch");
    PointTargets out;
    std::size_t shift = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto& t = parts[p];
        out.labels.insert(out.labels.end(), t.labels.begin(), t.labels.end());
        out.offset_start.insert(out.offset_start.end(), t.offset_start.begin(), t.offset_start.end());
        out.offset_end.insert(out.offset_end.end(), t.offset_end.begin(), t.offset_end.end());
        out.in_mask.insert(out.in_mask.end(), t.in_mask.begin(), t.in_mask.end());
        out.bg_mask.insert(out.bg_mask.end(), t.bg_mask.begin(), t.bg_mask.end());
        for (const auto& m : t.matched) {
            out.matched.push_back(m ? std::optional<std::size_t>(*m + shift) : std::nullopt);
        }
        shift += instances_per_part[p];
    }
    return out;
}

}  // namespace asl
