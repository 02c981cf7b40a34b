// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/autodiff/array.hpp"

#include <atomic>
#include <sstream>

namespace asl::ad {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

ShapeError::ShapeError(const std::string& op, const Shape& a, const Shape& b)
    : std::invalid_argument(op + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b)) {}

ShapeError::ShapeError(const std::string& op, const std::string& detail)
    : std::invalid_argument(op + ": " + detail) {}

Array::Array() : node_(std::make_shared<detail::Node>()) {}

Array::Array(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
    if (shape_size(shape) != data.size()) {
        throw ShapeError("array", "shape " + shape_str(shape) + " needs " +
                                      std::to_string(shape_size(shape)) + " values, got " +
                                      std::to_string(data.size()));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
}

Array Array::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Array Array::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_size(shape);
    return Array(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Array Array::scalar(double value) { return Array({}, {value}); }

double Array::item() const {
    if (size() != 1) throw ShapeError("item", "array of shape " + shape_str(shape()) + " is not a scalar");
    return node_->value[0];
}

double Array::at(std::size_t i, std::size_t j) const {
    if (rank() != 2) throw ShapeError("at", "expected rank 2, got " + shape_str(shape()));
    return node_->value[i * node_->shape[1] + j];
}

std::vector<double> Array::grad() const {
    if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
    return node_->grad;
}

Array Array::clone() const {
    return Array(node_->shape, node_->value, node_->requires_grad);
}

Array Array::detach() const { return Array(node_->shape, node_->value, false); }

namespace {

std::atomic<std::uint64_t> next_tape_id{1};
thread_local Tape* active_tape = nullptr;

}  // namespace

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

Tape::~Tape() {
    if (active_tape == this) active_tape = nullptr;
}

Tape* Tape::active() { return active_tape; }

void Tape::reset() {
    entries_.clear();
    consumed_ = false;
    id_ = next_tape_id.fetch_add(1);
}

void Tape::backward(const Array& loss) {
    if (consumed_) throw TapeError("backward: tape already consumed; call reset() before reusing it");
    if (loss.size() != 1) {
        throw TapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    const auto& node = loss.node();
    if (!node->requires_grad) throw TapeError("backward: loss does not depend on any requires_grad array");
    if (node->tape_id != id_) throw TapeError("backward: loss was not recorded on this tape (stale tape)");
    consumed_ = true;
    node->ensure_grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    entries_.clear();
}

Tape::Scope::Scope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }

Tape::Scope::~Scope() { active_tape = previous_; }

}  // namespace asl::ad
