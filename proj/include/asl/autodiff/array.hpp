// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace asl::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Raised by any primitive whose operands have incompatible shapes. The
/// message names the operation and both shapes.
class ShapeError : public std::invalid_argument {
public:
    ShapeError(const std::string& op, const Shape& a, const Shape& b);
    ShapeError(const std::string& op, const std::string& detail);
};

/// Misuse of the tape: non-scalar loss, backward twice, foreign loss.
class TapeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::uint64_t tape_id = 0;

    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

/// Dense row-major array of 64-bit reals. Copies share storage; use clone()
/// for a deep copy. Leaves created with requires_grad accumulate gradients
/// across backward passes until zero_grad().
class Array {
public:
    Array();
    Array(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Array zeros(Shape shape, bool requires_grad = false);
    static Array full(Shape shape, double value, bool requires_grad = false);
    static Array scalar(double value);

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t size() const { return node_->value.size(); }
    bool empty() const { return node_->value.empty(); }

    std::span<const double> data() const { return node_->value; }
    /// Mutable view for optimizers and initializers. Writing into an array
    /// that already participates in a recorded graph invalidates that graph.
    std::span<double> mutable_data() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }

    double item() const;
    double operator[](std::size_t i) const { return node_->value[i]; }
    double at(std::size_t i, std::size_t j) const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient after backward; zeros if no gradient reached this array.
    std::vector<double> grad() const;
    void zero_grad() { node_->grad.clear(); }

    Array clone() const;
    Array detach() const;

    const detail::NodePtr& node() const { return node_; }
    explicit Array(detail::NodePtr node) : node_(std::move(node)) {}

private:
    detail::NodePtr node_;
};

/// Ordered record of executed operations. Operations record onto the tape
/// made active by a Tape::Scope on the current thread; backward replays the
/// record in exact reverse order.
class Tape {
public:
    using Entry = std::function<void()>;

    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape();

    void backward(const Array& loss);
    void reset();

    std::size_t size() const { return entries_.size(); }
    std::uint64_t id() const { return id_; }
    bool consumed() const { return consumed_; }

    void record(Entry entry) { entries_.push_back(std::move(entry)); }

    static Tape* active();

    class Scope {
    public:
        explicit Scope(Tape& tape);
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;
        ~Scope();

    private:
        Tape* previous_;
    };

private:
    std::uint64_t id_;
    bool consumed_ = false;
    std::vector<Entry> entries_;
};

}  // namespace asl::ad
