// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/autodiff/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace asl::ad {

namespace {

using detail::Node;
using detail::NodePtr;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;
using Strided = Eigen::OuterStride<>;
using CStridedMap = Eigen::Map<const RowMat, 0, Strided>;
using MStridedMap = Eigen::Map<RowMat, 0, Strided>;

template <class F>
Array record(Array out, bool any_input_requires_grad, F&& fn) {
    Tape* tape = Tape::active();
    if (!tape || !any_input_requires_grad) return out;
    const NodePtr& o = out.node();
    o->requires_grad = true;
    o->tape_id = tape->id();
    tape->record([o, fn = std::forward<F>(fn)]() mutable {
        if (!o->grad.empty()) fn(o->grad);
    });
    return out;
}

template <class F>
Array record(Array out, std::initializer_list<const Array*> inputs, F&& fn) {
    bool any = false;
    for (const Array* in : inputs) any = any || in->requires_grad();
    return record(std::move(out), any, std::forward<F>(fn));
}

std::vector<double>* grad_of(const NodePtr& n) {
    return n->requires_grad ? &n->ensure_grad() : nullptr;
}

void require_rank(const char* op, const Array& a, std::size_t rank) {
    if (a.rank() != rank) {
        throw ShapeError(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(a.shape()));
    }
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_value(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// ---------------------------------------------------------------- broadcast

struct Broadcast {
    Shape out;
    bool same = true;
    std::vector<std::size_t> ia;
    std::vector<std::size_t> ib;
};

Broadcast broadcast(const char* op, const Shape& a, const Shape& b) {
    Broadcast bc;
    if (a == b) {
        bc.out = a;
        return bc;
    }
    bc.same = false;
    const std::size_t rank = std::max(a.size(), b.size());
    bc.out.assign(rank, 1);
    std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
    std::size_t stride_a = 1, stride_b = 1;
    for (std::size_t r = 0; r < rank; ++r) {
        const std::size_t axis = rank - 1 - r;
        const std::size_t da = r < a.size() ? a[a.size() - 1 - r] : 1;
        const std::size_t db = r < b.size() ? b[b.size() - 1 - r] : 1;
        if (da != db && da != 1 && db != 1) throw ShapeError(op, a, b);
        bc.out[axis] = std::max(da, db);
        sa[axis] = da == 1 ? 0 : stride_a;
        sb[axis] = db == 1 ? 0 : stride_b;
        stride_a *= da;
        stride_b *= db;
    }
    const std::size_t n = shape_size(bc.out);
    bc.ia.resize(n);
    bc.ib.resize(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t off_a = 0, off_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bc.ia[i] = off_a;
        bc.ib[i] = off_b;
        for (std::size_t axis = rank; axis-- > 0;) {
            ++idx[axis];
            off_a += sa[axis];
            off_b += sb[axis];
            if (idx[axis] < bc.out[axis]) break;
            off_a -= sa[axis] * idx[axis];
            off_b -= sb[axis] * idx[axis];
            idx[axis] = 0;
        }
    }
    return bc;
}

template <class Fwd, class DA, class DB>
Array binary(const char* op, const Array& a, const Array& b, Fwd f, DA dfa, DB dfb) {
    auto bc = std::make_shared<Broadcast>(broadcast(op, a.shape(), b.shape()));
    const auto& av = a.values();
    const auto& bv = b.values();
    const std::size_t n = shape_size(bc->out);
    std::vector<double> out(n);
    if (bc->same) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(av[bc->ia[i]], bv[bc->ib[i]]);
    }
    Array result(bc->out, std::move(out));
    return record(std::move(result), {&a, &b},
                  [an = a.node(), bn = b.node(), bc, dfa, dfb](const std::vector<double>& g) {
                      auto* ga = grad_of(an);
                      auto* gb = grad_of(bn);
                      const auto& av = an->value;
                      const auto& bv = bn->value;
                      for (std::size_t i = 0; i < g.size(); ++i) {
                          const std::size_t ia = bc->same ? i : bc->ia[i];
                          const std::size_t ib = bc->same ? i : bc->ib[i];
                          if (ga) (*ga)[ia] += g[i] * dfa(av[ia], bv[ib]);
                          if (gb) (*gb)[ib] += g[i] * dfb(av[ia], bv[ib]);
                      }
                  });
}

/// df(x, y) returns dy/dx given input x and output y.
template <class Fwd, class DF>
Array unary(const Array& a, Fwd f, DF df) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    Array result(a.shape(), std::move(out));
    auto on = result.node();
    std::weak_ptr<Node> weak_out = on;
    return record(std::move(result), {&a}, [an = a.node(), weak_out, df](const std::vector<double>& g) {
        auto* ga = grad_of(an);
        if (!ga) return;
        auto o = weak_out.lock();
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * df(an->value[i], o->value[i]);
    });
}

struct AxisSplit {
    std::size_t outer = 1, axis = 1, inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
        throw ShapeError(op, "axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    }
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.axis = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

// ------------------------------------------------------------- elementwise

Array add(const Array& a, const Array& b) {
    return binary("add", a, b, [](double x, double y) { return x + y; },
                  [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Array sub(const Array& a, const Array& b) {
    return binary("sub", a, b, [](double x, double y) { return x - y; },
                  [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Array mul(const Array& a, const Array& b) {
    return binary("mul", a, b, [](double x, double y) { return x * y; },
                  [](double, double y) { return y; }, [](double x, double) { return x; });
}

Array div(const Array& a, const Array& b) {
    return binary("div", a, b, [](double x, double y) { return x / y; },
                  [](double, double y) { return 1.0 / y; },
                  [](double x, double y) { return -x / (y * y); });
}

Array scale(const Array& a, double factor) {
    return unary(a, [factor](double x) { return x * factor; },
                 [factor](double, double) { return factor; });
}

Array add_scalar(const Array& a, double value) {
    return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Array neg(const Array& a) { return scale(a, -1.0); }

Array relu(const Array& a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; },
                 [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Array gelu(const Array& a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt_2pi = 0.39894228040143267794;
    return unary(
        a, [](double x) { return 0.5 * x * std::erfc(-x * inv_sqrt2); },
        [](double x, double) {
            return 0.5 * std::erfc(-x * inv_sqrt2) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
        });
}

Array sigmoid(const Array& a) {
    return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Array softplus(const Array& a) {
    return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Array exp(const Array& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Array log(const Array& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Array sqrt(const Array& a) {
    return unary(a, [](double x) { return std::sqrt(x); },
                 [](double, double y) { return 0.5 / y; });
}

// ------------------------------------------------------------------ linear

Array matmul(const Array& a, const Array& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    if (a.dim(1) != b.dim(0)) throw ShapeError("matmul", a.shape(), b.shape());
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    MMap(out.data(), m, n).noalias() = CMap(a.data().data(), m, k) * CMap(b.data().data(), k, n);
    Array result({m, n}, std::move(out));
    return record(std::move(result), {&a, &b},
                  [an = a.node(), bn = b.node(), m, k, n](const std::vector<double>& g) {
                      CMap gm(g.data(), m, n);
                      if (auto* ga = grad_of(an)) {
                          MMap(ga->data(), m, k).noalias() += gm * CMap(bn->value.data(), k, n).transpose();
                      }
                      if (auto* gb = grad_of(bn)) {
                          MMap(gb->data(), k, n).noalias() += CMap(an->value.data(), m, k).transpose() * gm;
                      }
                  });
}

Array transpose(const Array& a) {
    require_rank("transpose", a, 2);
    const std::size_t r = a.dim(0), c = a.dim(1);
    std::vector<double> out(r * c);
    MMap(out.data(), c, r) = CMap(a.data().data(), r, c).transpose();
    Array result({c, r}, std::move(out));
    return record(std::move(result), {&a}, [an = a.node(), r, c](const std::vector<double>& g) {
        if (auto* ga = grad_of(an)) MMap(ga->data(), r, c) += CMap(g.data(), c, r).transpose();
    });
}

Array reshape(const Array& a, Shape shape) {
    if (shape_size(shape) != a.size()) throw ShapeError("reshape", a.shape(), shape);
    Array result(std::move(shape), a.values());
    return record(std::move(result), {&a}, [an = a.node()](const std::vector<double>& g) {
        if (auto* ga = grad_of(an)) {
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        }
    });
}

// ------------------------------------------------------------ normalizers

Array softmax(const Array& a, std::size_t axis) {
    const auto s = split_axis("softmax", a.shape(), axis);
    const auto& x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.axis * s.inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < s.axis; ++j) mx = std::max(mx, x[base + j * s.inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < s.axis; ++j) {
                const double e = std::exp(x[base + j * s.inner] - mx);
                y[base + j * s.inner] = e;
                z += e;
            }
            for (std::size_t j = 0; j < s.axis; ++j) y[base + j * s.inner] /= z;
        }
    }
    Array result(a.shape(), std::move(y));
    std::weak_ptr<Node> weak_out = result.node();
    return record(std::move(result), {&a}, [an = a.node(), weak_out, s](const std::vector<double>& g) {
        auto* ga = grad_of(an);
        if (!ga) return;
        const auto& y = weak_out.lock()->value;
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t in = 0; in < s.inner; ++in) {
                const std::size_t base = o * s.axis * s.inner + in;
                double dot = 0.0;
                for (std::size_t j = 0; j < s.axis; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
                for (std::size_t j = 0; j < s.axis; ++j) {
                    const std::size_t p = base + j * s.inner;
                    (*ga)[p] += y[p] * (g[p] - dot);
                }
            }
        }
    });
}

Array log_softmax(const Array& a, std::size_t axis) {
    const auto s = split_axis("log_softmax", a.shape(), axis);
    const auto& x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.axis * s.inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < s.axis; ++j) mx = std::max(mx, x[base + j * s.inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < s.axis; ++j) z += std::exp(x[base + j * s.inner] - mx);
            const double lse = mx + std::log(z);
            for (std::size_t j = 0; j < s.axis; ++j) y[base + j * s.inner] = x[base + j * s.inner] - lse;
        }
    }
    Array result(a.shape(), std::move(y));
    std::weak_ptr<Node> weak_out = result.node();
    return record(std::move(result), {&a}, [an = a.node(), weak_out, s](const std::vector<double>& g) {
        auto* ga = grad_of(an);
        if (!ga) return;
        const auto& y = weak_out.lock()->value;
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t in = 0; in < s.inner; ++in) {
                const std::size_t base = o * s.axis * s.inner + in;
                double gsum = 0.0;
                for (std::size_t j = 0; j < s.axis; ++j) gsum += g[base + j * s.inner];
                for (std::size_t j = 0; j < s.axis; ++j) {
                    const std::size_t p = base + j * s.inner;
                    (*ga)[p] += g[p] - std::exp(y[p]) * gsum;
                }
            }
        }
    });
}

Array layer_norm(const Array& x, const Array& gain, const Array& bias, double eps) {
    if (x.rank() == 0) throw ShapeError("layer_norm", "scalar input");
    const std::size_t width = x.shape().back();
    if (gain.size() != width) throw ShapeError("layer_norm", x.shape(), gain.shape());
    if (bias.size() != width) throw ShapeError("layer_norm", x.shape(), bias.shape());
    const std::size_t rows = x.size() / std::max<std::size_t>(width, 1);
    const auto& xv = x.values();
    const auto& gv = gain.values();
    const auto& bv = bias.values();
    auto xhat = std::make_shared<std::vector<double>>(xv.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    std::vector<double> y(xv.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv.data() + r * width;
        double mu = 0.0;
        for (std::size_t j = 0; j < width; ++j) mu += row[j];
        mu /= static_cast<double>(width);
        double var = 0.0;
        for (std::size_t j = 0; j < width; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(width);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        for (std::size_t j = 0; j < width; ++j) {
            const double h = (row[j] - mu) * inv;
            (*xhat)[r * width + j] = h;
            y[r * width + j] = h * gv[j] + bv[j];
        }
    }
    Array result(x.shape(), std::move(y));
    return record(std::move(result), {&x, &gain, &bias},
                  [xn = x.node(), gn = gain.node(), bn = bias.node(), xhat, inv_std, rows,
                   width](const std::vector<double>& g) {
                      auto* gx = grad_of(xn);
                      auto* gg = grad_of(gn);
                      auto* gb = grad_of(bn);
                      const auto& gain = gn->value;
                      const double n = static_cast<double>(width);
                      std::vector<double> dxhat(width);
                      for (std::size_t r = 0; r < rows; ++r) {
                          const double* gr = g.data() + r * width;
                          const double* hr = xhat->data() + r * width;
                          double sum_d = 0.0, sum_dh = 0.0;
                          for (std::size_t j = 0; j < width; ++j) {
                              if (gg) (*gg)[j] += gr[j] * hr[j];
                              if (gb) (*gb)[j] += gr[j];
                              dxhat[j] = gr[j] * gain[j];
                              sum_d += dxhat[j];
                              sum_dh += dxhat[j] * hr[j];
                          }
                          if (!gx) continue;
                          const double inv = (*inv_std)[r];
                          for (std::size_t j = 0; j < width; ++j) {
                              (*gx)[r * width + j] += inv / n * (n * dxhat[j] - sum_d - hr[j] * sum_dh);
                          }
                      }
                  });
}

// -------------------------------------------------------------- reductions

Array sum(const Array& a) {
    double total = 0.0;
    for (double v : a.values()) total += v;
    return record(Array::scalar(total), {&a}, [an = a.node()](const std::vector<double>& g) {
        if (auto* ga = grad_of(an)) {
            for (auto& v : *ga) v += g[0];
        }
    });
}

Array mean(const Array& a) {
    if (a.size() == 0) throw ShapeError("mean", "empty array");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Array sum(const Array& a, std::size_t axis, bool keepdim) {
    const auto s = split_axis("sum", a.shape(), axis);
    Shape out_shape = a.shape();
    if (keepdim) {
        out_shape[axis] = 1;
    } else {
        out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    }
    const auto& x = a.values();
    std::vector<double> y(s.outer * s.inner, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.axis; ++j) {
            for (std::size_t in = 0; in < s.inner; ++in) {
                y[o * s.inner + in] += x[(o * s.axis + j) * s.inner + in];
            }
        }
    }
    Array result(std::move(out_shape), std::move(y));
    return record(std::move(result), {&a}, [an = a.node(), s](const std::vector<double>& g) {
        auto* ga = grad_of(an);
        if (!ga) return;
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t j = 0; j < s.axis; ++j) {
                for (std::size_t in = 0; in < s.inner; ++in) {
                    (*ga)[(o * s.axis + j) * s.inner + in] += g[o * s.inner + in];
                }
            }
        }
    });
}

Array mean(const Array& a, std::size_t axis, bool keepdim) {
    const auto s = split_axis("mean", a.shape(), axis);
    if (s.axis == 0) throw ShapeError("mean", "empty axis in " + shape_str(a.shape()));
    return scale(sum(a, axis, keepdim), 1.0 / static_cast<double>(s.axis));
}

// ---------------------------------------------------------- concat / slice

Array concat(const std::vector<Array>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat", "no inputs");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw ShapeError("concat", "axis out of range for " + shape_str(first));
    Shape out_shape = first;
    out_shape[axis] = 0;
    bool any = false;
    for (const auto& p : parts) {
        if (p.rank() != first.size()) throw ShapeError("concat", first, p.shape());
        for (std::size_t d = 0; d < first.size(); ++d) {
            if (d != axis && p.dim(d) != first[d]) throw ShapeError("concat", first, p.shape());
        }
        out_shape[axis] += p.dim(axis);
        any = any || p.requires_grad();
    }
    const auto s = split_axis("concat", out_shape, axis);
    std::vector<double> out(shape_size(out_shape));
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const std::size_t block = p.dim(axis) * s.inner;
        const auto& pv = p.values();
        for (std::size_t o = 0; o < s.outer; ++o) {
            std::copy_n(pv.data() + o * block, block, out.data() + o * s.axis * s.inner + offset);
        }
        offset += block;
    }
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    Array result(std::move(out_shape), std::move(out));
    return record(std::move(result), any,
                  [nodes = std::move(nodes), offsets = std::move(offsets), s, axis](const std::vector<double>& g) {
                      for (std::size_t i = 0; i < nodes.size(); ++i) {
                          auto* gp = grad_of(nodes[i]);
                          if (!gp) continue;
                          const std::size_t block = nodes[i]->shape[axis] * s.inner;
                          for (std::size_t o = 0; o < s.outer; ++o) {
                              const double* src = g.data() + o * s.axis * s.inner + offsets[i];
                              double* dst = gp->data() + o * block;
                              for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
                          }
                      }
                  });
}

Array slice(const Array& a, std::size_t axis, std::size_t begin, std::size_t end) {
    const auto s = split_axis("slice", a.shape(), axis);
    if (begin > end || end > s.axis) {
        throw ShapeError("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                                      ") out of bounds for " + shape_str(a.shape()));
    }
    Shape out_shape = a.shape();
    out_shape[axis] = end - begin;
    const std::size_t block = (end - begin) * s.inner;
    const auto& x = a.values();
    std::vector<double> out(s.outer * block);
    for (std::size_t o = 0; o < s.outer; ++o) {
        std::copy_n(x.data() + (o * s.axis + begin) * s.inner, block, out.data() + o * block);
    }
    Array result(std::move(out_shape), std::move(out));
    return record(std::move(result), {&a}, [an = a.node(), s, begin, block](const std::vector<double>& g) {
        auto* ga = grad_of(an);
        if (!ga) return;
        for (std::size_t o = 0; o < s.outer; ++o) {
            double* dst = ga->data() + (o * s.axis + begin) * s.inner;
            const double* src = g.data() + o * block;
            for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
        }
    });
}

// ------------------------------------------------------------ convolutions

namespace {

struct ConvRange {
    std::size_t out_begin = 0, count = 0, in_begin = 0;
};

// Output rows i whose input row i*stride + k - pad lies in [0, len).
ConvRange conv_range(std::size_t len, std::size_t out_len, std::size_t stride, std::size_t k,
                     std::size_t pad) {
    ConvRange r;
    std::size_t i0 = 0;
    if (k < pad) i0 = (pad - k + stride - 1) / stride;
    if (i0 >= out_len) return r;
    // largest i with i*stride + k - pad <= len - 1
    const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(len) - 1 + static_cast<std::ptrdiff_t>(pad) -
                               static_cast<std::ptrdiff_t>(k);
    if (top < 0) return r;
    const std::size_t i1 = std::min(out_len - 1, static_cast<std::size_t>(top) / stride);
    if (i1 < i0) return r;
    r.out_begin = i0;
    r.count = i1 - i0 + 1;
    r.in_begin = i0 * stride + k - pad;
    return r;
}

}  // namespace

Array conv1d(const Array& x, const Array& weight, const Array& bias, std::size_t stride) {
    require_rank("conv1d", x, 2);
    require_rank("conv1d", weight, 3);
    const std::size_t len = x.dim(0), cin = x.dim(1);
    const std::size_t kernel = weight.dim(0), cout = weight.dim(2);
    if (weight.dim(1) != cin) throw ShapeError("conv1d", x.shape(), weight.shape());
    if (kernel % 2 == 0) throw ShapeError("conv1d", "kernel size must be odd, got " + std::to_string(kernel));
    if (!bias.empty() && bias.size() != cout) throw ShapeError("conv1d", weight.shape(), bias.shape());
    if (stride == 0) throw ShapeError("conv1d", "stride must be positive");
    const std::size_t pad = kernel / 2;
    const std::size_t out_len = (len + stride - 1) / stride;
    std::vector<double> out(out_len * cout, 0.0);
    MMap om(out.data(), out_len, cout);
    if (!bias.empty()) {
        Eigen::Map<const Eigen::RowVectorXd> bm(bias.data().data(), cout);
        om.rowwise() = bm;
    }
    for (std::size_t k = 0; k < kernel; ++k) {
        const auto r = conv_range(len, out_len, stride, k, pad);
        if (r.count == 0) continue;
        CStridedMap xs(x.data().data() + r.in_begin * cin, r.count, cin, Strided(stride * cin));
        CMap wk(weight.data().data() + k * cin * cout, cin, cout);
        om.middleRows(r.out_begin, r.count).noalias() += xs * wk;
    }
    Array result({out_len, cout}, std::move(out));
    return record(std::move(result), {&x, &weight, &bias},
                  [xn = x.node(), wn = weight.node(), bn = bias.node(), len, cin, cout, kernel, pad, stride,
                   out_len](const std::vector<double>& g) {
                      CMap gm(g.data(), out_len, cout);
                      auto* gx = grad_of(xn);
                      auto* gw = grad_of(wn);
                      auto* gb = bn->value.empty() ? nullptr : grad_of(bn);
                      if (gb) Eigen::Map<Eigen::RowVectorXd>(gb->data(), cout) += gm.colwise().sum();
                      for (std::size_t k = 0; k < kernel; ++k) {
                          const auto r = conv_range(len, out_len, stride, k, pad);
                          if (r.count == 0) continue;
                          const auto gblock = gm.middleRows(r.out_begin, r.count);
                          if (gx) {
                              MStridedMap dx(gx->data() + r.in_begin * cin, r.count, cin, Strided(stride * cin));
                              dx.noalias() += gblock * CMap(wn->value.data() + k * cin * cout, cin, cout).transpose();
                          }
                          if (gw) {
                              CStridedMap xs(xn->value.data() + r.in_begin * cin, r.count, cin,
                                             Strided(stride * cin));
                              MMap(gw->data() + k * cin * cout, cin, cout).noalias() += xs.transpose() * gblock;
                          }
                      }
                  });
}

Array depthwise_conv1d(const Array& x, const Array& weight, const Array& bias, std::size_t stride) {
    require_rank("depthwise_conv1d", x, 2);
    require_rank("depthwise_conv1d", weight, 2);
    const std::size_t len = x.dim(0), ch = x.dim(1), kernel = weight.dim(0);
    if (weight.dim(1) != ch) throw ShapeError("depthwise_conv1d", x.shape(), weight.shape());
    if (kernel % 2 == 0) throw ShapeError("depthwise_conv1d", "kernel size must be odd");
    if (!bias.empty() && bias.size() != ch) throw ShapeError("depthwise_conv1d", x.shape(), bias.shape());
    if (stride == 0) throw ShapeError("depthwise_conv1d", "stride must be positive");
    const std::size_t pad = kernel / 2;
    const std::size_t out_len = (len + stride - 1) / stride;
    const auto& xv = x.values();
    const auto& wv = weight.values();
    std::vector<double> out(out_len * ch, 0.0);
    for (std::size_t i = 0; i < out_len; ++i) {
        for (std::size_t c = 0; c < ch; ++c) out[i * ch + c] = bias.empty() ? 0.0 : bias[c];
        for (std::size_t k = 0; k < kernel; ++k) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i * stride + k) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            for (std::size_t c = 0; c < ch; ++c) out[i * ch + c] += xv[src * ch + c] * wv[k * ch + c];
        }
    }
    Array result({out_len, ch}, std::move(out));
    return record(std::move(result), {&x, &weight, &bias},
                  [xn = x.node(), wn = weight.node(), bn = bias.node(), len, ch, kernel, pad, stride,
                   out_len](const std::vector<double>& g) {
                      auto* gx = grad_of(xn);
                      auto* gw = grad_of(wn);
                      auto* gb = bn->value.empty() ? nullptr : grad_of(bn);
                      for (std::size_t i = 0; i < out_len; ++i) {
                          if (gb) {
                              for (std::size_t c = 0; c < ch; ++c) (*gb)[c] += g[i * ch + c];
                          }
                          for (std::size_t k = 0; k < kernel; ++k) {
                              const std::ptrdiff_t src =
                                  static_cast<std::ptrdiff_t>(i * stride + k) - static_cast<std::ptrdiff_t>(pad);
                              if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                              for (std::size_t c = 0; c < ch; ++c) {
                                  const double gi = g[i * ch + c];
                                  if (gx) (*gx)[src * ch + c] += gi * wn->value[k * ch + c];
                                  if (gw) (*gw)[k * ch + c] += gi * xn->value[src * ch + c];
                              }
                          }
                      }
                  });
}

// --------------------------------------------------------------- attention

namespace {

struct AttentionDims {
    std::size_t tq, tk, d, dv, heads, dh, dvh;
    double scale;
};

AttentionDims attention_dims(const Array& q, const Array& k, const Array* v, std::span<const std::uint8_t> mask,
                             std::size_t heads, std::optional<double> scale) {
    require_rank("scaled_dot_attention", q, 2);
    require_rank("scaled_dot_attention", k, 2);
    if (q.dim(1) != k.dim(1)) throw ShapeError("scaled_dot_attention", q.shape(), k.shape());
    AttentionDims dims{};
    dims.tq = q.dim(0);
    dims.tk = k.dim(0);
    dims.d = q.dim(1);
    dims.dv = dims.d;
    if (v) {
        require_rank("scaled_dot_attention", *v, 2);
        if (v->dim(0) != dims.tk) throw ShapeError("scaled_dot_attention", k.shape(), v->shape());
        dims.dv = v->dim(1);
    }
    if (heads == 0 || dims.d % heads != 0 || dims.dv % heads != 0) {
        throw ShapeError("scaled_dot_attention",
                         "head count " + std::to_string(heads) + " does not divide " + shape_str(q.shape()));
    }
    if (!mask.empty() && mask.size() != dims.tk) {
        throw ShapeError("scaled_dot_attention", "mask length " + std::to_string(mask.size()) +
                                                     " vs key count " + std::to_string(dims.tk));
    }
    if (dims.tk == 0) throw ShapeError("scaled_dot_attention", "no keys");
    if (!mask.empty() && std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
        throw ShapeError("scaled_dot_attention", "all keys masked");
    }
    dims.heads = heads;
    dims.dh = dims.d / heads;
    dims.dvh = dims.dv / heads;
    dims.scale = scale.value_or(1.0 / std::sqrt(static_cast<double>(dims.dh)));
    return dims;
}

RowMat attention_probs_head(const AttentionDims& dims, CMap qm, CMap km, std::span<const std::uint8_t> mask,
                            std::size_t h) {
    RowMat p = (qm.middleCols(h * dims.dh, dims.dh) * km.middleCols(h * dims.dh, dims.dh).transpose()) * dims.scale;
    for (std::size_t i = 0; i < dims.tq; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < dims.tk; ++j) {
            if (mask.empty() || mask[j]) mx = std::max(mx, p(i, j));
        }
        double z = 0.0;
        for (std::size_t j = 0; j < dims.tk; ++j) {
            if (mask.empty() || mask[j]) {
                p(i, j) = std::exp(p(i, j) - mx);
                z += p(i, j);
            } else {
                p(i, j) = 0.0;
            }
        }
        p.row(i) /= z;
    }
    return p;
}

}  // namespace

std::vector<std::vector<double>> attention_probabilities(const Array& q, const Array& k,
                                                         std::span<const std::uint8_t> key_mask,
                                                         std::size_t heads, std::optional<double> scale) {
    const auto dims = attention_dims(q, k, nullptr, key_mask, heads, scale);
    CMap qm(q.data().data(), dims.tq, dims.d);
    CMap km(k.data().data(), dims.tk, dims.d);
    std::vector<std::vector<double>> out;
    for (std::size_t h = 0; h < heads; ++h) {
        RowMat p = attention_probs_head(dims, qm, km, key_mask, h);
        out.emplace_back(p.data(), p.data() + p.size());
    }
    return out;
}

Array scaled_dot_attention(const Array& q, const Array& k, const Array& v, std::span<const std::uint8_t> key_mask,
                           std::size_t heads, std::optional<double> scale) {
    const auto dims = attention_dims(q, k, &v, key_mask, heads, scale);
    CMap qm(q.data().data(), dims.tq, dims.d);
    CMap km(k.data().data(), dims.tk, dims.d);
    CMap vm(v.data().data(), dims.tk, dims.dv);
    std::vector<double> out(dims.tq * dims.dv);
    MMap om(out.data(), dims.tq, dims.dv);
    auto probs = std::make_shared<std::vector<RowMat>>();
    probs->reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        probs->push_back(attention_probs_head(dims, qm, km, key_mask, h));
        om.middleCols(h * dims.dvh, dims.dvh).noalias() = probs->back() * vm.middleCols(h * dims.dvh, dims.dvh);
    }
    Array result({dims.tq, dims.dv}, std::move(out));
    return record(std::move(result), {&q, &k, &v},
                  [qn = q.node(), kn = k.node(), vn = v.node(), probs, dims](const std::vector<double>& g) {
                      CMap gm(g.data(), dims.tq, dims.dv);
                      CMap qm(qn->value.data(), dims.tq, dims.d);
                      CMap km(kn->value.data(), dims.tk, dims.d);
                      CMap vm(vn->value.data(), dims.tk, dims.dv);
                      auto* gq = grad_of(qn);
                      auto* gk = grad_of(kn);
                      auto* gv = grad_of(vn);
                      for (std::size_t h = 0; h < dims.heads; ++h) {
                          const RowMat& p = (*probs)[h];
                          const auto gh = gm.middleCols(h * dims.dvh, dims.dvh);
                          if (gv) {
                              MMap(gv->data(), dims.tk, dims.dv).middleCols(h * dims.dvh, dims.dvh).noalias() +=
                                  p.transpose() * gh;
                          }
                          if (!gq && !gk) continue;
                          RowMat dp = gh * vm.middleCols(h * dims.dvh, dims.dvh).transpose();
                          const Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
                          RowMat ds = p.array() * (dp.colwise() - rowdot).array();
                          ds *= dims.scale;
                          if (gq) {
                              MMap(gq->data(), dims.tq, dims.d).middleCols(h * dims.dh, dims.dh).noalias() +=
                                  ds * km.middleCols(h * dims.dh, dims.dh);
                          }
                          if (gk) {
                              MMap(gk->data(), dims.tk, dims.d).middleCols(h * dims.dh, dims.dh).noalias() +=
                                  ds.transpose() * qm.middleCols(h * dims.dh, dims.dh);
                          }
                      }
                  });
}

// ------------------------------------------------------------ index ops

Array gather(const Array& x, std::span<const std::size_t> indices) {
    const auto& xv = x.values();
    std::vector<double> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= xv.size()) {
            throw ShapeError("gather", "index " + std::to_string(indices[i]) + " out of range for " +
                                           shape_str(x.shape()));
        }
        out[i] = xv[indices[i]];
    }
    Array result({indices.size()}, std::move(out));
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return record(std::move(result), {&x}, [xn = x.node(), idx = std::move(idx)](const std::vector<double>& g) {
        if (auto* gx = grad_of(xn)) {
            for (std::size_t i = 0; i < idx.size(); ++i) (*gx)[idx[i]] += g[i];
        }
    });
}

Array segment_sum(const Array& x, std::span<const std::size_t> segment_ids, std::size_t segments) {
    if (segment_ids.size() != x.size()) {
        throw ShapeError("segment_sum", "segment id count " + std::to_string(segment_ids.size()) + " vs " +
                                            shape_str(x.shape()));
    }
    const auto& xv = x.values();
    std::vector<double> out(segments, 0.0);
    for (std::size_t i = 0; i < xv.size(); ++i) {
        if (segment_ids[i] >= segments) throw ShapeError("segment_sum", "segment id out of range");
        out[segment_ids[i]] += xv[i];
    }
    Array result({segments}, std::move(out));
    std::vector<std::size_t> ids(segment_ids.begin(), segment_ids.end());
    return record(std::move(result), {&x}, [xn = x.node(), ids = std::move(ids)](const std::vector<double>& g) {
        if (auto* gx = grad_of(xn)) {
            for (std::size_t i = 0; i < ids.size(); ++i) (*gx)[i] += g[ids[i]];
        }
    });
}

// ------------------------------------------------------------ fused losses

Array sigmoid_focal_loss(const Array& logits, const Array& targets, double alpha, double gamma) {
    if (logits.shape() != targets.shape()) throw ShapeError("sigmoid_focal_loss", logits.shape(), targets.shape());
    const auto& x = logits.values();
    const auto& y = targets.values();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = sigmoid_value(x[i]);
        if (y[i] > 0.5) {
            // -alpha (1-p)^gamma log p, with -log p = softplus(-x)
            out[i] = alpha * std::pow(1.0 - p, gamma) * softplus_value(-x[i]);
        } else {
            out[i] = (1.0 - alpha) * std::pow(p, gamma) * softplus_value(x[i]);
        }
    }
    Array result(logits.shape(), std::move(out));
    return record(std::move(result), {&logits},
                  [xn = logits.node(), yn = targets.node(), alpha, gamma](const std::vector<double>& g) {
                      auto* gx = grad_of(xn);
                      if (!gx) return;
                      const auto& x = xn->value;
                      const auto& y = yn->value;
                      for (std::size_t i = 0; i < x.size(); ++i) {
                          const double p = sigmoid_value(x[i]);
                          double d;
                          if (y[i] > 0.5) {
                              d = -alpha * std::pow(1.0 - p, gamma) * (gamma * p * softplus_value(-x[i]) + (1.0 - p));
                          } else {
                              d = (1.0 - alpha) * std::pow(p, gamma) * (gamma * (1.0 - p) * softplus_value(x[i]) + p);
                          }
                          (*gx)[i] += g[i] * d;
                      }
                  });
}

Array diou_loss(const Array& pred, const Array& target) {
    if (pred.shape() != target.shape()) throw ShapeError("diou_loss", pred.shape(), target.shape());
    if (pred.rank() != 2 || pred.dim(1) != 2) throw ShapeError("diou_loss", "expected [N,2], got " + shape_str(pred.shape()));
    const std::size_t n = pred.dim(0);
    const auto& a = pred.values();
    const auto& t = target.values();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double as = a[2 * i], ae = a[2 * i + 1], gs = t[2 * i], ge = t[2 * i + 1];
        const double inter = std::min(as, gs) + std::min(ae, ge);
        const double uni = as + ae + gs + ge - inter;
        const double enclose = std::max(as, gs) + std::max(ae, ge);
        const double rho = 0.5 * ((ae - as) - (ge - gs));
        out[i] = 1.0 - inter / uni + rho * rho / (enclose * enclose);
    }
    Array result({n}, std::move(out));
    return record(std::move(result), {&pred}, [pn = pred.node(), tn = target.node(), n](const std::vector<double>& g) {
        auto* gp = grad_of(pn);
        if (!gp) return;
        const auto& a = pn->value;
        const auto& t = tn->value;
        for (std::size_t i = 0; i < n; ++i) {
            const double as = a[2 * i], ae = a[2 * i + 1], gs = t[2 * i], ge = t[2 * i + 1];
            const double inter = std::min(as, gs) + std::min(ae, ge);
            const double uni = as + ae + gs + ge - inter;
            const double enclose = std::max(as, gs) + std::max(ae, ge);
            const double rho = 0.5 * ((ae - as) - (ge - gs));
            const double di_s = as < gs ? 1.0 : 0.0;
            const double di_e = ae < ge ? 1.0 : 0.0;
            const double de_s = as > gs ? 1.0 : 0.0;
            const double de_e = ae > ge ? 1.0 : 0.0;
            auto d_iou = [&](double di) {
                const double du = 1.0 - di;
                return (di * uni - inter * du) / (uni * uni);
            };
            const double e2 = enclose * enclose;
            const double d_s = -d_iou(di_s) + (2.0 * rho * -0.5) / e2 - 2.0 * rho * rho * de_s / (e2 * enclose);
            const double d_e = -d_iou(di_e) + (2.0 * rho * 0.5) / e2 - 2.0 * rho * rho * de_e / (e2 * enclose);
            (*gp)[2 * i] += g[i] * d_s;
            (*gp)[2 * i + 1] += g[i] * d_e;
        }
    });
}

}  // namespace asl::ad
