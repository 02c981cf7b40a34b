// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/gradcheck_suite.hpp"

#include <functional>
#include <numeric>

#include "asl/autodiff/ops.hpp"
#include "asl/io/synth.hpp"
#include "asl/pipeline.hpp"
#include "asl/sensitivity.hpp"
#include "asl/util/random.hpp"

namespace asl {

namespace {

using ad::Array;
using ad::Shape;

Array random_array(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(ad::shape_size(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Array(std::move(shape), std::move(v), true);
}

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

struct Case {
    std::vector<ad::ParamRef> params;
    std::function<Array()> loss;
};

using Builder = std::function<Case(Rng&)>;

Case unary(Rng& rng, Array (*op)(const Array&), double lo = -2.0, double hi = 2.0) {
    auto x = random_array(rng, {dim(rng, 1, 5), dim(rng, 1, 6)}, lo, hi);
    std::vector<double> weights(x.size());
    for (auto& v : weights) v = rng.uniform(-1.0, 1.0);
    Array wa(x.shape(), weights);
    return {{{"x", x}}, [=] { return ad::sum(ad::mul(op(x), wa)); }};
}

Shape broadcast_partner(Rng& rng, const Shape& s) {
    Shape out = s;
    for (auto& d : out) {
        if (rng.below(3) == 0) d = 1;
    }
    if (rng.below(4) == 0) out.erase(out.begin());
    return out;
}

Case binary(Rng& rng, Array (*op)(const Array&, const Array&), bool positive_b) {
    Shape sa{dim(rng, 1, 4), dim(rng, 1, 5)};
    Shape sb = broadcast_partner(rng, sa);
    if (rng.below(2)) std::swap(sa, sb);
    auto a = random_array(rng, sa);
    auto b = positive_b ? random_array(rng, sb, 0.5, 2.0) : random_array(rng, sb);
    Shape out_shape = sa.size() >= sb.size() ? sa : sb;
    const std::size_t off_a = out_shape.size() - sa.size(), off_b = out_shape.size() - sb.size();
    for (std::size_t i = 0; i < out_shape.size(); ++i) {
        const std::size_t da = i >= off_a ? sa[i - off_a] : 1, db = i >= off_b ? sb[i - off_b] : 1;
        out_shape[i] = std::max(da, db);
    }
    std::vector<double> w(ad::shape_size(out_shape));
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    Array wa(out_shape, w);
    return {{{"a", a}, {"b", b}}, [=] { return ad::sum(ad::mul(op(a, b), wa)); }};
}

template <class F>
Case single(Rng& rng, Array x, F f) {
    auto probe = f(x);
    std::vector<double> w(probe.size());
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    Array wa(probe.shape(), w);
    return {{{"x", x}}, [=] { return probe.rank() == 0 ? f(x) : ad::sum(ad::mul(f(x), wa)); }};
}

std::vector<std::pair<std::string, Builder>> builders() {
    std::vector<std::pair<std::string, Builder>> b;
    b.emplace_back("add", [](Rng& r) { return binary(r, ad::add, false); });
    b.emplace_back("sub", [](Rng& r) { return binary(r, ad::sub, false); });
    b.emplace_back("mul", [](Rng& r) { return binary(r, ad::mul, false); });
    b.emplace_back("div", [](Rng& r) { return binary(r, ad::div, true); });
    b.emplace_back("scale", [](Rng& r) {
        const double f = r.uniform(-3.0, 3.0);
        return single(r, random_array(r, {dim(r, 1, 5), dim(r, 1, 5)}), [f](const Array& x) { return ad::scale(x, f); });
    });
    b.emplace_back("add_scalar", [](Rng& r) {
        const double f = r.uniform(-3.0, 3.0);
        return single(r, random_array(r, {dim(r, 1, 5)}), [f](const Array& x) { return ad::add_scalar(x, f); });
    });
    b.emplace_back("neg", [](Rng& r) { return unary(r, ad::neg); });
    b.emplace_back("relu", [](Rng& r) {
        // Keep inputs away from the kink.
        auto c = unary(r, ad::relu);
        for (auto& v : c.params[0].array.mutable_data()) v += v >= 0 ? 0.05 : -0.05;
        return c;
    });
    b.emplace_back("gelu", [](Rng& r) { return unary(r, ad::gelu); });
    b.emplace_back("sigmoid", [](Rng& r) { return unary(r, ad::sigmoid, -4.0, 4.0); });
    b.emplace_back("softplus", [](Rng& r) { return unary(r, ad::softplus, -4.0, 4.0); });
    b.emplace_back("exp", [](Rng& r) { return unary(r, ad::exp); });
    b.emplace_back("log", [](Rng& r) { return unary(r, ad::log, 0.3, 3.0); });
    b.emplace_back("sqrt", [](Rng& r) { return unary(r, ad::sqrt, 0.3, 3.0); });
    b.emplace_back("matmul", [](Rng& r) {
        const std::size_t m = dim(r, 1, 5), k = dim(r, 1, 5), n = dim(r, 1, 5);
        auto a = random_array(r, {m, k});
        auto bm = random_array(r, {k, n});
        auto w = random_array(r, {m, n}).detach();
        return Case{{{"a", a}, {"b", bm}}, [=] { return ad::sum(ad::mul(ad::matmul(a, bm), w)); }};
    });
    b.emplace_back("transpose", [](Rng& r) {
        return single(r, random_array(r, {dim(r, 1, 5), dim(r, 1, 5)}), [](const Array& x) { return ad::transpose(x); });
    });
    b.emplace_back("reshape", [](Rng& r) {
        const std::size_t p = dim(r, 1, 4), q = dim(r, 1, 4);
        return single(r, random_array(r, {p, q}), [p, q](const Array& x) { return ad::reshape(x, {q, p}); });
    });
    b.emplace_back("softmax", [](Rng& r) {
        const std::size_t axis = r.below(2);
        return single(r, random_array(r, {dim(r, 1, 4), dim(r, 1, 5)}, -2, 2),
                      [axis](const Array& x) { return ad::softmax(x, axis); });
    });
    b.emplace_back("log_softmax", [](Rng& r) {
        const std::size_t axis = r.below(2);
        return single(r, random_array(r, {dim(r, 1, 4), dim(r, 1, 5)}, -2, 2),
                      [axis](const Array& x) { return ad::log_softmax(x, axis); });
    });
    b.emplace_back("layer_norm", [](Rng& r) {
        const std::size_t t = dim(r, 1, 4), c = dim(r, 2, 6);
        auto x = random_array(r, {t, c}, -2, 2);
        auto g = random_array(r, {c}, 0.5, 1.5);
        auto bias = random_array(r, {c});
        auto w = random_array(r, {t, c}).detach();
        return Case{{{"x", x}, {"gain", g}, {"bias", bias}},
                    [=] { return ad::sum(ad::mul(ad::layer_norm(x, g, bias), w)); }};
    });
    b.emplace_back("sum", [](Rng& r) {
        return single(r, random_array(r, {dim(r, 1, 4), dim(r, 1, 4)}), [](const Array& x) { return ad::sum(x); });
    });
    b.emplace_back("mean", [](Rng& r) {
        return single(r, random_array(r, {dim(r, 1, 4), dim(r, 1, 4)}), [](const Array& x) { return ad::mean(x); });
    });
    b.emplace_back("sum_axis", [](Rng& r) {
        const std::size_t axis = r.below(2);
        const bool keep = r.below(2);
        return single(r, random_array(r, {dim(r, 1, 4), dim(r, 1, 4)}),
                      [axis, keep](const Array& x) { return ad::sum(x, axis, keep); });
    });
    b.emplace_back("mean_axis", [](Rng& r) {
        const std::size_t axis = r.below(2);
        return single(r, random_array(r, {dim(r, 1, 4), dim(r, 1, 4)}),
                      [axis](const Array& x) { return ad::mean(x, axis); });
    });
    b.emplace_back("concat", [](Rng& r) {
        const std::size_t axis = r.below(2), other = dim(r, 1, 4);
        auto shape = [&](std::size_t n) { return axis == 0 ? Shape{n, other} : Shape{other, n}; };
        auto a = random_array(r, shape(dim(r, 1, 3)));
        auto c = random_array(r, shape(dim(r, 1, 3)));
        auto probe = ad::concat({a, c}, axis);
        auto w = random_array(r, probe.shape()).detach();
        return Case{{{"a", a}, {"b", c}}, [=] { return ad::sum(ad::mul(ad::concat({a, c}, axis), w)); }};
    });
    b.emplace_back("slice", [](Rng& r) {
        const std::size_t axis = r.below(2);
        auto x = random_array(r, {dim(r, 2, 5), dim(r, 2, 5)});
        const std::size_t n = x.dim(axis), begin = r.below(n), end = begin + 1 + r.below(n - begin);
        return single(r, x, [=](const Array& v) { return ad::slice(v, axis, begin, end); });
    });
    b.emplace_back("conv1d", [](Rng& r) {
        const std::size_t t = dim(r, 1, 9), cin = dim(r, 1, 3), cout = dim(r, 1, 3), k = 2 * r.below(3) + 1,
                          stride = 1 + r.below(2);
        auto x = random_array(r, {t, cin});
        auto w = random_array(r, {k, cin, cout});
        auto bias = random_array(r, {cout});
        auto probe = ad::conv1d(x, w, bias, stride);
        auto wt = random_array(r, probe.shape()).detach();
        return Case{{{"x", x}, {"w", w}, {"b", bias}},
                    [=] { return ad::sum(ad::mul(ad::conv1d(x, w, bias, stride), wt)); }};
    });
    b.emplace_back("depthwise_conv1d", [](Rng& r) {
        const std::size_t t = dim(r, 1, 9), c = dim(r, 1, 4), k = 2 * r.below(2) + 1, stride = 1 + r.below(2);
        auto x = random_array(r, {t, c});
        auto w = random_array(r, {k, c});
        auto bias = random_array(r, {c});
        auto probe = ad::depthwise_conv1d(x, w, bias, stride);
        auto wt = random_array(r, probe.shape()).detach();
        return Case{{{"x", x}, {"w", w}, {"b", bias}},
                    [=] { return ad::sum(ad::mul(ad::depthwise_conv1d(x, w, bias, stride), wt)); }};
    });
    b.emplace_back("scaled_dot_attention", [](Rng& r) {
        const std::size_t heads = 1 + r.below(2), tq = dim(r, 1, 4), tk = dim(r, 1, 5);
        const std::size_t d = heads * dim(r, 1, 3), dv = heads * dim(r, 1, 2);
        auto q = random_array(r, {tq, d});
        auto k = random_array(r, {tk, d});
        auto v = random_array(r, {tk, dv});
        std::vector<std::uint8_t> mask(tk, 1);
        for (std::size_t i = 1; i < tk; ++i) mask[i] = r.below(4) != 0;
        auto wt = random_array(r, {tq, dv}).detach();
        return Case{{{"q", q}, {"k", k}, {"v", v}},
                    [=] { return ad::sum(ad::mul(ad::scaled_dot_attention(q, k, v, mask, heads), wt)); }};
    });
    b.emplace_back("gather", [](Rng& r) {
        auto x = random_array(r, {dim(r, 1, 6)});
        std::vector<std::size_t> idx(dim(r, 1, 8));
        for (auto& i : idx) i = r.below(x.size());
        return single(r, x, [idx](const Array& v) { return ad::gather(v, idx); });
    });
    b.emplace_back("segment_sum", [](Rng& r) {
        auto x = random_array(r, {dim(r, 1, 8)});
        const std::size_t segments = dim(r, 1, 4);
        std::vector<std::size_t> ids(x.size());
        for (auto& i : ids) i = r.below(segments);
        return single(r, x, [ids, segments](const Array& v) { return ad::segment_sum(v, ids, segments); });
    });
    b.emplace_back("sigmoid_focal_loss", [](Rng& r) {
        auto x = random_array(r, {dim(r, 1, 5), dim(r, 1, 3)}, -4, 4);
        std::vector<double> y(x.size());
        for (auto& v : y) v = static_cast<double>(r.below(2));
        Array ya(x.shape(), y);
        const double alpha = r.uniform(0.1, 0.9), gamma = r.uniform(0.0, 3.0);
        return single(r, x, [=](const Array& v) { return ad::sigmoid_focal_loss(v, ya, alpha, gamma); });
    });
    b.emplace_back("diou_loss", [](Rng& r) {
        const std::size_t n = dim(r, 1, 5);
        auto pred = random_array(r, {n, 2}, 0.2, 3.0);
        auto target = random_array(r, {n, 2}, 0.2, 3.0).detach();
        // Separate pred from target so no min/max switches inside the stencil.
        auto p = pred.mutable_data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (std::abs(p[i] - target[i]) < 0.05) p[i] += 0.1;
        }
        return single(r, pred, [target](const Array& v) { return ad::diou_loss(v, target); });
    });
    b.emplace_back("sensitivity_weights", [](Rng& r) {
        const std::size_t classes = dim(r, 1, 3), instances = dim(r, 1, 3);
        auto mu = random_array(r, {classes}, 0.1, 0.9);
        auto sigma = random_array(r, {classes}, 0.2, 1.0);
        std::vector<std::size_t> inst_label(instances);
        for (auto& l : inst_label) l = r.below(classes);
        std::vector<PositiveSample> samples;
        for (std::size_t i = 0; i < instances; ++i) {
            const std::size_t n = dim(r, 1, 5);
            for (std::size_t j = 0; j < n; ++j) samples.push_back({i, inst_label[i], r.uniform()});
        }
        auto wt = random_array(r, {samples.size()}).detach();
        return Case{{{"mu", mu}, {"sigma", sigma}},
                    [=] { return ad::sum(ad::mul(sensitivity_weights(mu, sigma, samples, instances), wt)); }};
    });
    return b;
}

}  // namespace

std::vector<GradCheckEntry> primitive_gradcheck_suite(std::uint64_t seed, std::size_t cases,
                                                      const ad::GradCheckOptions& options) {
    std::vector<GradCheckEntry> out;
    Rng rng(seed);
    for (const auto& [name, build] : builders()) {
        GradCheckEntry e{name, 0, {}};
        for (std::size_t c = 0; c < cases; ++c) {
            auto cs = build(rng);
            auto r = ad::gradient_check(cs.loss, cs.params, options);
            ++e.cases;
            e.worst.checked += r.checked;
            if (r.max_rel_error >= e.worst.max_rel_error) {
                e.worst.max_rel_error = r.max_rel_error;
                e.worst.worst = r.worst + " (case " + std::to_string(c) + ")";
                e.worst.worst_analytic = r.worst_analytic;
                e.worst.worst_numeric = r.worst_numeric;
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

GradCheckEntry end_to_end_gradcheck(Mode mode, std::uint64_t seed, std::size_t samples,
                                    const ad::GradCheckOptions& options) {
    io::SynthSpec spec;
    spec.seed = seed;
    spec.mode = mode;
    spec.n_videos = 2;
    spec.n_val = 0;
    spec.frames = 32;
    spec.dim = 6;
    spec.num_classes = 3;
    spec.instances_per_video = 2;
    spec.min_len = 3;
    spec.max_len = 12;
    spec.text_tokens = 3;
    spec.text_dim = 5;
    spec.noise = 0.3;
    const auto synth = io::synth_build(spec);
    const auto data = dataset_from_synth(spec, synth.train, synth.sensitive_positions);

    ModelConfig cfg;
    cfg.mode = mode;
    cfg.sources = {{spec.dim, 8}};
    cfg.embed_dim = 8;
    cfg.heads = 2;
    cfg.depth = 1;
    cfg.levels = 3;
    cfg.head_layers = 2;
    cfg.num_classes = data.num_classes;
    cfg.text_dim = mode == Mode::NLQ ? spec.text_dim : 0;
    Model model(cfg, seed);
    Rng rng(seed + 1);
    auto& sens = model.sensitivity();
    for (auto* a : {&sens.mu_cls, &sens.mu_loc}) {
        for (auto& v : a->mutable_data()) v = rng.uniform(0.2, 0.8);
    }
    for (auto* a : {&sens.sigma_cls, &sens.sigma_loc}) {
        for (auto& v : a->mutable_data()) v = rng.uniform(0.2, 0.8);
    }

    std::vector<std::size_t> items(mode == Mode::NLQ ? data.queries.size() : data.videos.size());
    std::iota(items.begin(), items.end(), 0);
    const LossConfig loss;
    const auto loss_fn = [&] { return batch_loss(model, data, items, loss).total; };

    std::vector<ad::ParamRef> network, sensitivity;
    for (const auto& p : model.params()) {
        (p.name.rfind("sensitivity.", 0) == 0 ? sensitivity : network).push_back(p);
    }
    auto opts = options;
    opts.samples = samples;
    opts.seed = seed;
    const auto net = ad::gradient_check(loss_fn, network, opts);
    opts.samples = 0;
    const auto sen = ad::gradient_check(loss_fn, sensitivity, opts);

    GradCheckEntry e{std::string("end_to_end_") + (mode == Mode::NLQ ? "nlq" : "mq"), 1, {}};
    e.worst.checked = net.checked + sen.checked;
    e.worst.max_rel_error = std::max(net.max_rel_error, sen.max_rel_error);
    const auto& w = net.max_rel_error >= sen.max_rel_error ? net : sen;
    e.worst.worst = w.worst;
    e.worst.worst_analytic = w.worst_analytic;
    e.worst.worst_numeric = w.worst_numeric;
    return e;
}

}  // namespace asl
