// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/io/checkpoint.hpp"

#include <cmath>

#include "asl/io/binary.hpp"

namespace asl::io {

Checkpoint snapshot(const Model& model, std::uint32_t epoch) {
    Checkpoint c;
    c.config = model.config();
    c.epoch = epoch;
    for (const auto& p : model.params()) c.params.emplace_back(p.name, p.array.clone());
    return c;
}

Model instantiate(const Checkpoint& ckpt) {
    Model model(ckpt.config, 0);
    try {
        model.load_values(ckpt.params);
    } catch (const std::exception& e) {
        throw DataError(std::string("checkpoint does not fit its config: ") + e.what());
    }
    return model;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    std::string out = "ASLM";
    put_u32(out, kCheckpointVersion);
    put_u32(out, ckpt.epoch);
    const auto cfg = ckpt.config.serialize();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [name, a] : ckpt.params) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(a.rank()));
        for (auto d : a.shape()) put_u64(out, d);
        for (double v : a.values()) put_f64(out, v);
    }
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source) {
    Reader r(bytes, source);
    r.expect_magic("ASLM");
    const auto version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError(source, 4, "unsupported checkpoint version " + std::to_string(version) + " (supported: 1)");
    }
    Checkpoint c;
    c.epoch = r.u32("epoch");
    const auto cfg_len = r.u32("config length");
    const std::size_t cfg_at = r.offset();
    const auto cfg = r.bytes(cfg_len, "config");
    try {
        c.config = ModelConfig::parse(std::string(cfg));
    } catch (const std::exception& e) {
        throw FormatError(source, cfg_at, std::string("bad model config: ") + e.what());
    }
    const auto count = r.u32("parameter count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.u32("name length");
        std::string name(r.bytes(name_len, "name"));
        const auto rank = r.u32("rank");
        if (rank > 8) r.fail("implausible rank " + std::to_string(rank) + " for " + name);
        ad::Shape shape;
        std::size_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            shape.push_back(r.u64("dimension"));
            n *= shape.back();
        }
        if (n > r.remaining() / 8) r.fail("truncated values of " + name + ": expected " + std::to_string(8 * n) +
                                          " bytes, got " + std::to_string(r.remaining()));
        std::vector<double> values(n);
        for (auto& v : values) {
            const std::size_t at = r.offset();
            v = r.f64("value");
            if (!std::isfinite(v)) throw FormatError(source, at, "non-finite value in " + name);
        }
        c.params.emplace_back(std::move(name), ad::Array(std::move(shape), std::move(values)));
    }
    if (r.remaining() != 0) r.fail("trailing bytes: " + std::to_string(r.remaining()));
    return c;
}

void save_checkpoint(const std::string& path, const Model& model, std::uint32_t epoch) {
    write_file(path, encode_checkpoint(snapshot(model, epoch)));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path), path); }

}  // namespace asl::io
