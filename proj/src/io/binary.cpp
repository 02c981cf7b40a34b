// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "asl/io/binary.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace asl::io {

FormatError::FormatError(const std::string& source, std::size_t offset, const std::string& what)
    : DataError(source + ": byte " + std::to_string(offset) + ": " + what), offset_(offset) {}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path);
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void Reader::need(std::size_t n, const char* what) {
    if (remaining() < n) {
        fail(std::string("truncated ") + what + ": expected " + std::to_string(n) + " bytes, got " +
             std::to_string(remaining()));
    }
}

std::uint32_t Reader::u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t Reader::u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
}

double Reader::f64(const char* what) { return std::bit_cast<double>(u64(what)); }

std::string_view Reader::bytes(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
}

void Reader::expect_magic(std::string_view magic) {
    need(magic.size(), "magic");
    if (bytes_.substr(pos_, magic.size()) != magic) fail("bad magic, expected \"" + std::string(magic) + "\"");
    pos_ += magic.size();
}

}  // namespace asl::io
