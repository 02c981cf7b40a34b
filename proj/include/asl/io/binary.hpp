// Copyright (C) 2026 The ASL Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace asl::io {

/// Missing files, bad references, unparsable text.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Corrupt binary input. offset() is the byte where decoding failed.
class FormatError : public DataError {
public:
    FormatError(const std::string& source, std::size_t offset, const std::string& what);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

// Little-endian encoders.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);

/// Bounds-checked little-endian decoder over a byte string.
class Reader {
public:
    Reader(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

    std::uint32_t u32(const char* what);
    std::uint64_t u64(const char* what);
    double f64(const char* what);
    std::string_view bytes(std::size_t n, const char* what);
    void expect_magic(std::string_view magic);

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& source() const { return source_; }
    [[noreturn]] void fail(const std::string& what) const { throw FormatError(source_, pos_, what); }

private:
    void need(std::size_t n, const char* what);

    std::string_view bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace asl::io
