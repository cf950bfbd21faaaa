// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian container encoding shared by the dataset, embedding,
// checkpoint and report files.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>

#include "xmal/matrix.hpp"

namespace xmal {

class BinaryWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::string_view bytes) { buf_.append(bytes); }
  // u32 length prefix followed by the bytes.
  void string(std::string_view s);
  // Entries only; shape is the caller's business.
  void values(const Matrix& m);

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

// Reads from an in-memory buffer. Running past the end throws
// CorruptRecordError mentioning `context`.
class BinaryReader {
 public:
  BinaryReader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string_view raw(std::size_t n);
  std::string string();
  Matrix matrix(std::size_t rows, std::size_t cols);

  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  // Throws CorruptRecordError if bytes remain.
  void expect_end() const;
  const std::string& context() const { return context_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string context_;
};

// MissingFileError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
// IoError on failure.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace xmal
