// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "xmal/errors.hpp"

namespace xmal {

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryWriter::values(const Matrix& m) {
  for (double v : m.data()) f64(v);
}

std::string_view BinaryReader::raw(std::size_t n) {
  if (n > remaining()) {
    throw CorruptRecordError(context_ + ": truncated at byte " + std::to_string(pos_) + " (need " +
                             std::to_string(n) + ", have " + std::to_string(remaining()) + ")");
  }
  std::string_view out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t BinaryReader::u32() {
  std::string_view b = raw(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::string_view b = raw(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::string() {
  const std::uint32_t n = u32();
  return std::string(raw(n));
}

Matrix BinaryReader::matrix(std::size_t rows, std::size_t cols) {
  if (rows != 0 && cols > remaining() / 8 / rows) {
    throw CorruptRecordError(context_ + ": matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                             " exceeds remaining " + std::to_string(remaining()) + " bytes");
  }
  Matrix m(rows, cols);
  for (double& v : m.data()) v = f64();
  return m;
}

void BinaryReader::expect_end() const {
  if (!at_end()) {
    throw CorruptRecordError(context_ + ": " + std::to_string(remaining()) + " trailing bytes");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace xmal
