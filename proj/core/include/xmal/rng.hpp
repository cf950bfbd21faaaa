// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness. The engine is std::mt19937_64; the distributions are
// written out here because the std:: distributions are implementation
// defined and datasets/checkpoints must be bit-identical across toolchains.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "xmal/matrix.hpp"

namespace xmal {

// Deterministic child seed for a named subsystem ("data", "init", "shuffle", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// 64-bit FNV-1a digest.
std::uint64_t fnv1a64(std::string_view bytes);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer in [0, n) without modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one draw per call).
  double gaussian();

  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);
  Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double sigma = 1.0);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace xmal
