// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic paired data with known latent structure, and the on-disk
// dataset / embedding containers.
//
// Each concept c owns a unit vector supported only on factor slot c mod K
// (coordinates [k*D/K, (k+1)*D/K)). A pair draws 1..K distinct concepts.
// Its text rows are the concept vectors under a fixed text projection and
// its audio rows the same vectors under a distinct audio projection, each
// plus N(0, sigma^2) noise. With fewer concepts than rows the concepts are
// cycled; with more, row r carries the sum of concepts j with j mod rows == r.

#pragma once

#include <cstddef>
#include <cstdint>
#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <string>
#include <vector>

#include "xmal/encoders.hpp"
#include "xmal/matrix.hpp"

namespace xmal {

struct SynthConfig {
  std::size_t concept_count = 32;
  std::size_t factors = 8;  // K
  std::size_t dim = 32;     // D
  std::size_t pairs = 256;
  std::size_t text_tokens = 5;   // N
  std::size_t audio_tokens = 8;  // M
  double noise_sigma = 0.1;
  std::uint64_t seed = 7;
  // Render both modalities through the text projection.
  bool shared_projection = false;

  void validate() const;
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct PairItem {
  std::uint32_t id = 0;
  std::vector<std::uint32_t> concepts;  // sorted ascending
  Matrix audio;                         // M x D
  Matrix text;                          // N x D

  friend bool operator==(const PairItem&, const PairItem&) = default;
};

struct Dataset {
  SynthConfig config;
  std::vector<PairItem> items;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Factor slot of a concept (round-robin).
inline std::size_t concept_slot(std::size_t concept_id, std::size_t factors) { return concept_id % factors; }

Dataset generate(const SynthConfig& cfg);

// First `count` items and the rest, ids preserved.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::size_t count);

inline constexpr std::uint32_t kDatasetSchemaVersion = 1;
inline constexpr std::uint32_t kEmbeddingSchemaVersion = 1;

// Writes `path` and a key=value sidecar at `path` + ".manifest".
void save_dataset(const Dataset& data, const std::filesystem::path& path);
std::string encode_dataset(const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);
Dataset decode_dataset(std::string_view bytes, const std::string& context = "dataset");
std::string dataset_manifest(const Dataset& data);

struct EmbeddingItem {
  TokenBlockSet audio;
  TokenBlockSet text;

  friend bool operator==(const EmbeddingItem&, const EmbeddingItem&) = default;
};

// Throws DimensionError when items disagree on D or per-level token counts.
void save_embeddings(std::span<const EmbeddingItem> items, const std::filesystem::path& path);
std::string encode_embeddings(std::span<const EmbeddingItem> items);
std::vector<EmbeddingItem> load_embeddings(const std::filesystem::path& path);
std::vector<EmbeddingItem> decode_embeddings(std::string_view bytes, const std::string& context = "embeddings");

}  // namespace xmal
