// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xmal/binary_io.hpp"
#include "xmal/errors.hpp"
#include "xmal/rng.hpp"

namespace xmal {

namespace {

constexpr std::string_view kDatasetMagic = "XMAL";
constexpr std::string_view kEmbeddingMagic = "XEMB";
constexpr std::uint32_t kFlagSharedProjection = 1U;

Matrix render(const std::vector<std::uint32_t>& concepts, const std::vector<Matrix>& projected,
              std::size_t rows, std::size_t dim, double sigma, Rng& rng) {
  Matrix out(rows, dim);
  const std::size_t n = concepts.size();
  if (n <= rows) {
    for (std::size_t r = 0; r < rows; ++r) {
      const Matrix& v = projected[concepts[r % n]];
      std::copy(v.data().begin(), v.data().end(), out.row(r).begin());
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const Matrix& v = projected[concepts[j]];
      auto row = out.row(j % rows);
      for (std::size_t c = 0; c < dim; ++c) row[c] += v[c];
    }
  }
  if (sigma > 0.0)
    for (double& x : out.data()) x += sigma * rng.gaussian();
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (factors == 0 || dim == 0 || dim % factors != 0) {
    throw ConfigError("embedding dim D=" + std::to_string(dim) + " is not divisible by K=" +
                      std::to_string(factors));
  }
  if (audio_tokens < kMinAudioTokens) throw ConfigError("audio_tokens M must be >= 4");
  if (text_tokens < 1) throw ConfigError("text_tokens N must be >= 1");
  if (concept_count < factors) throw ConfigError("concept_count must be >= K");
  if (pairs < 1) throw ConfigError("pairs must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
}

Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t width = cfg.dim / cfg.factors;

  Rng world(derive_seed(cfg.seed, "data.world"));
  std::vector<Matrix> concepts;
  concepts.reserve(cfg.concept_count);
  for (std::size_t c = 0; c < cfg.concept_count; ++c) {
    Matrix v(1, cfg.dim);
    const std::size_t slot = concept_slot(c, cfg.factors);
    double sq = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      const double x = world.gaussian();
      v(0, slot * width + i) = x;
      sq += x * x;
    }
    const double norm = std::sqrt(sq);
    for (double& x : v.data()) x /= norm;
    concepts.push_back(std::move(v));
  }
  const double proj_sigma = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  const Matrix text_proj = world.gaussian_matrix(cfg.dim, cfg.dim, proj_sigma);
  const Matrix audio_proj =
      cfg.shared_projection ? text_proj : world.gaussian_matrix(cfg.dim, cfg.dim, proj_sigma);

  std::vector<Matrix> text_vecs;
  std::vector<Matrix> audio_vecs;
  for (const Matrix& v : concepts) {
    text_vecs.push_back(matmul(v, text_proj));
    audio_vecs.push_back(matmul(v, audio_proj));
  }

  Rng sampler(derive_seed(cfg.seed, "data.pairs"));
  Rng noise(derive_seed(cfg.seed, "data.noise"));
  Dataset data{cfg, {}};
  data.items.reserve(cfg.pairs);
  std::vector<std::uint32_t> pool(cfg.concept_count);
  for (std::size_t p = 0; p < cfg.pairs; ++p) {
    const std::size_t count = 1 + static_cast<std::size_t>(sampler.below(cfg.factors));
    std::iota(pool.begin(), pool.end(), 0U);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(sampler.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    PairItem item;
    item.id = static_cast<std::uint32_t>(p);
    item.concepts.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(item.concepts.begin(), item.concepts.end());
    item.text = render(item.concepts, text_vecs, cfg.text_tokens, cfg.dim, cfg.noise_sigma, noise);
    item.audio = render(item.concepts, audio_vecs, cfg.audio_tokens, cfg.dim, cfg.noise_sigma, noise);
    data.items.push_back(std::move(item));
  }
  return data;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::size_t count) {
  if (count > data.items.size()) {
    throw ContractError("split_dataset: cannot take " + std::to_string(count) + " of " +
                        std::to_string(data.items.size()) + " items");
  }
  Dataset head{data.config, {}};
  Dataset tail{data.config, {}};
  head.items.assign(data.items.begin(), data.items.begin() + static_cast<std::ptrdiff_t>(count));
  tail.items.assign(data.items.begin() + static_cast<std::ptrdiff_t>(count), data.items.end());
  return {std::move(head), std::move(tail)};
}

// ---------------------------------------------------------------------------
// Dataset container:
//   "XMAL" u32 version, u32 pairs, K, D, N, M, concept_count, u64 seed,
//   f64 sigma, u32 flags
//   per pair: u32 label count, u32 labels..., f64 audio[M*D], f64 text[N*D]

std::string encode_dataset(const Dataset& data) {
  const SynthConfig& c = data.config;
  if (data.items.size() != c.pairs) {
    throw ContractError("dataset holds " + std::to_string(data.items.size()) + " items but header says " +
                        std::to_string(c.pairs));
  }
  BinaryWriter w;
  w.raw(kDatasetMagic);
  w.u32(kDatasetSchemaVersion);
  w.u32(static_cast<std::uint32_t>(c.pairs));
  w.u32(static_cast<std::uint32_t>(c.factors));
  w.u32(static_cast<std::uint32_t>(c.dim));
  w.u32(static_cast<std::uint32_t>(c.text_tokens));
  w.u32(static_cast<std::uint32_t>(c.audio_tokens));
  w.u32(static_cast<std::uint32_t>(c.concept_count));
  w.u64(c.seed);
  w.f64(c.noise_sigma);
  w.u32(c.shared_projection ? kFlagSharedProjection : 0U);
  for (const PairItem& item : data.items) {
    if (item.audio.rows() != c.audio_tokens || item.audio.cols() != c.dim || item.text.rows() != c.text_tokens ||
        item.text.cols() != c.dim) {
      throw DimensionError("pair " + std::to_string(item.id) + " does not match the dataset header shapes");
    }
    w.u32(static_cast<std::uint32_t>(item.concepts.size()));
    for (std::uint32_t label : item.concepts) w.u32(label);
    w.values(item.audio);
    w.values(item.text);
  }
  return w.bytes();
}

Dataset decode_dataset(std::string_view bytes, const std::string& context) {
  BinaryReader r(bytes, context);
  if (bytes.size() < 4 || r.raw(4) != kDatasetMagic) throw SchemaError(context + ": not a dataset file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kDatasetSchemaVersion) {
    throw VersionError(context + ": schema_version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kDatasetSchemaVersion) + ")");
  }
  Dataset data;
  SynthConfig& c = data.config;
  c.pairs = r.u32();
  c.factors = r.u32();
  c.dim = r.u32();
  c.text_tokens = r.u32();
  c.audio_tokens = r.u32();
  c.concept_count = r.u32();
  c.seed = r.u64();
  c.noise_sigma = r.f64();
  c.shared_projection = (r.u32() & kFlagSharedProjection) != 0;
  data.items.reserve(std::min<std::size_t>(c.pairs, 1U << 20));
  for (std::size_t p = 0; p < c.pairs; ++p) {
    PairItem item;
    item.id = static_cast<std::uint32_t>(p);
    const std::uint32_t n_labels = r.u32();
    if (n_labels > c.concept_count) {
      throw CorruptRecordError(context + ": pair " + std::to_string(p) + " declares " + std::to_string(n_labels) +
                               " labels");
    }
    for (std::uint32_t i = 0; i < n_labels; ++i) item.concepts.push_back(r.u32());
    item.audio = r.matrix(c.audio_tokens, c.dim);
    item.text = r.matrix(c.text_tokens, c.dim);
    data.items.push_back(std::move(item));
  }
  r.expect_end();
  return data;
}

std::string dataset_manifest(const Dataset& data) {
  const SynthConfig& c = data.config;
  std::ostringstream os;
  os.precision(17);
  os << "magic=XMAL\n"
     << "schema_version=" << kDatasetSchemaVersion << "\n"
     << "pairs=" << c.pairs << "\n"
     << "K=" << c.factors << "\n"
     << "D=" << c.dim << "\n"
     << "N=" << c.text_tokens << "\n"
     << "M=" << c.audio_tokens << "\n"
     << "concept_count=" << c.concept_count << "\n"
     << "seed=" << c.seed << "\n"
     << "sigma=" << c.noise_sigma << "\n"
     << "shared_projection=" << (c.shared_projection ? 1 : 0) << "\n";
  return os.str();
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_file(path, encode_dataset(data));
  write_file(path.string() + ".manifest", dataset_manifest(data));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Embedding container:
//   "XEMB" u32 version, u32 items, u32 D, u32 levels,
//   u32 audio_tokens[levels], u32 text_tokens[levels]
//   per item: audio levels, audio global (1 x D), text levels, text global

std::string encode_embeddings(std::span<const EmbeddingItem> items) {
  if (items.empty()) throw ContractError("encode_embeddings: no items");
  const EmbeddingItem& first = items.front();
  const std::size_t dim = first.audio.global.cols();
  auto check = [&](const TokenBlockSet& set, const TokenBlockSet& ref, std::size_t index) {
    if (set.global.rows() != 1 || set.global.cols() != dim) {
      throw DimensionError("embedding item " + std::to_string(index) + ": global vector is " +
                           shape_string(set.global) + ", expected 1x" + std::to_string(dim));
    }
    for (std::size_t l = 0; l < kLevels; ++l) {
      if (set.levels[l].cols() != dim || set.levels[l].rows() != ref.levels[l].rows()) {
        throw DimensionError("embedding item " + std::to_string(index) + ": level " + level_name(l) + " is " +
                             shape_string(set.levels[l]) + ", expected " + std::to_string(ref.levels[l].rows()) +
                             "x" + std::to_string(dim));
      }
    }
  };
  for (std::size_t i = 0; i < items.size(); ++i) {
    check(items[i].audio, first.audio, i);
    check(items[i].text, first.text, i);
  }
  BinaryWriter w;
  w.raw(kEmbeddingMagic);
  w.u32(kEmbeddingSchemaVersion);
  w.u32(static_cast<std::uint32_t>(items.size()));
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(kLevels));
  for (std::size_t l = 0; l < kLevels; ++l) w.u32(static_cast<std::uint32_t>(first.audio.levels[l].rows()));
  for (std::size_t l = 0; l < kLevels; ++l) w.u32(static_cast<std::uint32_t>(first.text.levels[l].rows()));
  for (const EmbeddingItem& item : items) {
    for (const Matrix& m : item.audio.levels) w.values(m);
    w.values(item.audio.global);
    for (const Matrix& m : item.text.levels) w.values(m);
    w.values(item.text.global);
  }
  return w.bytes();
}

std::vector<EmbeddingItem> decode_embeddings(std::string_view bytes, const std::string& context) {
  BinaryReader r(bytes, context);
  if (bytes.size() < 4 || r.raw(4) != kEmbeddingMagic) {
    throw SchemaError(context + ": not an embedding file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingSchemaVersion) {
    throw VersionError(context + ": schema_version " + std::to_string(version) + " is not supported");
  }
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  const std::uint32_t levels = r.u32();
  if (levels != kLevels) {
    throw SchemaError(context + ": expected " + std::to_string(kLevels) + " levels, file declares " +
                      std::to_string(levels));
  }
  if (dim == 0) throw SchemaError(context + ": zero embedding dim");
  std::array<std::size_t, kLevels> audio_counts{};
  std::array<std::size_t, kLevels> text_counts{};
  for (auto& n : audio_counts) n = r.u32();
  for (auto& n : text_counts) n = r.u32();
  std::vector<EmbeddingItem> items;
  items.reserve(std::min<std::size_t>(count, 1U << 16));
  for (std::uint32_t i = 0; i < count; ++i) {
    EmbeddingItem item;
    for (std::size_t l = 0; l < kLevels; ++l) item.audio.levels[l] = r.matrix(audio_counts[l], dim);
    item.audio.global = r.matrix(1, dim);
    for (std::size_t l = 0; l < kLevels; ++l) item.text.levels[l] = r.matrix(text_counts[l], dim);
    item.text.global = r.matrix(1, dim);
    items.push_back(std::move(item));
  }
  r.expect_end();
  return items;
}

void save_embeddings(std::span<const EmbeddingItem> items, const std::filesystem::path& path) {
  write_file(path, encode_embeddings(items));
}

std::vector<EmbeddingItem> load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file(path), path.string());
}

}  // namespace xmal
