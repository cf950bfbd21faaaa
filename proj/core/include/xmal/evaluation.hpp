// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// R@k retrieval metrics and DCR diagnostics. The ground-truth match of
// audio i is text i. Candidates are ranked by descending score; ties go to
// the lower index.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmal/data.hpp"
#include "xmal/ca.hpp"
#include "xmal/dcr.hpp"
#include "xmal/model.hpp"
#include "xmal/objective.hpp"
#include "xmal/tha.hpp"

namespace xmal {

enum class RetrievalDirection { text_to_audio, audio_to_text };

std::string to_string(RetrievalDirection d);
RetrievalDirection parse_retrieval_direction(const std::string& s);

// 1-based rank of each query's true match. audio_to_text ranks the columns
// of row i; text_to_audio ranks the rows of column j.
std::vector<std::size_t> true_match_ranks(const Matrix& similarity, RetrievalDirection direction);

// Percentage in [0, 100]. Throws ContractError unless 1 <= k <= size.
double recall_at_k(const Matrix& similarity, std::size_t k, RetrievalDirection direction);

struct RetrievalReport {
  RetrievalDirection direction = RetrievalDirection::text_to_audio;
  SimilarityMode mode = SimilarityMode::tha_dcr;
  std::size_t eval_size = 0;
  std::uint64_t seed = 0;
  std::map<std::size_t, double> r_at;

  friend bool operator==(const RetrievalReport&, const RetrievalReport&) = default;
};

// One report per (mode, direction), modes in the given order and
// text_to_audio first.
std::vector<RetrievalReport> evaluate(const Model& model, std::span<const EmbeddingItem> items,
                                      const std::vector<SimilarityMode>& modes, const std::vector<std::size_t>& ks,
                                      std::uint64_t seed, std::size_t threads = 1);
std::vector<RetrievalReport> evaluate(const Model& model, const Dataset& data,
                                      const std::vector<SimilarityMode>& modes, const std::vector<std::size_t>& ks,
                                      std::uint64_t seed, std::size_t threads = 1);

struct DcrDiagnostics {
  Matrix covariance;
  MatchProbability probability;
  // Mean confidence g_k over the matched pairs (i, i).
  std::vector<double> mean_confidence;
};

// Requires B >= 2.
DcrDiagnostics dcr_diagnostics(const Model& model, std::span<const EmbeddingItem> items);

// Every component of one (audio, text) score.
struct PairBreakdown {
  double dp = 0.0;
  ThaBreakdown tha;
  DcrBreakdown dcr;

  // Components summed in the same order as batch similarity.
  double combined(SimilarityMode mode) const;
};
PairBreakdown pair_breakdown(const Model& model, const EmbeddingItem& audio_item, const EmbeddingItem& text_item);

// Smallest [lo, hi] hit-count interval with P(X < lo) <= (1 - coverage) / 2
// and P(X > hi) <= (1 - coverage) / 2 for X ~ Binomial(trials, p).
struct CountBand {
  std::size_t lo = 0;
  std::size_t hi = 0;
};
CountBand binomial_band(std::size_t trials, double p, double coverage);

// Stamped with the config hash and seed.
std::string format_report_text(const std::vector<RetrievalReport>& reports, std::uint64_t config_hash,
                               std::uint64_t seed);
std::string encode_report(const std::vector<RetrievalReport>& reports, std::uint64_t config_hash,
                          std::uint64_t seed);

struct DecodedReport {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<RetrievalReport> reports;
};
DecodedReport decode_report(std::string_view bytes, const std::string& context = "report");

inline constexpr std::uint32_t kReportVersion = 1;

}  // namespace xmal
