// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "xmal/config.hpp"
#include "xmal/errors.hpp"
#include "xmal/evaluation.hpp"
#include "xmal/rng.hpp"

namespace xmal {
namespace {

constexpr auto kT2A = RetrievalDirection::text_to_audio;
constexpr auto kA2T = RetrievalDirection::audio_to_text;

Model small_model(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.factors = 4;
  return Model::initialize(cfg, seed);
}

Dataset small_data(std::size_t pairs, std::uint64_t seed) {
  SynthConfig sc;
  sc.pairs = pairs;
  sc.dim = 16;
  sc.factors = 4;
  sc.concept_count = 16;
  sc.seed = seed;
  return generate(sc);
}

// P(X <= x) for X ~ Binomial(n, p), by direct summation.
long double binomial_cdf(std::size_t n, long double p, std::size_t x) {
  long double total = 0;
  long double choose = 1;
  for (std::size_t i = 0; i <= x; ++i) {
    if (i > 0) choose = choose * static_cast<long double>(n - i + 1) / static_cast<long double>(i);
    total += choose * std::pow(p, static_cast<long double>(i)) * std::pow(1 - p, static_cast<long double>(n - i));
  }
  return total;
}

TEST(Recall, HandCases) {
  Matrix diag(4, 4, 0.1);
  for (std::size_t i = 0; i < 4; ++i) diag(i, i) = 1.0;
  EXPECT_EQ(recall_at_k(diag, 1, kT2A), 100.0);
  EXPECT_EQ(recall_at_k(diag, 1, kA2T), 100.0);
  EXPECT_EQ(recall_at_k(Matrix(4, 4, 0.5), 1, kA2T), 25.0);
  EXPECT_EQ(recall_at_k(Matrix(4, 4, 0.5), 1, kT2A), 25.0);
  const Matrix s = Matrix::from_rows({{.9, .8, .1}, {.2, .7, .6}, {.5, .4, .3}});
  EXPECT_NEAR(recall_at_k(s, 1, kA2T), 200.0 / 3.0, 1e-12);
  // Columns: argmax rows are (0, 0, 1); only text 0 finds its audio first.
  EXPECT_NEAR(recall_at_k(s, 1, kT2A), 100.0 / 3.0, 1e-12);
}

TEST(Recall, KOutOfRange) {
  EXPECT_THROW(recall_at_k(Matrix::identity(3), 0, kT2A), ContractError);
  EXPECT_THROW(recall_at_k(Matrix::identity(3), 4, kT2A), ContractError);
  EXPECT_THROW(recall_at_k(Matrix(2, 3), 1, kT2A), ShapeError);
}

TEST(Recall, MatchesOracleMonotoneAndComplete) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    Matrix s = rng.uniform_matrix(n, n, -1.0, 1.0);
    // Coarse rounding forces ties.
    if (trial % 2 == 0)
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::round(s[i] * 2.0) / 2.0;
    for (RetrievalDirection d : {kT2A, kA2T}) {
      const bool rows = d == kA2T;
      const std::vector<std::size_t> ranks = true_match_ranks(s, d);
      const std::vector<std::size_t> ref = oracle::ranks(s, rows);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(ranks[i], ref[i] + 1);
      double prev = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        const double r = recall_at_k(s, k, d);
        EXPECT_EQ(r, oracle::recall(s, k, rows));
        EXPECT_GE(r, prev);
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 100.0);
        prev = r;
      }
      EXPECT_EQ(recall_at_k(s, n, d), 100.0);
    }
  }
}

TEST(Recall, RankTransformInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    const Matrix s = rng.uniform_matrix(n, n, -2.0, 2.0);
    Matrix e = s;
    Matrix a = s;
    const double scale = rng.uniform(0.1, 10.0);
    const double shift = rng.uniform(-5.0, 5.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      e[i] = std::exp(s[i]);
      a[i] = scale * s[i] + shift;
    }
    for (RetrievalDirection d : {kT2A, kA2T})
      for (std::size_t k = 1; k <= n; ++k) {
        EXPECT_EQ(recall_at_k(e, k, d), recall_at_k(s, k, d));
        EXPECT_EQ(recall_at_k(a, k, d), recall_at_k(s, k, d));
      }
  }
}

TEST(Evaluate, ReportCardinalityAndDeterminism) {
  const Model model = small_model(3);
  const Dataset data = small_data(12, 4);
  const std::vector<SimilarityMode> modes = {SimilarityMode::dp, SimilarityMode::tha_dcr};
  const std::vector<RetrievalReport> reports = evaluate(model, data, modes, {1, 5, 10}, 11);
  ASSERT_EQ(reports.size(), 4u);
  for (const RetrievalReport& r : reports) {
    EXPECT_EQ(r.eval_size, 12u);
    EXPECT_EQ(r.seed, 11u);
    EXPECT_EQ(r.r_at.size(), 3u);
    EXPECT_LE(r.r_at.at(1), r.r_at.at(5));
    EXPECT_LE(r.r_at.at(5), r.r_at.at(10));
  }
  EXPECT_EQ(reports, evaluate(model, data, modes, {1, 5, 10}, 11, 4));
  EXPECT_THROW(evaluate(model, data, modes, {13}, 11), ContractError);
  const std::vector<EmbeddingItem> enc = encode_items(model, data.items);
  const Matrix s = batch_similarity(model, std::span<const EmbeddingItem>(enc), SimilarityMode::dp);
  EXPECT_EQ(reports[0].r_at.at(5), recall_at_k(s, 5, reports[0].direction));
}

TEST(Reports, TextAndBinaryCarryHashAndSeed) {
  const Model model = small_model(3);
  const std::vector<RetrievalReport> reports =
      evaluate(model, small_data(6, 4), {SimilarityMode::tha}, {1, 2}, 21);
  const std::string text = format_report_text(reports, 0x1234abcdULL, 21);
  EXPECT_NE(text.find("config_hash=" + hash_hex(0x1234abcdULL)), std::string::npos);
  EXPECT_NE(text.find("seed=21"), std::string::npos);
  EXPECT_NE(text.find("report.1.direction=audio_to_text"), std::string::npos);
  const std::string bytes = encode_report(reports, 0x1234abcdULL, 21);
  const DecodedReport back = decode_report(bytes);
  EXPECT_EQ(back.config_hash, 0x1234abcdULL);
  EXPECT_EQ(back.seed, 21u);
  EXPECT_EQ(back.reports, reports);
  EXPECT_EQ(encode_report(back.reports, back.config_hash, back.seed), bytes);
  EXPECT_THROW(decode_report(bytes.substr(0, bytes.size() - 1)), CorruptRecordError);
}

TEST(BinomialBand, MatchesTailOracle) {
  for (double p : {1.0 / 32.0, 0.1, 0.5}) {
    for (std::size_t n : {32u, 320u}) {
      const CountBand band = binomial_band(n, p, 0.99);
      const long double tail = 0.005L;
      // lo: smallest x with P(X < x) <= tail < P(X <= x).
      if (band.lo > 0) {
        EXPECT_LE(binomial_cdf(n, p, band.lo - 1), tail + 1e-12L);
      }
      EXPECT_GT(binomial_cdf(n, p, band.lo), tail - 1e-12L);
      // hi: P(X > hi) <= tail < P(X >= hi).
      EXPECT_LE(1 - binomial_cdf(n, p, band.hi), tail + 1e-12L);
      if (band.hi > 0) {
        EXPECT_GT(1 - binomial_cdf(n, p, band.hi - 1), tail - 1e-12L);
      }
      EXPECT_LE(band.lo, band.hi);
    }
  }
  EXPECT_THROW(binomial_band(10, 1.5, 0.99), ContractError);
}

TEST(Diagnostics, CovarianceProbabilityAndConfidence) {
  const Model model = small_model(5);
  const Dataset data = small_data(8, 6);
  const std::vector<EmbeddingItem> enc = encode_items(model, data.items);
  const std::span<const EmbeddingItem> items(enc);
  const DcrDiagnostics d = dcr_diagnostics(model, items);
  EXPECT_EQ(d.covariance, batch_covariance(model, items));
  ASSERT_EQ(d.mean_confidence.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) {
    if (!d.probability.column_defined[j]) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += d.probability.probability(i, j);
    EXPECT_NEAR(s, 1.0, 1e-10);
  }
  for (double g : d.mean_confidence) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
  EXPECT_THROW(dcr_diagnostics(model, items.subspan(0, 1)), ContractError);
}

TEST(PairBreakdown, ResumsAndMatchesBatch) {
  const Model model = small_model(7);
  const Dataset data = small_data(5, 8);
  const std::vector<EmbeddingItem> enc = encode_items(model, data.items);
  for (SimilarityMode mode : {SimilarityMode::dp, SimilarityMode::tha, SimilarityMode::dcr, SimilarityMode::tha_dp,
                              SimilarityMode::tha_dcr}) {
    const Matrix s = batch_similarity(model, std::span<const EmbeddingItem>(enc), mode);
    for (std::size_t i = 0; i < enc.size(); ++i)
      for (std::size_t j = 0; j < enc.size(); ++j) {
        const PairBreakdown b = pair_breakdown(model, enc[i], enc[j]);
        EXPECT_NEAR(b.combined(mode), s(i, j), 1e-10);
        double dcr = 0.0;
        for (const FactorTerm& t : b.dcr.terms) dcr += t.confidence * t.cosine;
        EXPECT_NEAR(dcr, b.dcr.total, 1e-10);
        EXPECT_NEAR(b.tha.level[0] + b.tha.level[1] + b.tha.level[2], b.tha.total, 1e-10);
      }
  }
}

TEST(PairBreakdown, FactorTermsMatchDiagnosticsOnPaddedBatch) {
  const Model model = small_model(9);
  const Dataset data = small_data(3, 10);
  const std::vector<EmbeddingItem> enc = encode_items(model, data.items);
  for (const EmbeddingItem& item : enc) {
    const std::vector<EmbeddingItem> padded = {item, item};
    const DcrDiagnostics d = dcr_diagnostics(model, std::span<const EmbeddingItem>(padded));
    const PairBreakdown b = pair_breakdown(model, item, item);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(d.mean_confidence[k], b.dcr.terms[k].confidence, 1e-12);
  }
}

TEST(PairBreakdown, IdenticalGlobalsGiveUnitDp) {
  const Model model = small_model(11);
  const Dataset data = small_data(2, 12);
  std::vector<EmbeddingItem> enc = encode_items(model, data.items);
  enc[0].text.global = enc[0].audio.global;
  EXPECT_NEAR(pair_breakdown(model, enc[0], enc[0]).combined(SimilarityMode::dp), 1.0, 1e-14);
}

}  // namespace
}  // namespace xmal
