// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "xmal/errors.hpp"
#include "xmal/rng.hpp"
#include "xmal/tha.hpp"

namespace xmal {
namespace {

Matrix hinge_normalize_value(const Matrix& s) {
  ad::Tape tape;
  return hinge_normalize(tape.constant(s)).value();
}

double block_similarity_value(const Matrix& q, const Matrix& f) {
  ad::Tape tape;
  return block_similarity(tape.constant(q), tape.constant(f)).value().item();
}

TokenBlockSet random_blocks(Rng& rng, std::array<std::size_t, kLevels> rows, std::size_t dim) {
  TokenBlockSet out;
  for (std::size_t l = 0; l < kLevels; ++l) out.levels[l] = rng.gaussian_matrix(rows[l], dim);
  out.global = rng.gaussian_matrix(1, dim);
  return out;
}

TEST(HingeNormalize, HandColumns) {
  const Matrix s = Matrix::from_rows({{-1, 5, 3}, {-2, 0, 4}});
  const Matrix n = hinge_normalize_value(s);
  EXPECT_EQ(n(0, 0), 0.0);
  EXPECT_EQ(n(1, 0), 0.0);
  EXPECT_NEAR(n(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(n(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(n(0, 2), 0.6, 1e-15);
  EXPECT_NEAR(n(1, 2), 0.8, 1e-15);
}

TEST(HingeNormalize, MatchesOracleAndUnitColumnsProperty) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix s = rng.uniform_matrix(1 + rng.below(6), 1 + rng.below(6), -1.0, 1.0);
    const Matrix n = hinge_normalize_value(s);
    EXPECT_LT(max_abs_diff(n, oracle::matrix(oracle::hinge_normalize(oracle::grid(s)))), 1e-10);
    for (std::size_t j = 0; j < s.cols(); ++j) {
      bool positive = false;
      double sq = 0.0;
      for (std::size_t i = 0; i < s.rows(); ++i) {
        positive = positive || s(i, j) > 0.0;
        sq += n(i, j) * n(i, j);
      }
      if (positive) EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-10);
    }
  }
}

TEST(HingeNormalize, Idempotent) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix n = hinge_normalize_value(rng.gaussian_matrix(4, 3));
    EXPECT_LT(max_abs_diff(hinge_normalize_value(n), n), 1e-12);
  }
}

TEST(Attend, SingleContextReturnsIt) {
  Rng rng(3);
  const Matrix q = rng.gaussian_matrix(4, 6);
  const Matrix c = rng.gaussian_matrix(1, 6);
  const Matrix out = attend(q, c, AttentionConfig{});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t d = 0; d < 6; ++d) EXPECT_NEAR(out(r, d), c(0, d), 1e-14);
}

TEST(Attend, LargeLambdaApproachesHardmax) {
  // Each context column peaks at a different query so the hinge-normalized
  // weights are well separated.
  const Matrix q = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
  const Matrix c = Matrix::from_rows({{1, 0.1, 0}, {0.1, 1, 0}, {0.2, 0.3, 1}});
  AttentionConfig cfg;
  cfg.lambda = 100.0;
  const Matrix out = attend(q, c, cfg);
  const oracle::Grid sbar = [&] {
    oracle::Grid s(2, std::vector<oracle::Real>(3));
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t n = 0; n < 3; ++n)
        s[m][n] = oracle::cosine(oracle::grid(q)[m], oracle::grid(c)[n]);
    return oracle::hinge_normalize(s);
  }();
  for (std::size_t m = 0; m < 2; ++m) {
    std::size_t best = 0;
    for (std::size_t n = 1; n < 3; ++n)
      if (sbar[m][n] > sbar[m][best]) best = n;
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(out(m, d), c(best, d), 1e-6);
  }
}

TEST(Attend, MatchesOracleProperty) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.below(6);
    const Matrix q = rng.gaussian_matrix(1 + rng.below(5), d);
    const Matrix c = rng.gaussian_matrix(1 + rng.below(5), d);
    AttentionConfig cfg;
    cfg.lambda = rng.uniform(0.5, 15.0);
    const Matrix out = attend(q, c, cfg);
    const Matrix ref = oracle::matrix(oracle::attend(oracle::grid(q), oracle::grid(c), cfg.lambda));
    EXPECT_LT(max_abs_diff(out, ref), 1e-10);
  }
}

TEST(Attend, InvariantToContextPermutation) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix q = rng.gaussian_matrix(3, 5);
    const Matrix c = rng.gaussian_matrix(4, 5);
    const std::vector<std::size_t> perm = rng.permutation(4);
    Matrix pc(4, 5);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t k = 0; k < 5; ++k) pc(r, k) = c(perm[r], k);
    EXPECT_LT(max_abs_diff(attend(q, c, AttentionConfig{}), attend(q, pc, AttentionConfig{})), 1e-12);
  }
}

TEST(Attend, ShapeErrors) {
  EXPECT_THROW(attend(Matrix(2, 3, 1.0), Matrix(2, 4, 1.0), AttentionConfig{}), DimensionError);
  EXPECT_THROW(attend(Matrix(0, 3), Matrix(2, 3, 1.0), AttentionConfig{}), ContractError);
  AttentionConfig bad;
  bad.lambda = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(BlockSimilarity, SelfFusedCountsRows) {
  Rng rng(6);
  const Matrix q = rng.gaussian_matrix(3, 5);
  EXPECT_NEAR(block_similarity_value(q, q), 3.0, 1e-14);
  EXPECT_THROW(block_similarity_value(q, rng.gaussian_matrix(2, 5)), DimensionError);
}

TEST(STha, MatchesOracleProperty) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 4 + rng.below(5);
    const TokenBlockSet a = random_blocks(rng, {4, 2, 1}, d);
    const TokenBlockSet t = random_blocks(rng, {5, 5, 5}, d);
    std::vector<oracle::Grid> al;
    std::vector<oracle::Grid> tl;
    for (std::size_t l = 0; l < kLevels; ++l) {
      al.push_back(oracle::grid(a.levels[l]));
      tl.push_back(oracle::grid(t.levels[l]));
    }
    EXPECT_NEAR(s_tha(a, t, AttentionConfig{}), static_cast<double>(oracle::s_tha(al, tl, 9.0L)), 1e-10);
  }
}

TEST(STha, BothIsMeanOfDirections) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const TokenBlockSet a = random_blocks(rng, {4, 2, 1}, 6);
    const TokenBlockSet t = random_blocks(rng, {5, 5, 5}, 6);
    AttentionConfig te;
    te.direction = Direction::text_enhanced;
    AttentionConfig ae;
    ae.direction = Direction::audio_enhanced;
    const double both = s_tha(a, t, AttentionConfig{});
    EXPECT_NEAR(both, 0.5 * (s_tha(a, t, te) + s_tha(a, t, ae)), 1e-12);
    AttentionConfig sum_cfg;
    sum_cfg.combine = DirectionCombine::sum;
    EXPECT_NEAR(s_tha(a, t, sum_cfg), 2.0 * both, 1e-12);
  }
}

TEST(STha, BreakdownResumsToTotal) {
  Rng rng(9);
  const TokenBlockSet a = random_blocks(rng, {4, 2, 1}, 8);
  const TokenBlockSet t = random_blocks(rng, {5, 5, 5}, 8);
  const ThaBreakdown b = s_tha_breakdown(a, t, AttentionConfig{});
  double total = 0.0;
  for (std::size_t l = 0; l < kLevels; ++l) {
    EXPECT_NEAR(b.level[l], 0.5 * (b.text_enhanced[l] + b.audio_enhanced[l]), 1e-12);
    total += b.level[l];
  }
  EXPECT_NEAR(total, b.total, 1e-10);
  EXPECT_EQ(b.total, s_tha(a, t, AttentionConfig{}));
}

TEST(SDp, ScaleInvariantCosine) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = rng.gaussian_matrix(1, 7);
    const Matrix t = rng.gaussian_matrix(1, 7);
    Matrix a2 = a;
    for (std::size_t i = 0; i < a2.size(); ++i) a2[i] *= 3.7;
    EXPECT_NEAR(s_dp(a, t), s_dp(a2, t), 1e-14);
    EXPECT_NEAR(s_dp(a, t), static_cast<double>(oracle::cosine(oracle::grid(a)[0], oracle::grid(t)[0])), 1e-14);
  }
  const Matrix g = Matrix::from_rows({{1, 2, 3}});
  EXPECT_NEAR(s_dp(g, g), 1.0, 1e-15);
}

TEST(Parsing, DirectionsAndCombine) {
  EXPECT_EQ(parse_direction("both"), Direction::both);
  EXPECT_EQ(parse_combine(to_string(DirectionCombine::sum)), DirectionCombine::sum);
  EXPECT_THROW(parse_direction("sideways"), ConfigError);
}

}  // namespace
}  // namespace xmal
