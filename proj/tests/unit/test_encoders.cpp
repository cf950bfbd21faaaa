// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "xmal/encoders.hpp"
#include "xmal/errors.hpp"
#include "xmal/model.hpp"
#include "xmal/rng.hpp"

namespace xmal {
namespace {

ModelConfig small_config(std::size_t dim = 16, std::size_t factors = 4) {
  ModelConfig cfg;
  cfg.dim = dim;
  cfg.factors = factors;
  return cfg;
}

// Zero residual branches make every block the identity map.
ad::ParameterStore identity_blocks(std::size_t dim) {
  ad::ParameterStore p = Model::initialize(small_config(dim), 1).params;
  for (Modality m : {Modality::text, Modality::audio})
    for (std::size_t b = 1; b <= kTextBlocks; ++b) {
      p[block_weight_name(m, b)] = Matrix(dim, dim);
      p[block_bias_name(m, b)] = Matrix(1, dim);
    }
  return p;
}

TEST(TextEncoder, IdentityBlocksPassInputThrough) {
  const ad::ParameterStore p = identity_blocks(16);
  Rng rng(1);
  const Matrix x = rng.gaussian_matrix(1, 16);
  const TokenBlockSet out = encode_text(p, x);
  for (std::size_t l = 0; l < kLevels; ++l) EXPECT_EQ(out.levels[l], x);
  EXPECT_LT(max_abs_diff(out.global, x), 1e-15);
}

TEST(TextEncoder, TapShapes) {
  const Model model = Model::initialize(small_config(), 3);
  Rng rng(2);
  const TokenBlockSet out = encode_text(model.params, rng.gaussian_matrix(5, 16));
  for (std::size_t l = 0; l < kLevels; ++l) {
    EXPECT_EQ(out.levels[l].rows(), 5u);
    EXPECT_EQ(out.levels[l].cols(), 16u);
  }
  EXPECT_EQ(out.global.rows(), 1u);
  EXPECT_EQ(out.global.cols(), 16u);
}

TEST(TextEncoder, PerturbingBlockElevenMovesOnlyLastTap) {
  Model model = Model::initialize(small_config(), 4);
  Rng rng(3);
  const Matrix x = rng.gaussian_matrix(5, 16);
  const TokenBlockSet base = encode_text(model.params, x);
  Matrix& w = model.params[block_bias_name(Modality::text, 11)];
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += 0.5;
  const TokenBlockSet moved = encode_text(model.params, x);
  EXPECT_EQ(moved.levels[0], base.levels[0]);
  EXPECT_EQ(moved.levels[1], base.levels[1]);
  EXPECT_GT(max_abs_diff(moved.levels[2], base.levels[2]), 1e-3);
  EXPECT_GT(max_abs_diff(moved.global, base.global), 1e-6);
}

TEST(TextEncoder, PermutationEquivariantLevelsInvariantGlobal) {
  const Model model = Model::initialize(small_config(), 5);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = rng.gaussian_matrix(5, 16);
    const std::vector<std::size_t> perm = rng.permutation(5);
    Matrix px(5, 16);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 16; ++c) px(r, c) = x(perm[r], c);
    const TokenBlockSet a = encode_text(model.params, x);
    const TokenBlockSet b = encode_text(model.params, px);
    for (std::size_t l = 0; l < kLevels; ++l)
      for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 16; ++c) EXPECT_NEAR(b.levels[l](r, c), a.levels[l](perm[r], c), 1e-12);
    EXPECT_LT(max_abs_diff(a.global, b.global), 1e-12);
  }
}

TEST(TextEncoder, WidthMismatch) {
  const Model model = Model::initialize(small_config(), 5);
  EXPECT_THROW(encode_text(model.params, Matrix(3, 8)), DimensionError);
  EXPECT_THROW(encode_text(model.params, Matrix(0, 16)), ContractError);
}

TEST(AudioEncoder, TapCounts) {
  EXPECT_EQ(audio_tap_counts(8), (std::array<std::size_t, kLevels>{4, 2, 1}));
  EXPECT_EQ(audio_tap_counts(5), (std::array<std::size_t, kLevels>{3, 2, 1}));
  const Model model = Model::initialize(small_config(), 6);
  Rng rng(5);
  const TokenBlockSet out = encode_audio(model.params, rng.gaussian_matrix(8, 16));
  EXPECT_EQ(out.levels[0].rows(), 4u);
  EXPECT_EQ(out.levels[1].rows(), 2u);
  EXPECT_EQ(out.levels[2].rows(), 1u);
  EXPECT_EQ(out.global.cols(), 16u);
}

TEST(AudioEncoder, IdentityBlocksGiveMeanOfFrames) {
  const ad::ParameterStore p = identity_blocks(16);
  Rng rng(6);
  const Matrix x = rng.gaussian_matrix(8, 16);
  const TokenBlockSet out = encode_audio(p, x);
  for (std::size_t c = 0; c < 16; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 8; ++r) mean += x(r, c);
    EXPECT_NEAR(out.global(0, c), mean / 8.0, 1e-14);
  }
}

TEST(AudioEncoder, TooFewFrames) {
  const Model model = Model::initialize(small_config(), 6);
  EXPECT_THROW(encode_audio(model.params, Matrix(3, 16, 1.0)), ContractError);
}

TEST(Model, ShapesMatchConfig) {
  const ModelConfig cfg = small_config(32, 8);
  const Model model = Model::initialize(cfg, 1);
  EXPECT_NO_THROW(check_shapes(cfg, model.params));
  EXPECT_THROW(check_shapes(small_config(32, 4), model.params), ShapeError);
  EXPECT_THROW(small_config(16, 3).validate(), ConfigError);
}

TEST(Model, InitializationDeterministic) {
  EXPECT_EQ(Model::initialize(small_config(), 9).params, Model::initialize(small_config(), 9).params);
  EXPECT_NE(Model::initialize(small_config(), 9).params, Model::initialize(small_config(), 10).params);
}

}  // namespace
}  // namespace xmal
