// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Toy dual-stream encoders. Both sides are stacks of residual blocks
//   y = x + relu(x W + b)
// with width D. The text stack has 12 blocks tapped after blocks 4, 10, 12.
// The audio stack has four stages of (2, 2, 6, 2) blocks; stage 1 output is
// discarded and the ends of stages 2, 3, 4 are tapped, which lines them up
// with text blocks 4, 10, 12. Between stages the audio tokens are merged
// pairwise (mean of adjacent rows, then a learned D x D map), so the token
// count follows M -> ceil(M / 2) at each boundary.

#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "xmal/autodiff.hpp"
#include "xmal/matrix.hpp"
#include "xmal/rng.hpp"

namespace xmal {

enum class Modality { text, audio };

inline constexpr std::size_t kLevels = 3;
inline constexpr std::size_t kTextBlocks = 12;
inline constexpr std::array<std::size_t, kLevels> kTextTaps = {4, 10, 12};
inline constexpr std::array<std::size_t, 4> kAudioStageBlocks = {2, 2, 6, 2};
inline constexpr std::size_t kAudioBlocks = 12;
inline constexpr std::size_t kAudioMerges = 3;
inline constexpr std::size_t kMinAudioTokens = 4;

const char* level_name(std::size_t level);

// Per-level token matrices (low, mid, high) plus the pooled global row.
template <typename T>
struct BasicTokenBlockSet {
  std::array<T, kLevels> levels;
  T global;

  friend bool operator==(const BasicTokenBlockSet&, const BasicTokenBlockSet&) = default;
};

using TokenBlockSet = BasicTokenBlockSet<Matrix>;
using TokenBlockVars = BasicTokenBlockSet<ad::Var>;

std::string block_weight_name(Modality modality, std::size_t block);
std::string block_bias_name(Modality modality, std::size_t block);
std::string merge_name(std::size_t boundary);
inline const std::string kTextReadout = "text.readout";

// Weights ~ U(-1/sqrt(D), 1/sqrt(D)), biases 0, merge maps identity.
void init_text_encoder(ad::ParameterStore& store, std::size_t dim, Rng& rng);
void init_audio_encoder(ad::ParameterStore& store, std::size_t dim, Rng& rng);

// Token-count after each audio merge, starting from M input frames:
// {M2, M3, M4} for the three tapped stages.
std::array<std::size_t, kLevels> audio_tap_counts(std::size_t frames);

TokenBlockVars encode_text(ad::Binder& params, ad::Var tokens);
TokenBlockVars encode_audio(ad::Binder& params, ad::Var frames);

// Forward-only helpers.
TokenBlockSet encode_text(const ad::ParameterStore& params, const Matrix& tokens);
TokenBlockSet encode_audio(const ad::ParameterStore& params, const Matrix& frames);
TokenBlockSet values_of(const TokenBlockVars& vars);

}  // namespace xmal
