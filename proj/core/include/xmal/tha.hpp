// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical stacked cross attention.
//
// For queries Q (M x D) and contexts C (N x D):
//   s      = cos(q_m, c_n)                          (M x N)
//   s_bar  = [s]_+ / sqrt(sum_m [s]_+^2)            per column
//   alpha  = softmax_n(lambda * s_bar)              per row
//   fused  = alpha C                                (M x D)
//   score  = sum_m cos(q_m, fused_m)
// Text-enhanced attention uses audio tokens as queries over text words;
// audio-enhanced swaps the roles. S_THA adds the per-level scores.

#pragma once

#include <array>
#include <string>

#include "xmal/autodiff.hpp"
#include "xmal/encoders.hpp"
#include "xmal/matrix.hpp"

namespace xmal {

enum class Direction { text_enhanced, audio_enhanced, both };
// How the two directional scores of a level merge when direction == both.
enum class DirectionCombine { mean, sum };

struct AttentionConfig {
  double lambda = 9.0;
  Direction direction = Direction::both;
  DirectionCombine combine = DirectionCombine::mean;
  double eps = kDefaultEps;

  void validate() const;
};

Direction parse_direction(const std::string& s);
std::string to_string(Direction d);
DirectionCombine parse_combine(const std::string& s);
std::string to_string(DirectionCombine c);

ad::Var token_word_similarity(ad::Var audio_tokens, ad::Var text_tokens, double eps = kDefaultEps);
ad::Var hinge_normalize(ad::Var similarity, double eps = kDefaultEps);
ad::Var attend(ad::Var queries, ad::Var contexts, const AttentionConfig& cfg);
ad::Var block_similarity(ad::Var queries, ad::Var fused, double eps = kDefaultEps);
ad::Var s_tha(const TokenBlockVars& audio, const TokenBlockVars& text, const AttentionConfig& cfg);
ad::Var s_dp(ad::Var audio_global, ad::Var text_global, double eps = kDefaultEps);

// Row-normalized copies of a token set, computed once per item so that
// scoring many pairs does not renormalize the same rows repeatedly.
struct PreparedLevel {
  ad::Var tokens;
  ad::Var unit;    // normalize_rows(tokens)
  ad::Var unit_t;  // transpose(unit)
};
using PreparedBlocks = std::array<PreparedLevel, kLevels>;

PreparedBlocks prepare_blocks(const TokenBlockVars& blocks, double eps = kDefaultEps);
ad::Var attend_prepared(const PreparedLevel& queries, const PreparedLevel& contexts,
                        const AttentionConfig& cfg);
ad::Var s_tha_prepared(const PreparedBlocks& audio, const PreparedBlocks& text,
                       const AttentionConfig& cfg);

// Per-level, per-direction score breakdown of S_THA.
struct ThaBreakdown {
  std::array<double, kLevels> text_enhanced{};
  std::array<double, kLevels> audio_enhanced{};
  std::array<double, kLevels> level{};
  double total = 0.0;
};

ThaBreakdown s_tha_breakdown(const TokenBlockSet& audio, const TokenBlockSet& text,
                             const AttentionConfig& cfg);

// Forward-only conveniences.
Matrix attend(const Matrix& queries, const Matrix& contexts, const AttentionConfig& cfg);
double s_tha(const TokenBlockSet& audio, const TokenBlockSet& text, const AttentionConfig& cfg);
double s_dp(const Matrix& audio_global, const Matrix& text_global, double eps = kDefaultEps);

}  // namespace xmal
