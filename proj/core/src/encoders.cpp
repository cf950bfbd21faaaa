// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/encoders.hpp"

#include <cmath>
#include <cstdio>

#include "xmal/errors.hpp"

namespace xmal {

namespace {

const char* prefix(Modality m) { return m == Modality::text ? "text" : "audio"; }

std::string numbered(const char* head, std::size_t n, const char* tail) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%02zu%s", head, n, tail);
  return buf;
}

void init_blocks(ad::ParameterStore& store, Modality modality, std::size_t blocks, std::size_t dim,
                 Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t b = 1; b <= blocks; ++b) {
    store[block_weight_name(modality, b)] = rng.uniform_matrix(dim, dim, -bound, bound);
    store[block_bias_name(modality, b)] = Matrix(1, dim);
  }
}

ad::Var residual_block(ad::Binder& params, Modality modality, std::size_t block, ad::Var x) {
  ad::Var w = params(block_weight_name(modality, block));
  ad::Var b = params(block_bias_name(modality, block));
  return ad::add(x, ad::hinge(ad::add_row(ad::matmul(x, w), b)));
}

void require_width(const ad::Binder& params, const ad::Var& input, Modality modality) {
  const Matrix& w = params.store().at(block_weight_name(modality, 1));
  if (input.cols() != w.rows()) {
    throw DimensionError(std::string(prefix(modality)) + " input width " + std::to_string(input.cols()) +
                         " does not match model width " + std::to_string(w.rows()));
  }
}

}  // namespace

const char* level_name(std::size_t level) {
  static constexpr const char* kNames[kLevels] = {"low", "mid", "high"};
  return level < kLevels ? kNames[level] : "?";
}

std::string block_weight_name(Modality modality, std::size_t block) {
  return std::string(prefix(modality)) + numbered(".block", block, ".weight");
}

std::string block_bias_name(Modality modality, std::size_t block) {
  return std::string(prefix(modality)) + numbered(".block", block, ".bias");
}

std::string merge_name(std::size_t boundary) { return numbered("audio.merge", boundary, ""); }

void init_text_encoder(ad::ParameterStore& store, std::size_t dim, Rng& rng) {
  init_blocks(store, Modality::text, kTextBlocks, dim, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  store[kTextReadout] = rng.uniform_matrix(dim, 1, -bound, bound);
}

void init_audio_encoder(ad::ParameterStore& store, std::size_t dim, Rng& rng) {
  init_blocks(store, Modality::audio, kAudioBlocks, dim, rng);
  for (std::size_t m = 1; m <= kAudioMerges; ++m) store[merge_name(m)] = Matrix::identity(dim);
}

std::array<std::size_t, kLevels> audio_tap_counts(std::size_t frames) {
  std::array<std::size_t, kLevels> counts{};
  std::size_t m = frames;
  for (std::size_t level = 0; level < kLevels; ++level) {
    m = (m + 1) / 2;
    counts[level] = m;
  }
  return counts;
}

TokenBlockVars encode_text(ad::Binder& params, ad::Var tokens) {
  if (tokens.rows() == 0) throw ContractError("encode_text: empty token sequence");
  require_width(params, tokens, Modality::text);
  TokenBlockVars out;
  ad::Var x = tokens;
  std::size_t tap = 0;
  for (std::size_t b = 1; b <= kTextBlocks; ++b) {
    x = residual_block(params, Modality::text, b, x);
    if (tap < kLevels && b == kTextTaps[tap]) out.levels[tap++] = x;
  }
  // Learned attention readout: softmax over per-token scores x_n . w.
  ad::Var scores = ad::transpose(ad::matmul(x, params(kTextReadout)));
  out.global = ad::matmul(ad::row_softmax(scores, 1.0), x);
  return out;
}

TokenBlockVars encode_audio(ad::Binder& params, ad::Var frames) {
  if (frames.rows() < kMinAudioTokens) {
    throw ContractError("encode_audio: need at least " + std::to_string(kMinAudioTokens) +
                        " frames, got " + std::to_string(frames.rows()));
  }
  require_width(params, frames, Modality::audio);
  TokenBlockVars out;
  ad::Var x = frames;
  std::size_t block = 1;
  for (std::size_t stage = 0; stage < kAudioStageBlocks.size(); ++stage) {
    if (stage > 0) x = ad::matmul(ad::merge_pairs(x), params(merge_name(stage)));
    for (std::size_t i = 0; i < kAudioStageBlocks[stage]; ++i)
      x = residual_block(params, Modality::audio, block++, x);
    if (stage > 0) out.levels[stage - 1] = x;
  }
  out.global = ad::col_mean(out.levels[kLevels - 1]);
  return out;
}

TokenBlockSet values_of(const TokenBlockVars& vars) {
  TokenBlockSet out;
  for (std::size_t l = 0; l < kLevels; ++l) out.levels[l] = vars.levels[l].value();
  out.global = vars.global.value();
  return out;
}

TokenBlockSet encode_text(const ad::ParameterStore& params, const Matrix& tokens) {
  ad::Tape tape;
  ad::Binder binder(tape, params, false);
  return values_of(encode_text(binder, tape.constant(tokens)));
}

TokenBlockSet encode_audio(const ad::ParameterStore& params, const Matrix& frames) {
  ad::Tape tape;
  ad::Binder binder(tape, params, false);
  return values_of(encode_audio(binder, tape.constant(frames)));
}

}  // namespace xmal
