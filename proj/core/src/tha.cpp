// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/tha.hpp"

#include "xmal/errors.hpp"

namespace xmal {

void AttentionConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("attention lambda must be > 0");
  if (!(eps > 0.0)) throw ConfigError("attention eps must be > 0");
}

Direction parse_direction(const std::string& s) {
  if (s == "text_enhanced") return Direction::text_enhanced;
  if (s == "audio_enhanced") return Direction::audio_enhanced;
  if (s == "both") return Direction::both;
  throw ConfigError("unknown attention direction '" + s + "'");
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::text_enhanced: return "text_enhanced";
    case Direction::audio_enhanced: return "audio_enhanced";
    case Direction::both: return "both";
  }
  return "?";
}

DirectionCombine parse_combine(const std::string& s) {
  if (s == "mean") return DirectionCombine::mean;
  if (s == "sum") return DirectionCombine::sum;
  throw ConfigError("unknown direction combine '" + s + "'");
}

std::string to_string(DirectionCombine c) { return c == DirectionCombine::mean ? "mean" : "sum"; }

namespace {

void require_same_width(const ad::Var& a, const ad::Var& b, const char* op) {
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": embedding width mismatch " + shape_string(a.value()) +
                         " vs " + shape_string(b.value()));
  }
}

void require_nonempty(const ad::Var& a, const char* what) {
  if (a.rows() == 0 || a.cols() == 0) throw ContractError(std::string("attend: empty ") + what);
}

PreparedLevel prepare(ad::Var tokens, double eps) {
  ad::Var unit = ad::normalize_rows(tokens, eps);
  return PreparedLevel{tokens, unit, ad::transpose(unit)};
}

ad::Var combine(ad::Var text_enhanced, ad::Var audio_enhanced, const AttentionConfig& cfg) {
  ad::Var both = ad::add(text_enhanced, audio_enhanced);
  return cfg.combine == DirectionCombine::mean ? ad::scale(both, 0.5) : both;
}

}  // namespace

ad::Var token_word_similarity(ad::Var audio_tokens, ad::Var text_tokens, double eps) {
  require_same_width(audio_tokens, text_tokens, "token_word_similarity");
  return ad::matmul(ad::normalize_rows(audio_tokens, eps),
                    ad::transpose(ad::normalize_rows(text_tokens, eps)));
}

ad::Var hinge_normalize(ad::Var similarity, double eps) {
  return ad::normalize_columns(ad::hinge(similarity), eps);
}

ad::Var attend_prepared(const PreparedLevel& queries, const PreparedLevel& contexts,
                        const AttentionConfig& cfg) {
  require_same_width(queries.tokens, contexts.tokens, "attend");
  ad::Var s = ad::matmul(queries.unit, contexts.unit_t);
  ad::Var weights = ad::row_softmax(hinge_normalize(s, cfg.eps), cfg.lambda);
  return ad::matmul(weights, contexts.tokens);
}

ad::Var attend(ad::Var queries, ad::Var contexts, const AttentionConfig& cfg) {
  require_nonempty(queries, "queries");
  require_nonempty(contexts, "contexts");
  cfg.validate();
  return attend_prepared(prepare(queries, cfg.eps), prepare(contexts, cfg.eps), cfg);
}

ad::Var block_similarity(ad::Var queries, ad::Var fused, double eps) {
  if (!queries.value().same_shape(fused.value())) {
    throw DimensionError("block_similarity shape mismatch: " + shape_string(queries.value()) + " vs " +
                         shape_string(fused.value()));
  }
  return ad::sum(ad::mul(ad::normalize_rows(queries, eps), ad::normalize_rows(fused, eps)));
}

PreparedBlocks prepare_blocks(const TokenBlockVars& blocks, double eps) {
  PreparedBlocks out;
  for (std::size_t l = 0; l < kLevels; ++l) out[l] = prepare(blocks.levels[l], eps);
  return out;
}

namespace {

ad::Var directional(const PreparedLevel& q, const PreparedLevel& c, const AttentionConfig& cfg) {
  ad::Var fused = attend_prepared(q, c, cfg);
  return ad::sum(ad::mul(q.unit, ad::normalize_rows(fused, cfg.eps)));
}

ad::Var level_score(const PreparedLevel& audio, const PreparedLevel& text, const AttentionConfig& cfg) {
  switch (cfg.direction) {
    case Direction::text_enhanced: return directional(audio, text, cfg);
    case Direction::audio_enhanced: return directional(text, audio, cfg);
    case Direction::both:
      return combine(directional(audio, text, cfg), directional(text, audio, cfg), cfg);
  }
  throw ContractError("unreachable direction");
}

}  // namespace

ad::Var s_tha_prepared(const PreparedBlocks& audio, const PreparedBlocks& text,
                       const AttentionConfig& cfg) {
  ad::Var total = level_score(audio[0], text[0], cfg);
  for (std::size_t l = 1; l < kLevels; ++l) total = ad::add(total, level_score(audio[l], text[l], cfg));
  return total;
}

ad::Var s_tha(const TokenBlockVars& audio, const TokenBlockVars& text, const AttentionConfig& cfg) {
  cfg.validate();
  for (std::size_t l = 0; l < kLevels; ++l) {
    require_nonempty(audio.levels[l], "audio level");
    require_nonempty(text.levels[l], "text level");
  }
  return s_tha_prepared(prepare_blocks(audio, cfg.eps), prepare_blocks(text, cfg.eps), cfg);
}

ad::Var s_dp(ad::Var audio_global, ad::Var text_global, double eps) {
  require_same_width(audio_global, text_global, "s_dp");
  return ad::sum(ad::mul(ad::normalize_rows(audio_global, eps), ad::normalize_rows(text_global, eps)));
}

ThaBreakdown s_tha_breakdown(const TokenBlockSet& audio, const TokenBlockSet& text,
                             const AttentionConfig& cfg) {
  cfg.validate();
  ad::Tape tape;
  ThaBreakdown out;
  for (std::size_t l = 0; l < kLevels; ++l) {
    PreparedLevel a = prepare(tape.constant(audio.levels[l]), cfg.eps);
    PreparedLevel t = prepare(tape.constant(text.levels[l]), cfg.eps);
    ad::Var te = directional(a, t, cfg);
    ad::Var ae = directional(t, a, cfg);
    out.text_enhanced[l] = te.value().item();
    out.audio_enhanced[l] = ae.value().item();
    out.level[l] = level_score(a, t, cfg).value().item();
  }
  // Same association order as s_tha_prepared.
  out.total = out.level[0];
  for (std::size_t l = 1; l < kLevels; ++l) out.total += out.level[l];
  return out;
}

Matrix attend(const Matrix& queries, const Matrix& contexts, const AttentionConfig& cfg) {
  ad::Tape tape;
  return attend(tape.constant(queries), tape.constant(contexts), cfg).value();
}

double s_tha(const TokenBlockSet& audio, const TokenBlockSet& text, const AttentionConfig& cfg) {
  ad::Tape tape;
  TokenBlockVars a;
  TokenBlockVars t;
  for (std::size_t l = 0; l < kLevels; ++l) {
    a.levels[l] = tape.constant(audio.levels[l]);
    t.levels[l] = tape.constant(text.levels[l]);
  }
  return s_tha(a, t, cfg).value().item();
}

double s_dp(const Matrix& audio_global, const Matrix& text_global, double eps) {
  ad::Tape tape;
  return s_dp(tape.constant(audio_global), tape.constant(text_global), eps).value().item();
}

}  // namespace xmal
