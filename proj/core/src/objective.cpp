// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/objective.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "xmal/ca.hpp"
#include "xmal/dcr.hpp"
#include "xmal/errors.hpp"
#include "xmal/parallel.hpp"
#include "xmal/tha.hpp"

namespace xmal {

SimilarityMode parse_mode(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "DP") return SimilarityMode::dp;
  if (u == "THA") return SimilarityMode::tha;
  if (u == "DCR") return SimilarityMode::dcr;
  if (u == "THA+DP") return SimilarityMode::tha_dp;
  if (u == "THA+DCR") return SimilarityMode::tha_dcr;
  throw ConfigError("unknown similarity mode '" + s + "' (expected DP, THA, DCR, THA+DP or THA+DCR)");
}

std::string to_string(SimilarityMode m) {
  switch (m) {
    case SimilarityMode::dp: return "DP";
    case SimilarityMode::tha: return "THA";
    case SimilarityMode::dcr: return "DCR";
    case SimilarityMode::tha_dp: return "THA+DP";
    case SimilarityMode::tha_dcr: return "THA+DCR";
  }
  return "?";
}

std::vector<SimilarityMode> parse_modes(const std::string& csv) {
  std::vector<SimilarityMode> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_mode(item));
  }
  if (out.empty()) throw ConfigError("empty similarity mode list");
  return out;
}

bool uses_dp(SimilarityMode m) { return m == SimilarityMode::dp || m == SimilarityMode::tha_dp; }
bool uses_tha(SimilarityMode m) {
  return m == SimilarityMode::tha || m == SimilarityMode::tha_dp || m == SimilarityMode::tha_dcr;
}
bool uses_dcr(SimilarityMode m) { return m == SimilarityMode::dcr || m == SimilarityMode::tha_dcr; }

void ObjectiveConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be >= 0");
}

ad::Var nt_xent(ad::Var similarity, double tau) {
  if (similarity.rows() != similarity.cols() || similarity.rows() == 0) {
    throw ShapeError("nt_xent: similarity must be square and non-empty, got " + shape_string(similarity.value()));
  }
  if (!(tau > 0.0)) throw ContractError("nt_xent: tau must be > 0");
  const double b = static_cast<double>(similarity.rows());
  ad::Var scaled = ad::scale(similarity, 1.0 / tau);
  ad::Var by_row = ad::sum(ad::diag(ad::row_log_softmax(scaled)));
  ad::Var by_col = ad::sum(ad::diag(ad::row_log_softmax(ad::transpose(scaled))));
  return ad::scale(ad::add(by_row, by_col), -1.0 / b);
}

double nt_xent(const Matrix& similarity, double tau) {
  ad::Tape tape;
  return nt_xent(tape.constant(similarity), tau).value().item();
}

ad::Var total_loss(ad::Var l_s, ad::Var l_d, ad::Var l_a, const ObjectiveConfig& cfg) {
  return ad::add(ad::add(l_s, ad::scale(l_d, cfg.alpha)), ad::scale(l_a, cfg.beta));
}

double total_loss(double l_s, double l_d, double l_a, const ObjectiveConfig& cfg) {
  return (l_s + cfg.alpha * l_d) + cfg.beta * l_a;
}

BatchForward forward_batch(ad::Binder& params, const ModelConfig& model, const ObjectiveConfig& cfg,
                           std::span<const PairItem* const> items) {
  const std::size_t batch = items.size();
  if (batch == 0) throw ContractError("forward_batch: empty batch");
  ad::Tape& tape = params.tape();

  std::vector<TokenBlockVars> audio;
  std::vector<TokenBlockVars> text;
  std::vector<ad::Var> audio_globals;
  std::vector<ad::Var> text_globals;
  for (const PairItem* item : items) {
    audio.push_back(encode_audio(params, tape.constant(item->audio)));
    text.push_back(encode_text(params, tape.constant(item->text)));
    audio_globals.push_back(audio.back().global);
    text_globals.push_back(text.back().global);
  }
  ad::Var a_glob = ad::concat_rows(audio_globals);
  ad::Var t_glob = ad::concat_rows(text_globals);

  const bool need_factors = uses_dcr(cfg.mode) || batch >= 2;
  std::vector<ad::Var> audio_factors;
  std::vector<ad::Var> text_factors;
  if (need_factors) {
    audio_factors = project_factors(params, a_glob, Modality::audio, model.factors);
    text_factors = project_factors(params, t_glob, Modality::text, model.factors);
  }

  ad::Var similarity;
  auto accumulate = [&](ad::Var part) { similarity = similarity.valid() ? ad::add(similarity, part) : part; };
  if (uses_tha(cfg.mode)) {
    std::vector<PreparedBlocks> pa;
    std::vector<PreparedBlocks> pt;
    for (std::size_t b = 0; b < batch; ++b) {
      pa.push_back(prepare_blocks(audio[b], model.eps));
      pt.push_back(prepare_blocks(text[b], model.eps));
    }
    std::vector<ad::Var> scores;
    scores.reserve(batch * batch);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < batch; ++j) scores.push_back(s_tha_prepared(pa[i], pt[j], model.attention));
    accumulate(ad::stack_scalars(scores, batch, batch));
  }
  if (uses_dp(cfg.mode)) {
    accumulate(ad::matmul(ad::normalize_rows(a_glob, model.eps),
                          ad::transpose(ad::normalize_rows(t_glob, model.eps))));
  }
  if (uses_dcr(cfg.mode)) {
    accumulate(s_dcr_matrix(params, text_factors, audio_factors, model.squash, model.eps));
  }

  BatchForward out;
  out.similarity = similarity;
  out.l_s = nt_xent(similarity, cfg.tau);
  if (batch >= 2) {
    out.covariance = factor_covariance(batch_standardize(text_factors, model.eps),
                                       batch_standardize(audio_factors, model.eps));
    out.l_d = decoupling_loss(out.covariance);
    out.l_a = alignment_loss(out.covariance);
  } else {
    out.l_d = tape.constant(Matrix::scalar(0.0));
    out.l_a = tape.constant(Matrix::scalar(0.0));
  }
  out.total = total_loss(out.l_s, out.l_d, out.l_a, cfg);
  return out;
}

std::vector<EmbeddingItem> encode_items(const Model& model, std::span<const PairItem> items, std::size_t threads) {
  std::vector<EmbeddingItem> out(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) {
    out[i].audio = encode_audio(model.params, items[i].audio);
    out[i].text = encode_text(model.params, items[i].text);
  });
  return out;
}

std::vector<Matrix> item_factors(const Model& model, const Matrix& global, Modality modality) {
  std::vector<Matrix> out;
  out.reserve(model.config.factors);
  for (std::size_t k = 0; k < model.config.factors; ++k) {
    out.push_back(matmul(global, transpose(model.params.at(factor_weight_name(modality, k)))));
  }
  return out;
}

namespace {

void set_row(Matrix& m, std::size_t r, const Matrix& row) {
  if (row.size() != m.cols()) {
    throw DimensionError("row of width " + std::to_string(row.size()) + " does not fit " + shape_string(m));
  }
  std::copy(row.data().begin(), row.data().end(), m.row(r).begin());
}

Matrix stack_globals(std::span<const EmbeddingItem> items, bool audio) {
  const std::size_t dim = (audio ? items[0].audio.global : items[0].text.global).cols();
  Matrix out(items.size(), dim);
  for (std::size_t b = 0; b < items.size(); ++b) set_row(out, b, audio ? items[b].audio.global : items[b].text.global);
  return out;
}

}  // namespace

SimilarityParts similarity_parts(const Model& model, std::span<const EmbeddingItem> items, bool want_dp,
                                 bool want_tha, bool want_dcr, std::size_t threads) {
  const std::size_t n = items.size();
  if (n == 0) throw ContractError("similarity: no items");
  const ModelConfig& cfg = model.config;
  SimilarityParts parts;

  if (want_dp) {
    parts.dp = matmul(normalize_rows(stack_globals(items, true), cfg.eps),
                      transpose(normalize_rows(stack_globals(items, false), cfg.eps)));
  }

  if (want_tha) {
    parts.tha = Matrix(n, n);
    parallel_for(n, threads, [&](std::size_t i) {
      ad::Tape tape;
      auto constants = [&](const TokenBlockSet& set) {
        TokenBlockVars v;
        for (std::size_t l = 0; l < kLevels; ++l) v.levels[l] = tape.constant(set.levels[l]);
        v.global = tape.constant(set.global);
        return prepare_blocks(v, cfg.eps);
      };
      const PreparedBlocks audio = constants(items[i].audio);
      for (std::size_t j = 0; j < n; ++j) {
        parts.tha(i, j) = s_tha_prepared(audio, constants(items[j].text), cfg.attention).value().item();
      }
    });
  }

  if (want_dcr) {
    const std::size_t k_count = cfg.factors;
    std::vector<std::vector<Matrix>> audio_rows(n);
    std::vector<Matrix> text_banks(k_count, Matrix(n, cfg.factor_dim()));
    for (std::size_t b = 0; b < n; ++b) {
      audio_rows[b] = item_factors(model, items[b].audio.global, Modality::audio);
      const std::vector<Matrix> tf = item_factors(model, items[b].text.global, Modality::text);
      for (std::size_t k = 0; k < k_count; ++k) set_row(text_banks[k], b, tf[k]);
    }
    parts.dcr = Matrix(n, n);
    parallel_for(n, threads, [&](std::size_t i) {
      ad::Tape tape;
      ad::Binder binder(tape, model.params, false);
      std::vector<ad::Var> tv;
      std::vector<ad::Var> av;
      for (std::size_t k = 0; k < k_count; ++k) {
        tv.push_back(tape.constant(text_banks[k]));
        av.push_back(tape.constant(audio_rows[i][k]));
      }
      const Matrix row = s_dcr_matrix(binder, tv, av, cfg.squash, cfg.eps).value();
      set_row(parts.dcr, i, row);
    });
  }
  return parts;
}

Matrix combine_parts(const SimilarityParts& parts, SimilarityMode mode) {
  Matrix out;
  auto accumulate = [&](const Matrix& m) {
    if (m.rows() == 0) throw ContractError("combine_parts: component for mode " + to_string(mode) + " missing");
    if (out.rows() == 0) {
      out = m;
    } else {
      out += m;
    }
  };
  if (uses_tha(mode)) accumulate(parts.tha);
  if (uses_dp(mode)) accumulate(parts.dp);
  if (uses_dcr(mode)) accumulate(parts.dcr);
  return out;
}

Matrix batch_similarity(const Model& model, std::span<const EmbeddingItem> items, SimilarityMode mode,
                        std::size_t threads) {
  return combine_parts(similarity_parts(model, items, uses_dp(mode), uses_tha(mode), uses_dcr(mode), threads),
                       mode);
}

Matrix batch_similarity(const Model& model, std::span<const PairItem> items, SimilarityMode mode,
                        std::size_t threads) {
  const std::vector<EmbeddingItem> encoded = encode_items(model, items, threads);
  return batch_similarity(model, std::span<const EmbeddingItem>(encoded), mode, threads);
}

Matrix batch_covariance(const Model& model, std::span<const EmbeddingItem> items) {
  if (items.size() < 2) {
    throw ContractError("batch_covariance: batch too small (B=" + std::to_string(items.size()) + ", need B >= 2)");
  }
  ad::Tape tape;
  ad::Binder binder(tape, model.params, false);
  const ModelConfig& cfg = model.config;
  auto factors = [&](bool audio) {
    return batch_standardize(project_factors(binder, tape.constant(stack_globals(items, audio)),
                                             audio ? Modality::audio : Modality::text, cfg.factors),
                             cfg.eps);
  };
  return factor_covariance(factors(false), factors(true)).value();
}

double score_pair(const Model& model, const EmbeddingItem& audio_item, const EmbeddingItem& text_item,
                  SimilarityMode mode) {
  const ModelConfig& cfg = model.config;
  double total = 0.0;
  if (uses_tha(mode)) total += s_tha(audio_item.audio, text_item.text, cfg.attention);
  if (uses_dp(mode)) total += s_dp(audio_item.audio.global, text_item.text.global, cfg.eps);
  if (uses_dcr(mode)) {
    total += s_dcr_breakdown(model.params, item_factors(model, text_item.text.global, Modality::text),
                             item_factors(model, audio_item.audio.global, Modality::audio), cfg.squash, cfg.eps)
                 .total;
  }
  return total;
}

}  // namespace xmal
