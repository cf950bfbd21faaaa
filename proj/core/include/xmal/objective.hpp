// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Contrastive objective and batch similarity matrices.
//
//   L_S = -(1/B) (sum_i log softmax_row(S/tau)_ii + sum_i log softmax_col(S/tau)_ii)
//   L   = L_S + alpha L_D + beta L_A
//
// S(i, j) always scores audio i against text j.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xmal/autodiff.hpp"
#include "xmal/data.hpp"
#include "xmal/model.hpp"

namespace xmal {

enum class SimilarityMode { dp, tha, dcr, tha_dp, tha_dcr };

SimilarityMode parse_mode(const std::string& s);
std::string to_string(SimilarityMode m);
// Comma-separated list, e.g. "DP,THA+DCR".
std::vector<SimilarityMode> parse_modes(const std::string& csv);

bool uses_dp(SimilarityMode m);
bool uses_tha(SimilarityMode m);
bool uses_dcr(SimilarityMode m);

struct ObjectiveConfig {
  double tau = 0.07;
  double alpha = 0.01;
  double beta = 0.005;
  SimilarityMode mode = SimilarityMode::tha_dcr;

  void validate() const;
};

// Throws ShapeError if S is not square.
ad::Var nt_xent(ad::Var similarity, double tau);
double nt_xent(const Matrix& similarity, double tau);

ad::Var total_loss(ad::Var l_s, ad::Var l_d, ad::Var l_a, const ObjectiveConfig& cfg);
double total_loss(double l_s, double l_d, double l_a, const ObjectiveConfig& cfg);

// Everything one training step needs, recorded on the binder's tape.
struct BatchForward {
  ad::Var similarity;  // B x B under cfg.mode
  ad::Var covariance;  // K x K; invalid when B < 2
  ad::Var l_s;
  ad::Var l_d;
  ad::Var l_a;
  ad::Var total;
};

BatchForward forward_batch(ad::Binder& params, const ModelConfig& model, const ObjectiveConfig& cfg,
                           std::span<const PairItem* const> items);

// Forward-only encoding of each item with the toy encoders.
std::vector<EmbeddingItem> encode_items(const Model& model, std::span<const PairItem> items,
                                        std::size_t threads = 1);

// Component matrices; each is empty (0 x 0) unless requested.
struct SimilarityParts {
  Matrix dp;
  Matrix tha;
  Matrix dcr;
};

SimilarityParts similarity_parts(const Model& model, std::span<const EmbeddingItem> items, bool want_dp,
                                 bool want_tha, bool want_dcr, std::size_t threads = 1);
Matrix combine_parts(const SimilarityParts& parts, SimilarityMode mode);

// Rows are computed independently, so the result does not depend on
// `threads`.
Matrix batch_similarity(const Model& model, std::span<const EmbeddingItem> items, SimilarityMode mode,
                        std::size_t threads = 1);
Matrix batch_similarity(const Model& model, std::span<const PairItem> items, SimilarityMode mode,
                        std::size_t threads = 1);

// Factors of one item's globals: K rows of 1 x (D/K).
std::vector<Matrix> item_factors(const Model& model, const Matrix& global, Modality modality);

// K x K factor covariance of a batch (forward only). Requires B >= 2.
Matrix batch_covariance(const Model& model, std::span<const EmbeddingItem> items);

// Single pair scored from scratch.
double score_pair(const Model& model, const EmbeddingItem& audio_item, const EmbeddingItem& text_item,
                  SimilarityMode mode);

}  // namespace xmal
