// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Disentangled cross-modal representation.
//
// A global embedding g (D) is split into K latent factors e_k = W_k g, each
// of width D/K, with one bank of K projections per modality. Over a batch of
// B items the factors are standardized per dimension (biased variance), and
//   C[i][j] = 1/(B * D/K) * sum_b <z_i^text[b], z_j^audio[b]>
// so identical standardized factors give C[i][i] = 1 exactly. The losses are
//   L_D = sum_{i != j} C[i][j]^2      (inter-factor decoupling)
//   L_A = sum_i (1 - C[i][i])^2       (intra-factor alignment)

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xmal/autodiff.hpp"
#include "xmal/encoders.hpp"
#include "xmal/matrix.hpp"
#include "xmal/rng.hpp"

namespace xmal {

std::string factor_weight_name(Modality modality, std::size_t factor);

// K matrices of shape (D/K) x D per modality, U(-1/sqrt(D), 1/sqrt(D)).
void init_factor_banks(ad::ParameterStore& store, std::size_t dim, std::size_t factors, Rng& rng);

// Factors of a batch: K matrices, each B x (D/K).
struct FactorSet {
  Modality modality = Modality::text;
  std::vector<Matrix> factors;
};

// globals: B x D. Returns K vars of shape B x (D/K).
std::vector<ad::Var> project_factors(ad::Binder& params, ad::Var globals, Modality modality,
                                     std::size_t factors);

// Per-dimension batch standardization of each factor matrix. Dimensions
// with variance <= eps standardize to exactly 0. Requires B >= 2.
std::vector<ad::Var> batch_standardize(const std::vector<ad::Var>& factors, double eps = kDefaultEps);

// K x K cross-covariance of standardized text and audio factors.
ad::Var factor_covariance(const std::vector<ad::Var>& z_text, const std::vector<ad::Var>& z_audio);

ad::Var decoupling_loss(ad::Var covariance);
ad::Var alignment_loss(ad::Var covariance);

double decoupling_loss(const Matrix& covariance);
double alignment_loss(const Matrix& covariance);
// sum_{i != j} C[i][j]^2 and min_i C[i][i]; monitoring helpers.
double off_diagonal_energy(const Matrix& covariance);
double min_diagonal(const Matrix& covariance);

// p(e_i, e_j) = C[i][j] / sum_k C[k][j]. Columns whose denominator has
// magnitude <= 1e-8 are flagged undefined and left at zero.
struct MatchProbability {
  Matrix probability;
  std::vector<bool> column_defined;
};

MatchProbability match_probability(const Matrix& covariance, double min_denominator = 1e-8);

}  // namespace xmal
