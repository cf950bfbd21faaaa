// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Confidence-aware aggregation. A two-layer network scores each factor pair
//   g = squash(relu([e_t, e_a] W1 + b1) W2 + b2)
// and the pair similarity is S_DCR = sum_k g_k cos(e_t_k, e_a_k). The same
// network is shared by all K subspaces; weights are not normalized across k.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xmal/autodiff.hpp"
#include "xmal/matrix.hpp"
#include "xmal/rng.hpp"

namespace xmal {

enum class Squash { logistic, none };

Squash parse_squash(const std::string& s);
std::string to_string(Squash s);

inline const std::string kConfidenceW1 = "ca.w1";  // (2D/K) x H
inline const std::string kConfidenceB1 = "ca.b1";  // 1 x H
inline const std::string kConfidenceW2 = "ca.w2";  // H x 1
inline const std::string kConfidenceB2 = "ca.b2";  // 1 x 1

// Both layers U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
void init_confidence(ad::ParameterStore& store, std::size_t factor_dim, std::size_t hidden, Rng& rng);

// e_text, e_audio: 1 x (D/K). Returns 1x1.
ad::Var confidence(ad::Binder& params, ad::Var e_text, ad::Var e_audio, Squash squash);

// One (text, audio) item: K factor rows each 1 x (D/K). Returns 1x1.
ad::Var s_dcr(ad::Binder& params, const std::vector<ad::Var>& text_factors,
              const std::vector<ad::Var>& audio_factors, Squash squash, double eps = kDefaultEps);

// Many pairs at once: audio factors Ba x (D/K), text factors Bt x (D/K).
// Entry (i, j) of the Ba x Bt result scores audio i against text j.
ad::Var s_dcr_matrix(ad::Binder& params, const std::vector<ad::Var>& text_factors,
                     const std::vector<ad::Var>& audio_factors, Squash squash, double eps = kDefaultEps);

struct FactorTerm {
  double confidence = 0.0;
  double cosine = 0.0;
};

struct DcrBreakdown {
  std::vector<FactorTerm> terms;
  double total = 0.0;
};

DcrBreakdown s_dcr_breakdown(const ad::ParameterStore& params, const std::vector<Matrix>& text_factors,
                             const std::vector<Matrix>& audio_factors, Squash squash,
                             double eps = kDefaultEps);

}  // namespace xmal
