// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/ca.hpp"

#include <cmath>

#include "xmal/errors.hpp"

namespace xmal {

Squash parse_squash(const std::string& s) {
  if (s == "logistic") return Squash::logistic;
  if (s == "none") return Squash::none;
  throw ConfigError("unknown confidence squash '" + s + "'");
}

std::string to_string(Squash s) { return s == Squash::logistic ? "logistic" : "none"; }

void init_confidence(ad::ParameterStore& store, std::size_t factor_dim, std::size_t hidden, Rng& rng) {
  const double b1 = 1.0 / std::sqrt(static_cast<double>(2 * factor_dim));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  store[kConfidenceW1] = rng.uniform_matrix(2 * factor_dim, hidden, -b1, b1);
  store[kConfidenceB1] = Matrix(1, hidden);
  store[kConfidenceW2] = rng.uniform_matrix(hidden, 1, -b2, b2);
  store[kConfidenceB2] = Matrix(1, 1);
}

namespace {

ad::Var squash_output(ad::Var logits, Squash squash) {
  return squash == Squash::logistic ? ad::sigmoid(logits) : logits;
}

void require_pair(const ad::Var& t, const ad::Var& a, const ad::Binder& params, bool same_rows = true) {
  if (t.cols() != a.cols() || (same_rows && t.rows() != a.rows())) {
    throw DimensionError("confidence: factor shapes differ " + shape_string(t.value()) + " vs " +
                         shape_string(a.value()));
  }
  const Matrix& w1 = params.store().at(kConfidenceW1);
  if (w1.rows() != 2 * t.cols()) {
    throw DimensionError("confidence: input width " + std::to_string(2 * t.cols()) +
                         " does not match first layer " + shape_string(w1));
  }
}

}  // namespace

ad::Var confidence(ad::Binder& params, ad::Var e_text, ad::Var e_audio, Squash squash) {
  require_pair(e_text, e_audio, params);
  ad::Var x = ad::concat_cols(e_text, e_audio);
  ad::Var h = ad::hinge(ad::add_row(ad::matmul(x, params(kConfidenceW1)), params(kConfidenceB1)));
  return squash_output(ad::add(ad::matmul(h, params(kConfidenceW2)), params(kConfidenceB2)), squash);
}

ad::Var s_dcr(ad::Binder& params, const std::vector<ad::Var>& text_factors,
              const std::vector<ad::Var>& audio_factors, Squash squash, double eps) {
  if (text_factors.size() != audio_factors.size() || text_factors.empty()) {
    throw DimensionError("s_dcr: factor count mismatch " + std::to_string(text_factors.size()) + " vs " +
                         std::to_string(audio_factors.size()));
  }
  ad::Var total;
  for (std::size_t k = 0; k < text_factors.size(); ++k) {
    ad::Var g = confidence(params, text_factors[k], audio_factors[k], squash);
    ad::Var cos = ad::sum(ad::mul(ad::normalize_rows(text_factors[k], eps),
                                  ad::normalize_rows(audio_factors[k], eps)));
    ad::Var term = ad::mul(g, cos);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

ad::Var s_dcr_matrix(ad::Binder& params, const std::vector<ad::Var>& text_factors,
                     const std::vector<ad::Var>& audio_factors, Squash squash, double eps) {
  if (text_factors.size() != audio_factors.size() || text_factors.empty()) {
    throw DimensionError("s_dcr_matrix: factor count mismatch " + std::to_string(text_factors.size()) +
                         " vs " + std::to_string(audio_factors.size()));
  }
  const std::size_t audio_rows = audio_factors.front().rows();
  const std::size_t text_rows = text_factors.front().rows();
  const std::size_t width = audio_factors.front().cols();
  require_pair(text_factors.front(), audio_factors.front(), params, false);

  // First layer splits over the concatenation: [e_t, e_a] W1 = e_t W1[:d] + e_a W1[d:].
  ad::Var w1 = params(kConfidenceW1);
  ad::Var w1_text = ad::slice_rows(w1, 0, width);
  ad::Var w1_audio = ad::slice_rows(w1, width, width);
  ad::Var b1 = params(kConfidenceB1);
  ad::Var w2 = params(kConfidenceW2);
  ad::Var b2 = params(kConfidenceB2);

  ad::Var total;
  for (std::size_t k = 0; k < text_factors.size(); ++k) {
    ad::Var pre = ad::pairwise_add(ad::matmul(audio_factors[k], w1_audio),
                                   ad::matmul(text_factors[k], w1_text));
    ad::Var h = ad::hinge(ad::add_row(pre, b1));
    ad::Var logits = ad::add_row(ad::matmul(h, w2), b2);
    ad::Var g = ad::reshape(squash_output(logits, squash), audio_rows, text_rows);
    ad::Var cos = ad::matmul(ad::normalize_rows(audio_factors[k], eps),
                             ad::transpose(ad::normalize_rows(text_factors[k], eps)));
    ad::Var term = ad::mul(g, cos);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

DcrBreakdown s_dcr_breakdown(const ad::ParameterStore& params, const std::vector<Matrix>& text_factors,
                             const std::vector<Matrix>& audio_factors, Squash squash, double eps) {
  if (text_factors.size() != audio_factors.size()) {
    throw DimensionError("s_dcr_breakdown: factor count mismatch");
  }
  ad::Tape tape;
  ad::Binder binder(tape, params, false);
  DcrBreakdown out;
  for (std::size_t k = 0; k < text_factors.size(); ++k) {
    ad::Var t = tape.constant(text_factors[k]);
    ad::Var a = tape.constant(audio_factors[k]);
    FactorTerm term;
    term.confidence = confidence(binder, t, a, squash).value().item();
    term.cosine = cosine(text_factors[k].data(), audio_factors[k].data(), eps);
    out.terms.push_back(term);
  }
  std::vector<ad::Var> tv;
  std::vector<ad::Var> av;
  for (std::size_t k = 0; k < text_factors.size(); ++k) {
    tv.push_back(tape.constant(text_factors[k]));
    av.push_back(tape.constant(audio_factors[k]));
  }
  out.total = s_dcr(binder, tv, av, squash, eps).value().item();
  return out;
}

}  // namespace xmal
