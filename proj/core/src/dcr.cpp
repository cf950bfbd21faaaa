// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/dcr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "xmal/errors.hpp"

namespace xmal {

std::string factor_weight_name(Modality modality, std::size_t factor) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "dcr.%s.factor%02zu", modality == Modality::text ? "text" : "audio",
                factor);
  return buf;
}

void init_factor_banks(ad::ParameterStore& store, std::size_t dim, std::size_t factors, Rng& rng) {
  if (factors == 0 || dim % factors != 0) {
    throw ConfigError("embedding dim " + std::to_string(dim) + " is not divisible by K=" +
                      std::to_string(factors));
  }
  const std::size_t width = dim / factors;
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Modality m : {Modality::text, Modality::audio})
    for (std::size_t k = 0; k < factors; ++k)
      store[factor_weight_name(m, k)] = rng.uniform_matrix(width, dim, -bound, bound);
}

std::vector<ad::Var> project_factors(ad::Binder& params, ad::Var globals, Modality modality,
                                     std::size_t factors) {
  const std::size_t dim = globals.cols();
  if (factors == 0 || dim % factors != 0) {
    throw ConfigError("embedding dim " + std::to_string(dim) + " is not divisible by K=" +
                      std::to_string(factors));
  }
  if (globals.rows() == 0) throw ContractError("project_factors: empty batch");
  std::vector<ad::Var> out;
  out.reserve(factors);
  for (std::size_t k = 0; k < factors; ++k) {
    ad::Var w = params(factor_weight_name(modality, k));
    if (w.cols() != dim || w.rows() != dim / factors) {
      throw DimensionError("factor projection " + factor_weight_name(modality, k) + " is " +
                           shape_string(w.value()) + ", expected " + std::to_string(dim / factors) +
                           "x" + std::to_string(dim));
    }
    out.push_back(ad::matmul(globals, ad::transpose(w)));
  }
  return out;
}

std::vector<ad::Var> batch_standardize(const std::vector<ad::Var>& factors, double eps) {
  std::vector<ad::Var> out;
  out.reserve(factors.size());
  for (const ad::Var& e : factors) {
    if (e.rows() < 2) {
      throw ContractError("batch_standardize: batch too small (B=" + std::to_string(e.rows()) +
                          ", need B >= 2)");
    }
    ad::Var centered = ad::sub(e, ad::broadcast_rows(ad::col_mean(e), e.rows()));
    ad::Var inv_std = ad::rsqrt_or_zero(ad::col_mean(ad::square(centered)), eps);
    out.push_back(ad::mul_row(centered, inv_std));
  }
  return out;
}

ad::Var factor_covariance(const std::vector<ad::Var>& z_text, const std::vector<ad::Var>& z_audio) {
  if (z_text.size() != z_audio.size() || z_text.empty()) {
    throw DimensionError("factor_covariance: factor count mismatch " + std::to_string(z_text.size()) +
                         " vs " + std::to_string(z_audio.size()));
  }
  const std::size_t batch = z_text.front().rows();
  const std::size_t width = z_text.front().cols();
  auto flatten = [&](const std::vector<ad::Var>& z) {
    std::vector<ad::Var> rows;
    rows.reserve(z.size());
    for (const ad::Var& f : z) {
      if (f.rows() != batch || f.cols() != width) {
        throw DimensionError("factor_covariance: factor shape " + shape_string(f.value()) +
                             " differs from " + std::to_string(batch) + "x" + std::to_string(width));
      }
      rows.push_back(ad::reshape(f, 1, batch * width));
    }
    return ad::concat_rows(rows);
  };
  ad::Var ft = flatten(z_text);
  ad::Var fa = flatten(z_audio);
  return ad::scale(ad::matmul(ft, ad::transpose(fa)), 1.0 / static_cast<double>(batch * width));
}

namespace {

Matrix off_diagonal_mask(std::size_t k) {
  Matrix m(k, k, 1.0);
  for (std::size_t i = 0; i < k; ++i) m(i, i) = 0.0;
  return m;
}

void require_square(const Matrix& c, const char* op) {
  if (c.rows() != c.cols()) throw DimensionError(std::string(op) + ": covariance must be square, got " + shape_string(c));
}

}  // namespace

ad::Var decoupling_loss(ad::Var covariance) {
  require_square(covariance.value(), "decoupling_loss");
  ad::Var mask = covariance.tape().constant(off_diagonal_mask(covariance.rows()));
  return ad::sum(ad::mul(ad::square(covariance), mask));
}

ad::Var alignment_loss(ad::Var covariance) {
  require_square(covariance.value(), "alignment_loss");
  return ad::sum(ad::square(ad::add_scalar(ad::scale(ad::diag(covariance), -1.0), 1.0)));
}

double decoupling_loss(const Matrix& covariance) {
  ad::Tape tape;
  return decoupling_loss(tape.constant(covariance)).value().item();
}

double alignment_loss(const Matrix& covariance) {
  ad::Tape tape;
  return alignment_loss(tape.constant(covariance)).value().item();
}

double off_diagonal_energy(const Matrix& covariance) { return decoupling_loss(covariance); }

double min_diagonal(const Matrix& covariance) {
  require_square(covariance, "min_diagonal");
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < covariance.rows(); ++i) lo = std::min(lo, covariance(i, i));
  return lo;
}

MatchProbability match_probability(const Matrix& covariance, double min_denominator) {
  require_square(covariance, "match_probability");
  const std::size_t k = covariance.rows();
  MatchProbability out{Matrix(k, k), std::vector<bool>(k, false)};
  for (std::size_t j = 0; j < k; ++j) {
    double denom = 0.0;
    for (std::size_t i = 0; i < k; ++i) denom += covariance(i, j);
    if (std::abs(denom) <= min_denominator) continue;
    out.column_defined[j] = true;
    for (std::size_t i = 0; i < k; ++i) out.probability(i, j) = covariance(i, j) / denom;
  }
  return out;
}

}  // namespace xmal
