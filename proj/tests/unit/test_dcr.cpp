// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "xmal/dcr.hpp"
#include "xmal/errors.hpp"
#include "xmal/optimizer.hpp"
#include "xmal/rng.hpp"

namespace xmal {
namespace {

using ad::Var;

std::vector<Matrix> values(const std::vector<Var>& vars) {
  std::vector<Matrix> out;
  for (const Var& v : vars) out.push_back(v.value());
  return out;
}

std::vector<Matrix> standardize(const std::vector<Matrix>& factors) {
  ad::Tape tape;
  std::vector<Var> in;
  for (const Matrix& m : factors) in.push_back(tape.constant(m));
  return values(batch_standardize(in));
}

Matrix covariance(const std::vector<Matrix>& zt, const std::vector<Matrix>& za) {
  ad::Tape tape;
  std::vector<Var> t;
  std::vector<Var> a;
  for (const Matrix& m : zt) t.push_back(tape.constant(m));
  for (const Matrix& m : za) a.push_back(tape.constant(m));
  return factor_covariance(t, a).value();
}

std::vector<Matrix> random_factors(Rng& rng, std::size_t k, std::size_t b, std::size_t w) {
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(rng.gaussian_matrix(b, w));
  return out;
}

TEST(ProjectFactors, IdentityBankGivesGlobal) {
  ad::ParameterStore p{{factor_weight_name(Modality::text, 0), Matrix::identity(5)}};
  Rng rng(1);
  const Matrix g = rng.gaussian_matrix(3, 5);
  ad::Tape tape;
  ad::Binder b(tape, p, false);
  const std::vector<Var> f = project_factors(b, tape.constant(g), Modality::text, 1);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].value(), g);
}

TEST(ProjectFactors, SelectionBanksGiveHalves) {
  ad::ParameterStore p{{factor_weight_name(Modality::audio, 0), Matrix::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}})},
                       {factor_weight_name(Modality::audio, 1), Matrix::from_rows({{0, 0, 1, 0}, {0, 0, 0, 1}})}};
  const Matrix g = Matrix::from_rows({{1, 2, 3, 4}});
  ad::Tape tape;
  ad::Binder b(tape, p, false);
  const std::vector<Var> f = project_factors(b, tape.constant(g), Modality::audio, 2);
  EXPECT_EQ(f[0].value(), Matrix::from_rows({{1, 2}}));
  EXPECT_EQ(f[1].value(), Matrix::from_rows({{3, 4}}));
}

TEST(ProjectFactors, MatchesMatmulOracle) {
  Rng rng(2);
  ad::ParameterStore p;
  init_factor_banks(p, 8, 4, rng);
  const Matrix g = rng.gaussian_matrix(3, 8);
  ad::Tape tape;
  ad::Binder b(tape, p, false);
  const std::vector<Var> f = project_factors(b, tape.constant(g), Modality::text, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const Matrix& w = p.at(factor_weight_name(Modality::text, k));
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 2; ++c) {
        long double acc = 0;
        for (std::size_t d = 0; d < 8; ++d) acc += static_cast<long double>(g(r, d)) * w(c, d);
        EXPECT_NEAR(f[k].value()(r, c), static_cast<double>(acc), 1e-12);
      }
  }
}

TEST(ProjectFactors, Divisibility) {
  ad::ParameterStore p;
  Rng rng(3);
  EXPECT_THROW(init_factor_banks(p, 16, 3, rng), ConfigError);
}

TEST(Standardize, TwoPointAndConstant) {
  const std::vector<Matrix> z = standardize({Matrix::from_rows({{1, 5}, {3, 5}})});
  EXPECT_NEAR(z[0](0, 0), -1.0, 1e-15);
  EXPECT_NEAR(z[0](1, 0), 1.0, 1e-15);
  EXPECT_EQ(z[0](0, 1), 0.0);
  EXPECT_EQ(z[0](1, 1), 0.0);
}

TEST(Standardize, MomentsProperty) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix e = rng.gaussian_matrix(8, 3, 2.0);
    const Matrix z = standardize({e})[0];
    EXPECT_LT(max_abs_diff(z, oracle::matrix(oracle::standardize(oracle::grid(e)))), 1e-12);
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      double var = 0.0;
      for (std::size_t r = 0; r < 8; ++r) mean += z(r, c);
      mean /= 8.0;
      for (std::size_t r = 0; r < 8; ++r) var += (z(r, c) - mean) * (z(r, c) - mean);
      EXPECT_NEAR(mean, 0.0, 1e-12);
      EXPECT_NEAR(var / 8.0, 1.0, 1e-10);
    }
  }
}

TEST(Standardize, AffineInvariantUpToSign) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix e = rng.gaussian_matrix(6, 2);
    const double a = rng.uniform(-3.0, 3.0);
    const double c = rng.uniform(-5.0, 5.0);
    if (std::abs(a) < 0.1) continue;
    Matrix t = e;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = a * t[i] + c;
    const Matrix z = standardize({e})[0];
    const Matrix zt = standardize({t})[0];
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(zt[i], (a > 0 ? 1.0 : -1.0) * z[i], 1e-10);
  }
}

TEST(Standardize, BatchTooSmall) {
  EXPECT_THROW(standardize({Matrix(1, 3, 1.0)}), ContractError);
}

TEST(Covariance, MatchesDirectSummation) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(5), b = 2 + rng.below(6), w = 1 + rng.below(4);
    const std::vector<Matrix> zt = random_factors(rng, k, b, w);
    const std::vector<Matrix> za = random_factors(rng, k, b, w);
    std::vector<oracle::Grid> gt;
    std::vector<oracle::Grid> ga;
    for (std::size_t i = 0; i < k; ++i) {
      gt.push_back(oracle::grid(zt[i]));
      ga.push_back(oracle::grid(za[i]));
    }
    EXPECT_LT(max_abs_diff(covariance(zt, za), oracle::matrix(oracle::covariance(gt, ga))), 1e-12);
  }
}

TEST(Covariance, SelfGivesUnitDiagonal) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Matrix> z = standardize(random_factors(rng, 4, 8, 2));
    const Matrix c = covariance(z, z);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(c(i, i), 1.0, 1e-10);
    std::vector<Matrix> neg = z;
    for (Matrix& m : neg)
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = -m[i];
    const Matrix cn = covariance(z, neg);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(cn(i, i), -1.0, 1e-10);
  }
}

TEST(Covariance, IndependentFactorsConcentrate) {
  Rng rng(8);
  const std::vector<Matrix> zt = standardize(random_factors(rng, 4, 512, 2));
  const std::vector<Matrix> za = standardize(random_factors(rng, 4, 512, 2));
  const Matrix c = covariance(zt, za);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) EXPECT_LT(std::abs(c(i, j)), 0.2);
}

TEST(Covariance, ShapeMismatch) {
  EXPECT_THROW(covariance({Matrix(2, 2)}, {Matrix(2, 2), Matrix(2, 2)}), DimensionError);
  EXPECT_THROW(covariance({Matrix(2, 2)}, {Matrix(3, 2)}), DimensionError);
}

TEST(Losses, HandValues) {
  EXPECT_EQ(decoupling_loss(Matrix::from_rows({{2, 0}, {0, -3}})), 0.0);
  EXPECT_DOUBLE_EQ(decoupling_loss(Matrix::from_rows({{1, 0.5}, {-0.5, 1}})), 0.5);
  EXPECT_DOUBLE_EQ(decoupling_loss(Matrix(3, 3, 1.0)), 6.0);
  EXPECT_EQ(alignment_loss(Matrix::identity(4)), 0.0);
  EXPECT_DOUBLE_EQ(alignment_loss(Matrix(2, 2, 0.0)), 2.0);
  Matrix c(3, 3, 0.7);
  c(0, 0) = 0.5;
  c(1, 1) = 1.0;
  c(2, 2) = -1.0;
  EXPECT_DOUBLE_EQ(alignment_loss(c), 4.25);
  EXPECT_EQ(decoupling_loss(Matrix::identity(5)), 0.0);
  EXPECT_THROW(decoupling_loss(Matrix(2, 3)), DimensionError);
}

TEST(Losses, OptimizationReducesOffDiagonalEnergy) {
  const std::size_t b = 32, d = 16, k = 4;
  Rng rng(11);
  const Matrix gt = rng.gaussian_matrix(b, d);
  // Audio globals are a fixed random mixing of the text globals plus noise.
  Matrix ga = matmul(gt, rng.gaussian_matrix(d, d, 1.0 / std::sqrt(static_cast<double>(d))));
  const Matrix noise = rng.gaussian_matrix(b, d, 0.1);
  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += noise[i];
  ad::ParameterStore params;
  init_factor_banks(params, d, k, rng);

  const auto loss = [&](ad::Binder& binder, Matrix* cov) {
    ad::Tape& tape = binder.tape();
    const std::vector<Var> zt = batch_standardize(project_factors(binder, tape.constant(gt), Modality::text, k));
    const std::vector<Var> za = batch_standardize(project_factors(binder, tape.constant(ga), Modality::audio, k));
    Var c = factor_covariance(zt, za);
    if (cov) *cov = c.value();
    return ad::add(decoupling_loss(c), alignment_loss(c));
  };
  const auto current = [&] {
    Matrix c;
    ad::Tape tape;
    ad::Binder binder(tape, params, false);
    loss(binder, &c);
    return c;
  };
  const Matrix c0 = current();
  OptimizerConfig opt;
  opt.kind = OptimizerKind::sgd;
  opt.learning_rate = 1e-2;
  OptimizerState state;
  for (int step = 0; step < 500; ++step) {
    const ad::GradResult g = ad::grad([&](ad::Binder& binder) { return loss(binder, nullptr); }, params);
    optimizer_step(opt, state, params, g.gradients);
  }
  const Matrix c1 = current();
  EXPECT_LE(off_diagonal_energy(c1), 0.5 * off_diagonal_energy(c0));
  EXPECT_GT(min_diagonal(c1), 0.5);
}

TEST(MatchProbability, IdentityUniformAndUndefined) {
  const MatchProbability id = match_probability(Matrix::identity(3));
  EXPECT_EQ(id.probability, Matrix::identity(3));
  Matrix c = Matrix::identity(3);
  for (std::size_t i = 0; i < 3; ++i) c(i, 1) = 0.4;
  const MatchProbability u = match_probability(c);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(u.probability(i, 1), 1.0 / 3.0, 1e-15);
  Matrix z = Matrix::identity(2);
  z(0, 1) = 1e-9;
  z(1, 1) = -1e-9;
  const MatchProbability undefined = match_probability(z);
  EXPECT_FALSE(undefined.column_defined[1]);
  EXPECT_TRUE(undefined.probability.all_finite());
}

TEST(MatchProbability, PositiveColumnsSumToOneProperty) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    const MatchProbability p = match_probability(rng.uniform_matrix(k, k, 0.01, 1.0));
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += p.probability(i, j);
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
  }
}

}  // namespace
}  // namespace xmal
