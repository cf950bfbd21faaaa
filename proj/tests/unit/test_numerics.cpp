// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "xmal/autodiff.hpp"
#include "xmal/binary_io.hpp"
#include "xmal/config.hpp"
#include "xmal/errors.hpp"
#include "xmal/gradcheck.hpp"
#include "xmal/matrix.hpp"
#include "xmal/parallel.hpp"
#include "xmal/rng.hpp"
#include "xmal/trainer.hpp"

namespace xmal {
namespace {

using ad::Binder;
using ad::ParameterStore;
using ad::Var;

TEST(Matrix, MatmulMatchesLoops) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(6), k = 1 + rng.below(6), m = 1 + rng.below(6);
    const Matrix a = rng.gaussian_matrix(n, k);
    const Matrix b = rng.gaussian_matrix(k, m);
    const Matrix c = matmul(a, b);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        long double acc = 0;
        for (std::size_t t = 0; t < k; ++t) acc += static_cast<long double>(a(i, t)) * b(t, j);
        EXPECT_NEAR(c(i, j), static_cast<double>(acc), 1e-12);
      }
  }
}

TEST(Matrix, MatmulShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
}

TEST(Matrix, FromRowsAndTranspose) {
  const Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  ASSERT_EQ(a.rows(), 2u);
  ASSERT_EQ(a.cols(), 3u);
  const Matrix t = transpose(a);
  EXPECT_EQ(t(2, 1), 6.0);
  EXPECT_EQ(transpose(t), a);
  EXPECT_THROW(Matrix::from_rows({{1, 2}, {3}}), DimensionError);
}

TEST(Matrix, ItemRequiresScalar) {
  EXPECT_EQ(Matrix::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Matrix(1, 2).item(), ContractError);
}

TEST(Matrix, SoftmaxIsStableForLargeInputs) {
  const Matrix p = row_softmax(Matrix::from_rows({{1000.0, 1000.0, -1000.0}}), 1.0);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.5, 1e-15);
  EXPECT_EQ(p(0, 2), 0.0);
  const Matrix lp = row_log_softmax(Matrix::from_rows({{1000.0, 1000.0}}));
  EXPECT_NEAR(lp(0, 0), -std::log(2.0), 1e-12);
}

TEST(Matrix, SoftmaxRowsSumToOneProperty) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = rng.gaussian_matrix(1 + rng.below(8), 1 + rng.below(8), 5.0);
    const Matrix p = row_softmax(x, rng.uniform(0.1, 20.0));
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double s = 0.0;
      for (double v : p.row(i)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Matrix, NormalizeRowsGuardsZeroRows) {
  const Matrix n = normalize_rows(Matrix::from_rows({{3, 4}, {0, 0}}));
  EXPECT_NEAR(n(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(n(0, 1), 0.8, 1e-15);
  EXPECT_EQ(n(1, 0), 0.0);
  EXPECT_TRUE(n.all_finite());
}

TEST(Matrix, CosineMatchesOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = rng.gaussian_matrix(1, 7);
    const Matrix b = rng.gaussian_matrix(1, 7);
    EXPECT_NEAR(cosine(a.data(), b.data()),
                static_cast<double>(oracle::cosine(oracle::grid(a)[0], oracle::grid(b)[0])), 1e-14);
  }
}

TEST(Rng, DeterministicAndTagged) {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(derive_seed(1, "data"), derive_seed(1, "init"));
  EXPECT_EQ(derive_seed(1, "data"), derive_seed(1, "data"));
  EXPECT_NE(derive_seed(1, "data"), derive_seed(2, "data"));
}

TEST(Rng, PermutationIsPermutation) {
  Rng rng(5);
  for (std::size_t n : {0u, 1u, 2u, 17u}) {
    std::vector<std::size_t> p = rng.permutation(n);
    std::sort(p.begin(), p.end());
    std::vector<std::size_t> id(n);
    std::iota(id.begin(), id.end(), 0);
    EXPECT_EQ(p, id);
  }
}

TEST(Rng, UniformAndBelowInRange) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.below(7), 7u);
  }
}

TEST(Autodiff, SquareSumGradient) {
  ParameterStore p{{"x", Matrix::from_rows({{1, -2}, {3, 0.5}})}};
  const ad::GradResult r = ad::grad([](Binder& b) { return ad::sum(ad::square(b("x"))); }, p);
  EXPECT_DOUBLE_EQ(r.value, 1 + 4 + 9 + 0.25);
  const Matrix& g = r.gradients.at("x");
  EXPECT_DOUBLE_EQ(g(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(g(0, 1), -4.0);
  EXPECT_DOUBLE_EQ(g(1, 0), 6.0);
  EXPECT_DOUBLE_EQ(g(1, 1), 1.0);
}

TEST(Autodiff, NonScalarRootIsContractError) {
  ParameterStore p{{"x", Matrix(2, 2, 1.0)}};
  EXPECT_THROW(ad::grad([](Binder& b) { return b("x"); }, p), ContractError);
}

TEST(Autodiff, UnusedParameterGetsZeros) {
  ParameterStore p{{"x", Matrix(1, 2, 1.0)}, {"unused", Matrix(3, 1, 7.0)}};
  const ad::GradResult r = ad::grad([](Binder& b) { return ad::sum(b("x")); }, p);
  EXPECT_EQ(r.gradients.at("unused"), Matrix(3, 1, 0.0));
}

TEST(Autodiff, ReusedVariableAccumulates) {
  ParameterStore p{{"x", Matrix::scalar(3.0)}};
  const ad::GradResult r = ad::grad(
      [](Binder& b) {
        Var x = b("x");
        return ad::add(ad::mul(x, x), x);
      },
      p);
  EXPECT_DOUBLE_EQ(r.gradients.at("x").item(), 7.0);
}

TEST(Autodiff, MatmulGradientMatchesClosedForm) {
  Rng rng(8);
  const Matrix a = rng.gaussian_matrix(3, 4);
  const Matrix b = rng.gaussian_matrix(4, 2);
  const Matrix w = rng.gaussian_matrix(3, 2);
  ParameterStore p{{"a", a}, {"b", b}};
  const ad::GradResult r = ad::grad(
      [&](Binder& bd) { return ad::sum(ad::mul(ad::matmul(bd("a"), bd("b")), bd.tape().constant(w))); }, p);
  EXPECT_LT(max_abs_diff(r.gradients.at("a"), matmul(w, transpose(b))), 1e-12);
  EXPECT_LT(max_abs_diff(r.gradients.at("b"), matmul(transpose(a), w)), 1e-12);
}

TEST(Autodiff, BranchSignatureTracksHingeSide) {
  auto signature = [](double x) {
    ad::Tape tape;
    ad::hinge(tape.variable(Matrix::scalar(x)));
    return tape.branch_signature();
  };
  EXPECT_EQ(signature(0.5), signature(2.0));
  EXPECT_NE(signature(0.5), signature(-0.5));
}

TEST(Autodiff, RsqrtOrZeroBelowEps) {
  ad::Tape tape;
  const Matrix out = ad::rsqrt_or_zero(tape.constant(Matrix::from_rows({{4.0, 0.0, 1e-20}}))).value();
  EXPECT_DOUBLE_EQ(out(0, 0), 0.5);
  EXPECT_EQ(out(0, 1), 0.0);
  EXPECT_EQ(out(0, 2), 0.0);
}

TEST(GradCheck, GradientErrorIsRelativeAboveThreshold) {
  EXPECT_NEAR(gradient_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_NEAR(gradient_error(1e-10, 3e-10), 2e-10, 1e-20);
}

TEST(GradCheck, SmoothFunctionPasses) {
  Rng rng(9);
  ParameterStore p{{"x", rng.gaussian_matrix(3, 3)}};
  const FdReport r = finite_difference_check(
      [](Binder& b) { return ad::sum(ad::sigmoid(ad::matmul(b("x"), b("x")))); }, p);
  EXPECT_LT(r.max_error, 1e-6);
  EXPECT_EQ(r.entries_checked, 9u);
}

TEST(GradCheck, SamplingCapsEntries) {
  ParameterStore p{{"x", Matrix(10, 10, 0.3)}};
  FdOptions o;
  o.max_entries_per_param = 7;
  const FdReport r = finite_difference_check([](Binder& b) { return ad::sum(ad::square(b("x"))); }, p, o);
  EXPECT_EQ(r.entries_checked, 7u);
}

TEST(GradCheck, WrongGradientIsDetected) {
  ParameterStore p{{"x", Matrix::from_rows({{0.4, -1.2}})}};
  const ad::ScalarFunction f = [](Binder& b) {
    Var x = b("x");
    Var y = b.tape().record("doubled", ad::square(x).value(), {x},
                            [x](ad::Tape& t, const Matrix&, const Matrix& g) {
                              Matrix gx = g;
                              for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 4.0 * t.value(x)[i];
                              t.accumulate(x, std::move(gx));
                            });
    return ad::sum(y);
  };
  EXPECT_GT(finite_difference_check(f, p).max_error, 0.3);
}

TEST(Parallel, CoversEveryIndexOnce) {
  for (std::size_t threads : {1u, 2u, 5u}) {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(BinaryIo, RoundTripAndTruncation) {
  BinaryWriter w;
  w.u32(7);
  w.u64(1ULL << 40);
  w.f64(-0.1);
  w.string("hello");
  w.values(Matrix::from_rows({{1.5, 2.5}}));
  BinaryReader r(w.bytes(), "test");
  EXPECT_EQ(r.u32(), 7u);
  EXPECT_EQ(r.u64(), 1ULL << 40);
  EXPECT_EQ(r.f64(), -0.1);
  EXPECT_EQ(r.string(), "hello");
  EXPECT_EQ(r.matrix(1, 2), Matrix::from_rows({{1.5, 2.5}}));
  EXPECT_TRUE(r.at_end());

  const std::string cut = w.bytes().substr(0, w.bytes().size() - 3);
  BinaryReader t(cut, "test");
  t.u32();
  t.u64();
  t.f64();
  t.string();
  EXPECT_THROW(t.matrix(1, 2), CorruptRecordError);
}

TEST(BinaryIo, MissingFile) {
  EXPECT_THROW(read_file("/nonexistent/xmal/file"), MissingFileError);
}

TEST(Config, TrainKeysRoundTrip) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.optimizer.learning_rate = 0.1 + 0.2;
  cfg.objective.mode = SimilarityMode::dp;
  cfg.model.factors = 4;
  const std::string text = format_key_values(train_config_entries(cfg));
  const TrainConfig back = train_config_from_text(text);
  EXPECT_EQ(back.epochs, 3u);
  EXPECT_EQ(back.optimizer.learning_rate, 0.1 + 0.2);
  EXPECT_EQ(back.objective.mode, SimilarityMode::dp);
  EXPECT_EQ(format_key_values(train_config_entries(back)), text);
}

TEST(Config, UnknownKeyAndBadValueRejected) {
  TrainConfig cfg;
  EXPECT_THROW(set_train_key(cfg, "learning_rat", "1"), ConfigError);
  EXPECT_THROW(set_train_key(cfg, "epochs", "ten"), ConfigError);
  EXPECT_THROW(set_train_key(cfg, "lr", "1e-3x"), ConfigError);
  EXPECT_THROW(parse_key_values("no equals sign"), ConfigError);
}

TEST(Config, HashDependsOnContent) {
  TrainConfig a;
  TrainConfig b;
  EXPECT_EQ(config_hash(train_config_entries(a)), config_hash(train_config_entries(b)));
  b.seed = 8;
  EXPECT_NE(config_hash(train_config_entries(a)), config_hash(train_config_entries(b)));
  EXPECT_EQ(hash_hex(0xabcULL).size(), 16u);
}

}  // namespace
}  // namespace xmal
