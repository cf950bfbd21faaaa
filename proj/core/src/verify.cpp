// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "xmal/config.hpp"
#include "xmal/data.hpp"
#include "xmal/dcr.hpp"
#include "xmal/errors.hpp"
#include "xmal/evaluation.hpp"
#include "xmal/gradcheck.hpp"
#include "xmal/model.hpp"
#include "xmal/objective.hpp"
#include "xmal/reference.hpp"
#include "xmal/rng.hpp"
#include "xmal/tha.hpp"

namespace xmal {

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> VerifyReport::failures() const {
  std::vector<std::string> out;
  for (const CheckResult& c : checks)
    if (!c.passed) out.push_back(c.suite + "/" + c.name);
  return out;
}

namespace {

using ad::Binder;
using ad::ParameterStore;
using ad::Var;

// ---------------------------------------------------------------------------
// Primitive gradient cases. Inputs are parameters "x0", "x1", ...; shapes are
// drawn per seed with every dimension in [1, 6].

struct PrimitiveCase {
  std::string name;
  std::function<ParameterStore(Rng&)> make;
  std::function<Var(Binder&, const ParameterStore&)> apply;
};

std::size_t dim(Rng& rng, std::size_t lo = 2) { return lo + static_cast<std::size_t>(rng.below(7 - lo)); }

std::string input(std::size_t i) { return "x" + std::to_string(i); }

ParameterStore inputs(Rng& rng, const std::vector<std::pair<std::size_t, std::size_t>>& shapes, double lo = -1.0,
                      double hi = 1.0) {
  ParameterStore store;
  for (std::size_t i = 0; i < shapes.size(); ++i)
    store[input(i)] = rng.uniform_matrix(shapes[i].first, shapes[i].second, lo, hi);
  return store;
}

using Unary = Var (*)(Var);
using Binary = Var (*)(Var, Var);

PrimitiveCase unary(const std::string& name, std::function<Var(Var)> op, double lo = -1.0, double hi = 1.0) {
  return {name, [lo, hi](Rng& r) { return inputs(r, {{dim(r), dim(r)}}, lo, hi); },
          [op](Binder& b, const ParameterStore&) { return op(b("x0")); }};
}

PrimitiveCase binary_same(const std::string& name, Binary op) {
  return {name,
          [](Rng& r) {
            const std::size_t rows = dim(r);
            const std::size_t cols = dim(r);
            return inputs(r, {{rows, cols}, {rows, cols}});
          },
          [op](Binder& b, const ParameterStore&) { return op(b("x0"), b("x1")); }};
}

std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  cases.push_back({"matmul",
                   [](Rng& r) {
                     const std::size_t m = dim(r);
                     const std::size_t k = dim(r);
                     return inputs(r, {{m, k}, {k, dim(r)}});
                   },
                   [](Binder& b, const ParameterStore&) { return ad::matmul(b("x0"), b("x1")); }});
  cases.push_back(unary("transpose", [](Var x) { return ad::transpose(x); }));
  cases.push_back(binary_same("add", ad::add));
  cases.push_back(binary_same("sub", ad::sub));
  cases.push_back(binary_same("mul", ad::mul));
  cases.push_back(unary("scale", [](Var x) { return ad::scale(x, -1.7); }));
  cases.push_back(unary("add_scalar", [](Var x) { return ad::add_scalar(x, 0.3); }));
  cases.push_back(unary("square", [](Var x) { return ad::square(x); }));
  cases.push_back(unary("hinge", [](Var x) { return ad::hinge(x); }));
  cases.push_back(unary("sigmoid", [](Var x) { return ad::sigmoid(x); }, -3.0, 3.0));
  cases.push_back(unary("row_softmax", [](Var x) { return ad::row_softmax(x, 1.3); }, -2.0, 2.0));
  cases.push_back(unary("row_log_softmax", [](Var x) { return ad::row_log_softmax(x); }, -2.0, 2.0));
  cases.push_back(unary("normalize_rows", [](Var x) { return ad::normalize_rows(x); }));
  cases.push_back(unary("normalize_columns", [](Var x) { return ad::normalize_columns(x); }));
  cases.push_back(unary("rsqrt_or_zero", [](Var x) { return ad::rsqrt_or_zero(x); }, 0.5, 2.0));
  cases.push_back(unary("sum", [](Var x) { return ad::sum(x); }));
  cases.push_back(unary("col_mean", [](Var x) { return ad::col_mean(x); }));
  cases.push_back({"broadcast_rows", [](Rng& r) { return inputs(r, {{1, dim(r)}}); },
                   [](Binder& b, const ParameterStore& s) {
                     return ad::broadcast_rows(b("x0"), 1 + s.at("x0").cols() % 4);
                   }});
  cases.push_back({"diag",
                   [](Rng& r) {
                     const std::size_t n = dim(r);
                     return inputs(r, {{n, n}});
                   },
                   [](Binder& b, const ParameterStore&) { return ad::diag(b("x0")); }});
  cases.push_back({"reshape", [](Rng& r) { return inputs(r, {{dim(r), dim(r)}}); },
                   [](Binder& b, const ParameterStore& s) {
                     const Matrix& x = s.at("x0");
                     return ad::reshape(b("x0"), x.cols(), x.rows());
                   }});
  cases.push_back({"concat_cols",
                   [](Rng& r) {
                     const std::size_t rows = dim(r);
                     return inputs(r, {{rows, dim(r)}, {rows, dim(r)}});
                   },
                   [](Binder& b, const ParameterStore&) { return ad::concat_cols(b("x0"), b("x1")); }});
  cases.push_back({"concat_rows",
                   [](Rng& r) {
                     const std::size_t cols = dim(r);
                     return inputs(r, {{dim(r), cols}, {dim(r), cols}, {dim(r), cols}});
                   },
                   [](Binder& b, const ParameterStore&) {
                     return ad::concat_rows({b("x0"), b("x1"), b("x2")});
                   }});
  cases.push_back({"slice_rows", [](Rng& r) { return inputs(r, {{dim(r), dim(r)}}); },
                   [](Binder& b, const ParameterStore& s) {
                     const std::size_t rows = s.at("x0").rows();
                     return ad::slice_rows(b("x0"), rows / 3, rows - rows / 3);
                   }});
  cases.push_back({"slice_cols", [](Rng& r) { return inputs(r, {{dim(r), dim(r)}}); },
                   [](Binder& b, const ParameterStore& s) {
                     const std::size_t cols = s.at("x0").cols();
                     return ad::slice_cols(b("x0"), cols / 3, cols - cols / 3);
                   }});
  cases.push_back(unary("merge_pairs", [](Var x) { return ad::merge_pairs(x); }));
  cases.push_back({"pairwise_add",
                   [](Rng& r) {
                     const std::size_t cols = dim(r);
                     return inputs(r, {{dim(r), cols}, {dim(r), cols}});
                   },
                   [](Binder& b, const ParameterStore&) { return ad::pairwise_add(b("x0"), b("x1")); }});
  cases.push_back({"stack_scalars",
                   [](Rng& r) {
                     const std::size_t rows = 1 + static_cast<std::size_t>(r.below(3));
                     const std::size_t cols = 1 + static_cast<std::size_t>(r.below(3));
                     std::vector<std::pair<std::size_t, std::size_t>> shapes(rows * cols, {1, 1});
                     ParameterStore s = inputs(r, shapes);
                     s["shape"] = Matrix::from_rows({{static_cast<double>(rows), static_cast<double>(cols)}});
                     return s;
                   },
                   [](Binder& b, const ParameterStore& s) {
                     const Matrix& shape = s.at("shape");
                     const auto rows = static_cast<std::size_t>(shape(0, 0));
                     const auto cols = static_cast<std::size_t>(shape(0, 1));
                     std::vector<Var> scalars;
                     for (std::size_t i = 0; i < rows * cols; ++i) scalars.push_back(b(input(i)));
                     return ad::stack_scalars(scalars, rows, cols);
                   }});
  cases.push_back({"add_row",
                   [](Rng& r) {
                     const std::size_t cols = dim(r);
                     return inputs(r, {{dim(r), cols}, {1, cols}});
                   },
                   [](Binder& b, const ParameterStore&) { return ad::add_row(b("x0"), b("x1")); }});
  cases.push_back({"mul_row",
                   [](Rng& r) {
                     const std::size_t cols = dim(r);
                     return inputs(r, {{dim(r), cols}, {1, cols}});
                   },
                   [](Binder& b, const ParameterStore&) { return ad::mul_row(b("x0"), b("x1")); }});
  return cases;
}

// Identity forward, gradient scaled by 1.1 on the way back.
Var wrong_gradient(Var x) {
  return x.tape().record("injected_bug", x.value(), {x}, [x](ad::Tape& t, const Matrix&, const Matrix& g) {
    Matrix scaled = g;
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 1.1;
    t.accumulate(x, std::move(scaled));
  });
}

void add_check(VerifyReport& report, const std::string& suite, const std::string& name, double worst,
               double tolerance, std::string detail = {}) {
  report.checks.push_back({suite, name, worst, tolerance, worst < tolerance, std::move(detail)});
}

// Shared fixture of the full-loss check: B = 4, D = 16, K = 4, M = 8, N = 5.
struct LossFixture {
  Dataset data;
  ModelConfig model;
  ObjectiveConfig objective;
  Model params;
};

LossFixture loss_fixture(std::uint64_t seed) {
  LossFixture f;
  SynthConfig sc;
  sc.pairs = 4;
  sc.factors = 4;
  sc.dim = 16;
  sc.text_tokens = 5;
  sc.audio_tokens = 8;
  sc.concept_count = 16;
  sc.seed = derive_seed(seed, "verify.data");
  f.data = generate(sc);
  f.model.dim = 16;
  f.model.factors = 4;
  f.params = Model::initialize(f.model, derive_seed(seed, "verify.init"));
  return f;
}

}  // namespace

std::vector<std::string> primitive_names() {
  std::vector<std::string> out;
  for (const PrimitiveCase& c : primitive_cases()) out.push_back(c.name);
  return out;
}

VerifyReport run_gradient_suite(const VerifyOptions& options) {
  const std::vector<std::string> names = primitive_names();
  if (!options.inject_bug.empty() && std::find(names.begin(), names.end(), options.inject_bug) == names.end()) {
    throw ConfigError("inject_bug: unknown primitive '" + options.inject_bug + "'");
  }
  VerifyReport report;
  FdOptions fd;
  fd.h = options.h;
  for (const PrimitiveCase& c : primitive_cases()) {
    const bool buggy = c.name == options.inject_bug;
    double worst = 0.0;
    std::string detail;
    for (std::size_t seed = 0; seed < options.seeds; ++seed) {
      Rng rng(derive_seed(options.seed + seed, "verify.primitive." + c.name));
      const ParameterStore store = c.make(rng);
      ParameterStore trainable = store;
      trainable.erase("shape");
      Matrix out_shape;
      {
        ad::Tape tape;
        Binder b(tape, store, false);
        out_shape = c.apply(b, store).value();
      }
      const Matrix weights = rng.uniform_matrix(out_shape.rows(), out_shape.cols(), -1.0, 1.0);
      const ad::ScalarFunction f = [&](Binder& b) {
        Var out = c.apply(b, store);
        if (buggy) out = wrong_gradient(out);
        return ad::sum(ad::mul(out, b.tape().constant(weights)));
      };
      const FdReport r = finite_difference_check(f, trainable, fd);
      if (r.max_error >= worst) {
        worst = r.max_error;
        detail = "seed " + std::to_string(options.seed + seed) + " " + r.worst_param + "[" + std::to_string(r.worst_index) + "]";
      }
    }
    add_check(report, "gradient", "primitive." + c.name, worst, options.primitive_tolerance, detail);
  }

  // Full objective against the extended-precision reference.
  const char* outputs[4] = {"L_S", "L_D", "L_A", "L"};
  std::vector<double> worst(4, 0.0);
  std::vector<std::string> detail(4);
  std::size_t checked = 0;
  std::size_t one_sided = 0;
  std::size_t skipped = 0;
  for (std::size_t seed = 0; seed < options.seeds; ++seed) {
    LossFixture fx = loss_fixture(options.seed + seed);
    std::vector<const PairItem*> batch;
    for (const PairItem& item : fx.data.items) batch.push_back(&item);
    const VectorFunction f = [&](Binder& b) {
      const BatchForward fwd = forward_batch(b, fx.model, fx.objective, batch);
      return std::vector<Var>{fwd.l_s, fwd.l_d, fwd.l_a, fwd.total};
    };
    const std::vector<ad::Gradients> analytic = analytic_gradients(f, fx.params.params);
    ReferenceModel<long double> ref(fx.params.params, fx.model, fx.objective);
    FdOptions fd_loss;
    fd_loss.h = options.h;
    fd_loss.max_entries_per_param = options.full_loss_entries;
    fd_loss.sample_seed = derive_seed(options.seed + seed, "verify.sample");
    const std::vector<FdReport> reports =
        finite_difference_check_probe(fx.params.params, analytic, reference_prober(ref, fx.data.items), fd_loss);
    for (std::size_t i = 0; i < 4; ++i) {
      if (reports[i].max_error >= worst[i]) {
        worst[i] = reports[i].max_error;
        detail[i] = "seed " + std::to_string(options.seed + seed) + " " + reports[i].worst_param + "[" +
                    std::to_string(reports[i].worst_index) + "]";
      }
    }
    checked += reports[3].entries_checked;
    one_sided += reports[3].entries_one_sided;
    skipped += reports[3].entries_skipped;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    add_check(report, "gradient", std::string("loss.") + outputs[i], worst[i], options.tolerance,
              detail[i] + "; entries " + std::to_string(checked) + ", one-sided " + std::to_string(one_sided) +
                  ", skipped " + std::to_string(skipped));
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

double direct_nt_xent(const Matrix& s, double tau) {
  const std::size_t b = s.rows();
  double acc = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double row = 0.0;
    double col = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      row += std::exp(s(i, j) / tau);
      col += std::exp(s(j, i) / tau);
    }
    acc += std::log(std::exp(s(i, i) / tau) / row) + std::log(std::exp(s(i, i) / tau) / col);
  }
  return -acc / static_cast<double>(b);
}

Matrix loop_hinge_normalize(const Matrix& s, double eps) {
  Matrix out(s.rows(), s.cols());
  for (std::size_t n = 0; n < s.cols(); ++n) {
    double sq = 0.0;
    for (std::size_t m = 0; m < s.rows(); ++m) sq += std::max(s(m, n), 0.0) * std::max(s(m, n), 0.0);
    const double d = std::max(std::sqrt(sq), eps);
    for (std::size_t m = 0; m < s.rows(); ++m) out(m, n) = std::max(s(m, n), 0.0) / d;
  }
  return out;
}

Matrix loop_attend(const Matrix& q, const Matrix& c, const AttentionConfig& cfg) {
  Matrix s(q.rows(), c.rows());
  for (std::size_t m = 0; m < q.rows(); ++m)
    for (std::size_t n = 0; n < c.rows(); ++n) s(m, n) = cosine(q.row(m), c.row(n), cfg.eps);
  const Matrix sbar = loop_hinge_normalize(s, cfg.eps);
  Matrix out(q.rows(), c.cols());
  for (std::size_t m = 0; m < q.rows(); ++m) {
    double z = 0.0;
    for (std::size_t n = 0; n < c.rows(); ++n) z += std::exp(cfg.lambda * sbar(m, n));
    for (std::size_t n = 0; n < c.rows(); ++n)
      for (std::size_t d = 0; d < c.cols(); ++d) out(m, d) += std::exp(cfg.lambda * sbar(m, n)) / z * c(n, d);
  }
  return out;
}

Matrix tape_covariance(const std::vector<Matrix>& zt, const std::vector<Matrix>& za) {
  ad::Tape tape;
  std::vector<Var> t;
  std::vector<Var> a;
  for (const Matrix& m : zt) t.push_back(tape.constant(m));
  for (const Matrix& m : za) a.push_back(tape.constant(m));
  return factor_covariance(t, a).value();
}

std::vector<Matrix> tape_standardize(const std::vector<Matrix>& factors) {
  ad::Tape tape;
  std::vector<Var> in;
  for (const Matrix& m : factors) in.push_back(tape.constant(m));
  std::vector<Matrix> out;
  for (const Var& v : batch_standardize(in)) out.push_back(v.value());
  return out;
}

}  // namespace

VerifyReport run_oracle_suite(const VerifyOptions& options) {
  VerifyReport report;
  const std::size_t n = options.property_instances;
  Rng rng(derive_seed(options.seed, "verify.oracle"));

  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = 1 + static_cast<std::size_t>(rng.below(4));
    const Matrix s = rng.uniform_matrix(b, b, -1.0, 1.0);
    worst = std::max(worst, std::abs(nt_xent(s, 0.07) - direct_nt_xent(s, 0.07)));
  }
  add_check(report, "oracle", "nt_xent.direct", worst, 1e-10);
  const double identity = nt_xent(Matrix::identity(2), 1.0);
  add_check(report, "oracle", "nt_xent.identity_b2", std::abs(identity - 2.0 * std::log1p(std::exp(-1.0))), 1e-10,
            "value " + format_double(identity));

  worst = 0.0;
  double worst_attend = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = 1 + static_cast<std::size_t>(rng.below(6));
    const std::size_t k = 1 + static_cast<std::size_t>(rng.below(6));
    const std::size_t d = 1 + static_cast<std::size_t>(rng.below(8));
    const Matrix s = rng.uniform_matrix(m, k, -1.0, 1.0);
    ad::Tape tape;
    worst = std::max(worst, max_abs_diff(hinge_normalize(tape.constant(s)).value(), loop_hinge_normalize(s, 1e-12)));
    AttentionConfig cfg;
    cfg.lambda = rng.uniform(0.5, 12.0);
    const Matrix q = rng.gaussian_matrix(m, d);
    const Matrix c = rng.gaussian_matrix(k, d);
    worst_attend = std::max(worst_attend, max_abs_diff(attend(q, c, cfg), loop_attend(q, c, cfg)));
  }
  add_check(report, "oracle", "hinge_normalize.loops", worst, 1e-10);
  add_check(report, "oracle", "attend.loops", worst_attend, 1e-10);

  worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = 1 + static_cast<std::size_t>(rng.below(6));
    const std::size_t b = 2 + static_cast<std::size_t>(rng.below(5));
    const std::size_t w = 1 + static_cast<std::size_t>(rng.below(4));
    std::vector<Matrix> zt;
    std::vector<Matrix> za;
    for (std::size_t f = 0; f < k; ++f) {
      zt.push_back(rng.gaussian_matrix(b, w));
      za.push_back(rng.gaussian_matrix(b, w));
    }
    const Matrix c = tape_covariance(zt, za);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < k; ++q) {
        double acc = 0.0;
        for (std::size_t r = 0; r < b; ++r)
          for (std::size_t d = 0; d < w; ++d) acc += zt[p](r, d) * za[q](r, d);
        worst = std::max(worst, std::abs(c(p, q) - acc / static_cast<double>(b * w)));
      }
  }
  add_check(report, "oracle", "factor_covariance.direct", worst, 1e-12);
  return report;
}

VerifyReport run_invariant_suite(const VerifyOptions& options) {
  VerifyReport report;
  const std::size_t n = options.property_instances;
  Rng rng(derive_seed(options.seed, "verify.invariant"));

  double softmax = 0.0;
  bool idempotent = true;
  double unit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = 1 + static_cast<std::size_t>(rng.below(6));
    const std::size_t c = 1 + static_cast<std::size_t>(rng.below(6));
    const double magnitude = i % 2 == 0 ? 1.0 : 1e3;
    const Matrix p = row_softmax(rng.uniform_matrix(r, c, -magnitude, magnitude), rng.uniform(0.1, 10.0));
    for (std::size_t row = 0; row < r; ++row) {
      double s = 0.0;
      for (double v : p.row(row)) s += v;
      softmax = std::max(softmax, std::abs(s - 1.0));
    }
    const Matrix m = rng.uniform_matrix(r, c, -1.0, 1.0);
    idempotent = idempotent && hinge(hinge(m)) == hinge(m);
    ad::Tape tape;
    const Matrix h = hinge_normalize(tape.constant(m)).value();
    for (std::size_t col = 0; col < c; ++col) {
      double sq = 0.0;
      bool positive = false;
      for (std::size_t row = 0; row < r; ++row) {
        sq += h(row, col) * h(row, col);
        positive = positive || m(row, col) > 0.0;
      }
      if (positive) unit = std::max(unit, std::abs(std::sqrt(sq) - 1.0));
    }
  }
  add_check(report, "invariant", "row_softmax.rows_sum_to_one", softmax, 1e-12);
  add_check(report, "invariant", "hinge.idempotent", idempotent ? 0.0 : 1.0, 0.5);
  add_check(report, "invariant", "hinge_normalize.unit_columns", unit, 1e-10);

  double diag = 0.0;
  double probability = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = 1 + static_cast<std::size_t>(rng.below(6));
    const std::size_t b = 2 + static_cast<std::size_t>(rng.below(6));
    const std::size_t w = 1 + static_cast<std::size_t>(rng.below(4));
    std::vector<Matrix> factors;
    for (std::size_t f = 0; f < k; ++f) factors.push_back(rng.gaussian_matrix(b, w));
    const std::vector<Matrix> z = tape_standardize(factors);
    const Matrix c = tape_covariance(z, z);
    for (std::size_t f = 0; f < k; ++f) diag = std::max(diag, std::abs(c(f, f) - 1.0));
    const Matrix positive = rng.uniform_matrix(k, k, 0.01, 1.0);
    const MatchProbability mp = match_probability(positive);
    for (std::size_t col = 0; col < k; ++col) {
      double s = 0.0;
      for (std::size_t row = 0; row < k; ++row) s += mp.probability(row, col);
      probability = std::max(probability, std::abs(s - 1.0));
    }
  }
  add_check(report, "invariant", "covariance.unit_diagonal", diag, 1e-10);
  add_check(report, "invariant", "match_probability.columns_sum_to_one", probability, 1e-10);
  const Matrix eye = Matrix::identity(8);
  add_check(report, "invariant", "dcr_losses.zero_at_identity",
            std::abs(decoupling_loss(eye)) + std::abs(alignment_loss(eye)), 1e-300);

  double shift = 0.0;
  bool monotone = true;
  bool transform = true;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = 1 + static_cast<std::size_t>(rng.below(8));
    const Matrix s = rng.uniform_matrix(b, b, -1.0, 1.0);
    Matrix shifted = s;
    const double offset = rng.uniform(-5.0, 5.0);
    for (std::size_t e = 0; e < shifted.size(); ++e) shifted[e] += offset;
    shift = std::max(shift, std::abs(nt_xent(s, 0.07) - nt_xent(shifted, 0.07)));

    Matrix exp_s = s;
    Matrix affine = s;
    const double a = rng.uniform(0.1, 10.0);
    const double c = rng.uniform(-3.0, 3.0);
    for (std::size_t e = 0; e < s.size(); ++e) {
      exp_s[e] = std::exp(s[e]);
      affine[e] = a * s[e] + c;
    }
    for (RetrievalDirection d : {RetrievalDirection::text_to_audio, RetrievalDirection::audio_to_text}) {
      double prev = 0.0;
      for (std::size_t k = 1; k <= b; ++k) {
        const double r = recall_at_k(s, k, d);
        monotone = monotone && r >= prev && r >= 0.0 && r <= 100.0;
        prev = r;
        transform = transform && r == recall_at_k(exp_s, k, d) && r == recall_at_k(affine, k, d);
      }
      monotone = monotone && prev == 100.0;
    }
  }
  add_check(report, "invariant", "nt_xent.shift_invariance", shift, 1e-10);
  add_check(report, "invariant", "recall.monotone_in_k", monotone ? 0.0 : 1.0, 0.5);
  add_check(report, "invariant", "recall.rank_transform_invariance", transform ? 0.0 : 1.0, 0.5);

  double linear = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = 1 + static_cast<std::size_t>(rng.below(6));
    const std::size_t c = 1 + static_cast<std::size_t>(rng.below(6));
    ParameterStore params{{"x", rng.uniform_matrix(r, c, -1.0, 1.0)}, {"w", rng.uniform_matrix(c, c, -1.0, 1.0)}};
    const ad::ScalarFunction g = [](Binder& b) {
      return ad::sum(ad::mul(ad::row_softmax(ad::matmul(b("x"), b("w")), 2.0), ad::normalize_rows(b("x"))));
    };
    const ad::ScalarFunction h = [](Binder& b) {
      return ad::sum(ad::mul_row(ad::sigmoid(b("x")), ad::transpose(ad::slice_cols(b("w"), 0, 1))));
    };
    const ad::ScalarFunction pair = [&](Binder& b) { return ad::add(g(b), h(b)); };
    const ad::GradResult gf = ad::grad(pair, params);
    const ad::GradResult gg = ad::grad(g, params);
    const ad::GradResult gh = ad::grad(h, params);
    for (const auto& [name, m] : gf.gradients) {
      Matrix sum = gg.gradients.at(name);
      sum += gh.gradients.at(name);
      linear = std::max(linear, max_abs_diff(m, sum));
    }
  }
  add_check(report, "invariant", "grad.linearity", linear, 1e-12);
  return report;
}

VerifyReport run_verify(const VerifyOptions& options) {
  VerifyReport report = run_gradient_suite(options);
  for (VerifyReport part : {run_oracle_suite(options), run_invariant_suite(options)})
    report.checks.insert(report.checks.end(), part.checks.begin(), part.checks.end());
  return report;
}

std::string format_verify_report(const VerifyReport& report, const VerifyOptions& options) {
  char head[160];
  std::snprintf(head, sizeof(head), "h=%g tol=%g primitive_tol=%g seeds=%zu\n", options.h, options.tolerance,
                options.primitive_tolerance, options.seeds);
  std::string out = head;
  for (const CheckResult& c : report.checks) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e (tol %.1e)", c.worst, c.tolerance);
    out += std::string(c.passed ? "PASS " : "FAIL ") + c.suite + "/" + c.name + " worst=" + buf;
    if (!c.detail.empty()) out += " (" + c.detail + ")";
    out += "\n";
  }
  const std::vector<std::string> failed = report.failures();
  out += failed.empty() ? "all " + std::to_string(report.checks.size()) + " checks passed\n"
                        : std::to_string(failed.size()) + " of " + std::to_string(report.checks.size()) +
                              " checks failed\n";
  return out;
}

}  // namespace xmal
