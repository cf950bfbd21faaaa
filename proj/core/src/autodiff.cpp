// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "xmal/errors.hpp"

namespace xmal::ad {

const Matrix& Var::value() const { return tape_->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) { return push(Node{"constant", std::move(value), {}, {}, false}); }

Var Tape::variable(Matrix value) { return push(Node{"variable", std::move(value), {}, {}, true}); }

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> inputs,
                 Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw ContractError(std::string(op) + ": operand from another tape");
    needs = needs || nodes_[v.id_].requires_grad;
  }
  if (!needs) backward = nullptr;
  return push(Node{op, std::move(value), {}, std::move(backward), needs});
}

Var Tape::record(const char* op, Matrix value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape_ != this) throw ContractError(std::string(op) + ": operand from another tape");
    needs = needs || nodes_[v.id_].requires_grad;
  }
  if (!needs) backward = nullptr;
  return push(Node{op, std::move(value), {}, std::move(backward), needs});
}

void Tape::backward(Var root) {
  if (root.tape_ != this) throw ContractError("backward: root belongs to another tape");
  const Matrix& rv = nodes_[root.id_].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ContractError("backward requires a scalar (1x1) output, got " + shape_string(rv));
  }
  for (Node& n : nodes_) n.grad = Matrix();
  last_visits_ = 0;
  if (!nodes_[root.id_].requires_grad) return;
  nodes_[root.id_].grad = Matrix::scalar(1.0);
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.value, n.grad);
    ++last_visits_;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::accumulate(Var v, Matrix&& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = std::move(g);
  } else {
    n.grad += g;
  }
}

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + " shape mismatch: " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

Matrix map(const Matrix& m, auto fn) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = fn(m[i]);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Matrix out = xmal::matmul(a.value(), b.value());
  return a.tape().record("matmul", std::move(out), {a, b},
                         [a, b](Tape& t, const Matrix&, const Matrix& g) {
                           if (t.requires_grad(a)) t.accumulate(a, xmal::matmul(g, xmal::transpose(b.value())));
                           if (t.requires_grad(b)) t.accumulate(b, xmal::matmul(xmal::transpose(a.value()), g));
                         });
}

Var transpose(Var m) {
  return m.tape().record("transpose", xmal::transpose(m.value()), {m},
                         [m](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(m, xmal::transpose(g));
                         });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  out += b.value();
  return a.tape().record("add", std::move(out), {a, b},
                         [a, b](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, g);
                         });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record("sub", std::move(out), {a, b},
                         [a, b](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, map(g, [](double x) { return -x; }));
                         });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b},
                         [a, b](Tape& t, const Matrix&, const Matrix& g) {
                           if (t.requires_grad(a)) {
                             Matrix ga = g;
                             for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= b.value()[i];
                             t.accumulate(a, std::move(ga));
                           }
                           if (t.requires_grad(b)) {
                             Matrix gb = g;
                             for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= a.value()[i];
                             t.accumulate(b, std::move(gb));
                           }
                         });
}

Var scale(Var m, double factor) {
  return m.tape().record("scale", map(m.value(), [factor](double x) { return factor * x; }), {m},
                         [m, factor](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(m, map(g, [factor](double x) { return factor * x; }));
                         });
}

Var add_scalar(Var m, double offset) {
  return m.tape().record("add_scalar", map(m.value(), [offset](double x) { return x + offset; }),
                         {m}, [m](Tape& t, const Matrix&, const Matrix& g) { t.accumulate(m, g); });
}

Var square(Var m) {
  return m.tape().record("square", map(m.value(), [](double x) { return x * x; }), {m},
                         [m](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix gm = g;
                           for (std::size_t i = 0; i < gm.size(); ++i) gm[i] *= 2.0 * m.value()[i];
                           t.accumulate(m, std::move(gm));
                         });
}

Var hinge(Var m) {
  for (double x : m.value().data()) m.tape().note_branch(x > 0.0);
  return m.tape().record("hinge", xmal::hinge(m.value()), {m},
                         [m](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix gm = g;
                           // Subgradient at exactly 0 is 0.
                           for (std::size_t i = 0; i < gm.size(); ++i)
                             if (!(m.value()[i] > 0.0)) gm[i] = 0.0;
                           t.accumulate(m, std::move(gm));
                         });
}

Var sigmoid(Var m) {
  Matrix out = map(m.value(), [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return m.tape().record("sigmoid", std::move(out), {m},
                         [m](Tape& t, const Matrix& y, const Matrix& g) {
                           Matrix gm = g;
                           for (std::size_t i = 0; i < gm.size(); ++i) gm[i] *= y[i] * (1.0 - y[i]);
                           t.accumulate(m, std::move(gm));
                         });
}

Var row_softmax(Var m, double scale_factor) {
  return m.tape().record(
      "row_softmax", xmal::row_softmax(m.value(), scale_factor), {m},
      [m, scale_factor](Tape& t, const Matrix& y, const Matrix& g) {
        Matrix gm(y.rows(), y.cols());
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double inner = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) inner += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j)
            gm(i, j) = scale_factor * y(i, j) * (g(i, j) - inner);
        }
        t.accumulate(m, std::move(gm));
      });
}

Var row_log_softmax(Var m) {
  return m.tape().record("row_log_softmax", xmal::row_log_softmax(m.value()), {m},
                         [m](Tape& t, const Matrix& y, const Matrix& g) {
                           Matrix gm(y.rows(), y.cols());
                           for (std::size_t i = 0; i < y.rows(); ++i) {
                             double total = 0.0;
                             for (std::size_t j = 0; j < y.cols(); ++j) total += g(i, j);
                             for (std::size_t j = 0; j < y.cols(); ++j)
                               gm(i, j) = g(i, j) - std::exp(y(i, j)) * total;
                           }
                           t.accumulate(m, std::move(gm));
                         });
}

namespace {

// Backward of v -> v / max(||v||, eps) for one strided vector.
void normalize_backward(const double* v, const double* g, double* out, std::size_t n,
                        std::size_t stride, double eps) {
  double sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) sq += v[k * stride] * v[k * stride];
  const double norm = std::sqrt(sq);
  if (norm > eps) {
    double ug = 0.0;
    for (std::size_t k = 0; k < n; ++k) ug += v[k * stride] * g[k * stride];
    ug /= norm;
    for (std::size_t k = 0; k < n; ++k)
      out[k * stride] = (g[k * stride] - (v[k * stride] / norm) * ug) / norm;
  } else {
    for (std::size_t k = 0; k < n; ++k) out[k * stride] = g[k * stride] / eps;
  }
}

}  // namespace

namespace {

void note_norm_branches(Tape& tape, const Matrix& v, bool by_row, double eps) {
  const std::size_t outer = by_row ? v.rows() : v.cols();
  const std::size_t inner = by_row ? v.cols() : v.rows();
  for (std::size_t o = 0; o < outer; ++o) {
    double sq = 0.0;
    for (std::size_t k = 0; k < inner; ++k) {
      const double x = by_row ? v(o, k) : v(k, o);
      sq += x * x;
    }
    tape.note_branch(std::sqrt(sq) > eps);
  }
}

}  // namespace

Var normalize_rows(Var m, double eps) {
  note_norm_branches(m.tape(), m.value(), true, eps);
  return m.tape().record("normalize_rows", xmal::normalize_rows(m.value(), eps), {m},
                         [m, eps](Tape& t, const Matrix&, const Matrix& g) {
                           const Matrix& v = m.value();
                           Matrix gm(v.rows(), v.cols());
                           for (std::size_t i = 0; i < v.rows(); ++i)
                             normalize_backward(&v.data()[i * v.cols()], &g.data()[i * v.cols()],
                                                &gm.data()[i * v.cols()], v.cols(), 1, eps);
                           t.accumulate(m, std::move(gm));
                         });
}

Var normalize_columns(Var m, double eps) {
  note_norm_branches(m.tape(), m.value(), false, eps);
  return m.tape().record("normalize_columns", xmal::normalize_columns(m.value(), eps), {m},
                         [m, eps](Tape& t, const Matrix&, const Matrix& g) {
                           const Matrix& v = m.value();
                           Matrix gm(v.rows(), v.cols());
                           for (std::size_t j = 0; j < v.cols(); ++j)
                             normalize_backward(&v.data()[j], &g.data()[j], &gm.data()[j],
                                                v.rows(), v.cols(), eps);
                           t.accumulate(m, std::move(gm));
                         });
}

Var rsqrt_or_zero(Var m, double eps) {
  for (double x : m.value().data()) m.tape().note_branch(x > eps);
  Matrix out = map(m.value(), [eps](double x) { return x > eps ? 1.0 / std::sqrt(x) : 0.0; });
  return m.tape().record("rsqrt_or_zero", std::move(out), {m},
                         [m](Tape& t, const Matrix& y, const Matrix& g) {
                           Matrix gm = g;
                           for (std::size_t i = 0; i < gm.size(); ++i)
                             gm[i] *= -0.5 * y[i] * y[i] * y[i];
                           t.accumulate(m, std::move(gm));
                         });
}

Var sum(Var m) {
  double total = 0.0;
  for (double v : m.value().data()) total += v;
  return m.tape().record("sum", Matrix::scalar(total), {m},
                         [m](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(m, Matrix(m.rows(), m.cols(), g[0]));
                         });
}

Var col_mean(Var m) {
  const Matrix& v = m.value();
  if (v.rows() == 0) throw ContractError("col_mean of an empty matrix");
  Matrix out(1, v.cols());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < v.cols(); ++j) out(0, j) += v(i, j);
  const double inv = 1.0 / static_cast<double>(v.rows());
  for (double& x : out.data()) x *= inv;
  return m.tape().record("col_mean", std::move(out), {m},
                         [m, inv](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix gm(m.rows(), m.cols());
                           for (std::size_t i = 0; i < gm.rows(); ++i)
                             for (std::size_t j = 0; j < gm.cols(); ++j) gm(i, j) = g(0, j) * inv;
                           t.accumulate(m, std::move(gm));
                         });
}

Var broadcast_rows(Var row, std::size_t rows) {
  const Matrix& v = row.value();
  if (v.rows() != 1) throw DimensionError("broadcast_rows expects 1xC, got " + shape_string(v));
  Matrix out(rows, v.cols());
  for (std::size_t i = 0; i < rows; ++i) std::copy(v.data().begin(), v.data().end(), out.row(i).begin());
  return row.tape().record("broadcast_rows", std::move(out), {row},
                           [row](Tape& t, const Matrix&, const Matrix& g) {
                             Matrix gr(1, g.cols());
                             for (std::size_t i = 0; i < g.rows(); ++i)
                               for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
                             t.accumulate(row, std::move(gr));
                           });
}

Var diag(Var square_m) {
  const Matrix& v = square_m.value();
  if (v.rows() != v.cols()) throw DimensionError("diag expects a square matrix, got " + shape_string(v));
  Matrix out(v.rows(), 1);
  for (std::size_t i = 0; i < v.rows(); ++i) out(i, 0) = v(i, i);
  return square_m.tape().record("diag", std::move(out), {square_m},
                                [square_m](Tape& t, const Matrix&, const Matrix& g) {
                                  Matrix gm(square_m.rows(), square_m.cols());
                                  for (std::size_t i = 0; i < gm.rows(); ++i) gm(i, i) = g(i, 0);
                                  t.accumulate(square_m, std::move(gm));
                                });
}

Var reshape(Var m, std::size_t rows, std::size_t cols) {
  const Matrix& v = m.value();
  if (rows * cols != v.size()) {
    throw DimensionError("cannot reshape " + shape_string(v) + " to " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  Matrix out(rows, cols, std::vector<double>(v.data().begin(), v.data().end()));
  return m.tape().record("reshape", std::move(out), {m},
                         [m](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(m, Matrix(m.rows(), m.cols(),
                                                  std::vector<double>(g.data().begin(), g.data().end())));
                         });
}

Var concat_cols(Var left, Var right) {
  require_same_tape(left, right, "concat_cols");
  const Matrix& a = left.value();
  const Matrix& b = right.value();
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols row mismatch: " + shape_string(a) + " vs " + shape_string(b));
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), out.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  const std::size_t split = a.cols();
  return left.tape().record("concat_cols", std::move(out), {left, right},
                            [left, right, split](Tape& t, const Matrix&, const Matrix& g) {
                              Matrix ga(g.rows(), split);
                              Matrix gb(g.rows(), g.cols() - split);
                              for (std::size_t i = 0; i < g.rows(); ++i) {
                                for (std::size_t j = 0; j < split; ++j) ga(i, j) = g(i, j);
                                for (std::size_t j = split; j < g.cols(); ++j) gb(i, j - split) = g(i, j);
                              }
                              t.accumulate(left, std::move(ga));
                              t.accumulate(right, std::move(gb));
                            });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows of zero parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows column mismatch: " + std::to_string(cols) + " vs " +
                           std::to_string(p.cols()));
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Var& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  return parts.front().tape().record(
      "concat_rows", Matrix(rows, cols, std::move(data)), parts,
      [parts](Tape& t, const Matrix&, const Matrix& g) {
        std::size_t offset = 0;
        for (const Var& p : parts) {
          const std::size_t n = p.value().size();
          if (t.requires_grad(p)) {
            t.accumulate(p, Matrix(p.rows(), p.cols(),
                                   std::vector<double>(g.data().begin() + static_cast<std::ptrdiff_t>(offset),
                                                       g.data().begin() + static_cast<std::ptrdiff_t>(offset + n))));
          }
          offset += n;
        }
      });
}

Var slice_rows(Var m, std::size_t begin, std::size_t count) {
  const Matrix& v = m.value();
  if (begin + count > v.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(v));
  }
  const auto first = v.data().begin() + static_cast<std::ptrdiff_t>(begin * v.cols());
  Matrix out(count, v.cols(),
             std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * v.cols())));
  return m.tape().record("slice_rows", std::move(out), {m},
                         [m, begin](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix gm(m.rows(), m.cols());
                           std::copy(g.data().begin(), g.data().end(),
                                     gm.data().begin() + static_cast<std::ptrdiff_t>(begin * gm.cols()));
                           t.accumulate(m, std::move(gm));
                         });
}

Var slice_cols(Var m, std::size_t begin, std::size_t count) {
  const Matrix& v = m.value();
  if (begin + count > v.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(v));
  }
  Matrix out(v.rows(), count);
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = v(i, begin + j);
  return m.tape().record("slice_cols", std::move(out), {m},
                         [m, begin](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix gm(m.rows(), m.cols());
                           for (std::size_t i = 0; i < g.rows(); ++i)
                             for (std::size_t j = 0; j < g.cols(); ++j) gm(i, begin + j) = g(i, j);
                           t.accumulate(m, std::move(gm));
                         });
}

Var merge_pairs(Var m) {
  const Matrix& v = m.value();
  if (v.rows() == 0) throw ContractError("merge_pairs of an empty matrix");
  const std::size_t out_rows = (v.rows() + 1) / 2;
  Matrix out(out_rows, v.cols());
  for (std::size_t r = 0; r < out_rows; ++r) {
    const std::size_t a = 2 * r;
    const bool pair = a + 1 < v.rows();
    for (std::size_t j = 0; j < v.cols(); ++j)
      out(r, j) = pair ? 0.5 * (v(a, j) + v(a + 1, j)) : v(a, j);
  }
  return m.tape().record("merge_pairs", std::move(out), {m},
                         [m](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix gm(m.rows(), m.cols());
                           for (std::size_t r = 0; r < g.rows(); ++r) {
                             const std::size_t a = 2 * r;
                             const bool pair = a + 1 < gm.rows();
                             for (std::size_t j = 0; j < g.cols(); ++j) {
                               if (pair) {
                                 gm(a, j) = 0.5 * g(r, j);
                                 gm(a + 1, j) = 0.5 * g(r, j);
                               } else {
                                 gm(a, j) = g(r, j);
                               }
                             }
                           }
                           t.accumulate(m, std::move(gm));
                         });
}

Var pairwise_add(Var p, Var q) {
  require_same_tape(p, q, "pairwise_add");
  const Matrix& a = p.value();
  const Matrix& b = q.value();
  if (a.cols() != b.cols()) {
    throw DimensionError("pairwise_add column mismatch: " + shape_string(a) + " vs " + shape_string(b));
  }
  Matrix out(a.rows() * b.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      for (std::size_t c = 0; c < a.cols(); ++c) out(i * b.rows() + j, c) = a(i, c) + b(j, c);
  return p.tape().record("pairwise_add", std::move(out), {p, q},
                         [p, q](Tape& t, const Matrix&, const Matrix& g) {
                           const std::size_t np = p.rows();
                           const std::size_t nq = q.rows();
                           Matrix gp(np, g.cols());
                           Matrix gq(nq, g.cols());
                           for (std::size_t i = 0; i < np; ++i)
                             for (std::size_t j = 0; j < nq; ++j)
                               for (std::size_t c = 0; c < g.cols(); ++c) {
                                 gp(i, c) += g(i * nq + j, c);
                                 gq(j, c) += g(i * nq + j, c);
                               }
                           t.accumulate(p, std::move(gp));
                           t.accumulate(q, std::move(gq));
                         });
}

Var stack_scalars(const std::vector<Var>& scalars, std::size_t rows, std::size_t cols) {
  if (scalars.size() != rows * cols || scalars.empty()) {
    throw DimensionError("stack_scalars: " + std::to_string(scalars.size()) + " scalars for " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < scalars.size(); ++k) out[k] = scalars[k].value().item();
  return scalars.front().tape().record("stack_scalars", std::move(out), scalars,
                                       [scalars](Tape& t, const Matrix&, const Matrix& g) {
                                         for (std::size_t k = 0; k < scalars.size(); ++k)
                                           t.accumulate(scalars[k], Matrix::scalar(g[k]));
                                       });
}

Var add_row(Var m, Var row) { return add(m, broadcast_rows(row, m.rows())); }

Var mul_row(Var m, Var row) { return mul(m, broadcast_rows(row, m.rows())); }

// ---------------------------------------------------------------------------

Var Binder::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  auto it = store_.find(name);
  if (it == store_.end()) throw ContractError("unknown parameter '" + name + "'");
  Var v = trainable_ ? tape_.variable(it->second) : tape_.constant(it->second);
  bound_.emplace(name, v);
  return v;
}

Gradients Binder::gradients() const {
  Gradients out;
  for (const auto& [name, value] : store_) {
    auto it = bound_.find(name);
    out.emplace(name, it == bound_.end() ? Matrix(value.rows(), value.cols()) : tape_.grad(it->second));
  }
  return out;
}

GradResult grad(const ScalarFunction& f, const ParameterStore& params) {
  Tape tape;
  Binder binder(tape, params, true);
  Var out = f(binder);
  if (out.rows() != 1 || out.cols() != 1) {
    throw ContractError("grad requires a scalar-valued computation, got " + shape_string(out.value()));
  }
  tape.backward(out);
  return GradResult{out.value().item(), binder.gradients()};
}

double evaluate(const ScalarFunction& f, const ParameterStore& params) {
  Tape tape;
  Binder binder(tape, params, false);
  Var out = f(binder);
  if (out.rows() != 1 || out.cols() != 1) {
    throw ContractError("evaluate requires a scalar-valued computation, got " + shape_string(out.value()));
  }
  return out.value().item();
}

}  // namespace xmal::ad
