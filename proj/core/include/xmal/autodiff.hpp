// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over a Wengert list.
//
// Every primitive appends one node holding its forward value and a closure
// that maps the node's output gradient onto its inputs. Tape::backward walks
// the list once in reverse. Nodes whose inputs are all constants carry no
// closure, so constant subgraphs cost nothing on the way back.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "xmal/matrix.hpp"

namespace xmal::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the node's forward value and the gradient flowing into it.
  using Backward = std::function<void(Tape&, const Matrix& out, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  // Appends a primitive application. `backward` is dropped when no input
  // requires a gradient.
  Var record(const char* op, Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(const char* op, Matrix value, const std::vector<Var>& inputs, Backward backward);

  // Seeds d(root)/d(root) = 1 and propagates. Root must be 1x1.
  void backward(Var root);

  // Gradient of the last backward root w.r.t. v; zeros if v did not
  // contribute.
  Matrix grad(Var v) const;

  // Used inside backward closures.
  void accumulate(Var v, const Matrix& g);
  void accumulate(Var v, Matrix&& g);
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const char* op_name(std::size_t id) const { return nodes_[id].op; }
  // Number of closures executed by the most recent backward().
  std::size_t last_backward_visits() const noexcept { return last_visits_; }

  // Non-smooth primitives (hinge, eps guards) fold each branch decision into
  // a running hash. Two evaluations with equal signatures took the same
  // branches everywhere, so the function is smooth between them.
  void note_branch(bool taken) noexcept {
    branch_signature_ = (branch_signature_ ^ (taken ? 0x9e3779b97f4a7c15ULL : 0x632be59bd9b4e019ULL)) *
                        0x100000001b3ULL;
  }
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }

 private:
  struct Node {
    const char* op;
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::size_t last_visits_ = 0;
  std::uint64_t branch_signature_ = 0xcbf29ce484222325ULL;
};

// ---------------------------------------------------------------------------
// Registered primitives.

Var matmul(Var a, Var b);
Var transpose(Var m);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var m, double factor);
Var add_scalar(Var m, double offset);
Var square(Var m);
Var hinge(Var m);
Var sigmoid(Var m);
Var row_softmax(Var m, double scale);
Var row_log_softmax(Var m);
Var normalize_rows(Var m, double eps = kDefaultEps);
Var normalize_columns(Var m, double eps = kDefaultEps);
// 1/sqrt(x) where x > eps, exactly 0 elsewhere.
Var rsqrt_or_zero(Var m, double eps = kDefaultEps);
Var sum(Var m);
Var col_mean(Var m);
// Repeats a 1xC row `rows` times.
Var broadcast_rows(Var row, std::size_t rows);
Var diag(Var square);
Var reshape(Var m, std::size_t rows, std::size_t cols);
Var concat_cols(Var left, Var right);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var m, std::size_t begin, std::size_t count);
Var slice_cols(Var m, std::size_t begin, std::size_t count);
// Mean of adjacent row pairs; a trailing odd row is kept as is.
Var merge_pairs(Var m);
// Row (i * q.rows() + j) = p[i] + q[j].
Var pairwise_add(Var p, Var q);
// Lays out 1x1 nodes row-major into a rows x cols matrix.
Var stack_scalars(const std::vector<Var>& scalars, std::size_t rows, std::size_t cols);

// Convenience compositions.
Var add_row(Var m, Var row);  // m + broadcast_rows(row)
Var mul_row(Var m, Var row);

// ---------------------------------------------------------------------------
// Named trainable parameters.

using ParameterStore = std::map<std::string, Matrix>;
using Gradients = std::map<std::string, Matrix>;

// Binds parameters onto a tape on first use.
class Binder {
 public:
  Binder(Tape& tape, const ParameterStore& store, bool trainable = true)
      : tape_(tape), store_(store), trainable_(trainable) {}

  Var operator()(const std::string& name);
  Tape& tape() const { return tape_; }
  const ParameterStore& store() const { return store_; }

  // Gradients for every entry of the store; unbound entries get zeros.
  Gradients gradients() const;

 private:
  Tape& tape_;
  const ParameterStore& store_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

using ScalarFunction = std::function<Var(Binder&)>;

struct GradResult {
  double value = 0.0;
  Gradients gradients;
};

// Evaluates f on a fresh tape and returns exact reverse-mode gradients for
// every parameter in `params`. Throws ContractError if f is not scalar.
GradResult grad(const ScalarFunction& f, const ParameterStore& params);

// Forward-only evaluation of f (no gradient bookkeeping is retained).
double evaluate(const ScalarFunction& f, const ParameterStore& params);

}  // namespace xmal::ad
