// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xmal/autodiff.hpp"

namespace xmal {

struct FdOptions {
  double h = 1e-5;
  // Below this |analytic| the absolute error is reported instead.
  double abs_threshold = 1e-8;
  // 0 checks every entry; otherwise a seeded sample of at most this many
  // entries per parameter tensor.
  std::size_t max_entries_per_param = 0;
  std::uint64_t sample_seed = 0;
};

struct FdReport {
  double max_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Entries compared, including those checked one-sided.
  std::size_t entries_checked = 0;
  std::size_t entries_one_sided = 0;
  // Entries sitting on a kink on both sides; not compared.
  std::size_t entries_skipped = 0;
};

// Compares central differences (f(x+h) - f(x-h)) / 2h with reverse-mode
// gradients for each selected parameter entry. When x+h or x-h takes a
// different branch of a non-smooth primitive than x (see
// Tape::branch_signature), the difference would straddle a kink; the entry
// is then checked with the second-order one-sided stencil on a side where
// x, x+-h and x+-2h share a branch, or skipped if neither side qualifies.
FdReport finite_difference_check(const ad::ScalarFunction& f, const ad::ParameterStore& params,
                                 const FdOptions& options = {});

using VectorFunction = std::function<std::vector<ad::Var>(ad::Binder&)>;

// Same check for several scalar outputs sharing one forward pass per
// perturbation; one report per output.
std::vector<FdReport> finite_difference_check_all(const VectorFunction& f,
                                                  const ad::ParameterStore& params,
                                                  const FdOptions& options = {});

// Numeric side of a check: output values with one parameter entry offset
// by `delta` (delta == 0 evaluates the unperturbed point), plus the branch
// signature of that evaluation. Lets callers substitute an independent or
// higher-precision implementation of the same function.
struct Probe {
  std::vector<long double> values;
  std::uint64_t signature = 0;
};
using Prober = std::function<Probe(const std::string& name, std::size_t index, long double delta)>;

// Kink-aware central differences against precomputed analytic gradients,
// one per output.
std::vector<FdReport> finite_difference_check_probe(const ad::ParameterStore& params,
                                                    const std::vector<ad::Gradients>& analytic,
                                                    const Prober& probe, const FdOptions& options = {});

// Reverse-mode gradients of every output of f at `params`.
std::vector<ad::Gradients> analytic_gradients(const VectorFunction& f, const ad::ParameterStore& params);

double gradient_error(double analytic, double numeric, double abs_threshold = 1e-8);

}  // namespace xmal
