// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "xmal/autodiff.hpp"

namespace xmal {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Rescale gradients whose global L2 norm exceeds this; 0 disables.
  double clip_norm = 0.0;

  void validate() const;
};

// Adam moments and step count; empty for SGD.
struct OptimizerState {
  std::uint64_t t = 0;
  ad::ParameterStore m;
  ad::ParameterStore v;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

double global_norm(const ad::Gradients& grads);

// One update in place. Adam uses bias-corrected moments:
//   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
//   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
void optimizer_step(const OptimizerConfig& cfg, OptimizerState& state, ad::ParameterStore& params,
                    const ad::Gradients& grads);

}  // namespace xmal
