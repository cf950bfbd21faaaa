// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "xmal/autodiff.hpp"
#include "xmal/ca.hpp"
#include "xmal/tha.hpp"

namespace xmal {

struct ModelConfig {
  std::size_t dim = 32;     // D
  std::size_t factors = 8;  // K
  std::size_t hidden = 0;   // H; 0 means D/K
  AttentionConfig attention;
  Squash squash = Squash::logistic;
  double eps = kDefaultEps;

  std::size_t factor_dim() const { return dim / factors; }
  std::size_t hidden_width() const { return hidden == 0 ? factor_dim() : hidden; }
  void validate() const;
};

using ShapeTable = std::map<std::string, std::pair<std::size_t, std::size_t>>;

// Every trainable tensor the config implies, with its shape.
ShapeTable expected_shapes(const ModelConfig& cfg);

// Throws ShapeError naming the first missing, extra or misshapen tensor.
void check_shapes(const ModelConfig& cfg, const ad::ParameterStore& params);

struct Model {
  ModelConfig config;
  ad::ParameterStore params;

  static Model initialize(const ModelConfig& cfg, std::uint64_t seed);
};

}  // namespace xmal
