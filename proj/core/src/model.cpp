// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/model.hpp"

#include "xmal/dcr.hpp"
#include "xmal/encoders.hpp"
#include "xmal/errors.hpp"
#include "xmal/rng.hpp"

namespace xmal {

void ModelConfig::validate() const {
  if (dim == 0) throw ConfigError("embedding dim must be positive");
  if (factors == 0 || dim % factors != 0) {
    throw ConfigError("embedding dim D=" + std::to_string(dim) + " is not divisible by K=" +
                      std::to_string(factors));
  }
  attention.validate();
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
}

ShapeTable expected_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.dim;
  ShapeTable shapes;
  for (std::size_t b = 1; b <= kTextBlocks; ++b) {
    shapes[block_weight_name(Modality::text, b)] = {d, d};
    shapes[block_bias_name(Modality::text, b)] = {1, d};
  }
  shapes[kTextReadout] = {d, 1};
  for (std::size_t b = 1; b <= kAudioBlocks; ++b) {
    shapes[block_weight_name(Modality::audio, b)] = {d, d};
    shapes[block_bias_name(Modality::audio, b)] = {1, d};
  }
  for (std::size_t m = 1; m <= kAudioMerges; ++m) shapes[merge_name(m)] = {d, d};
  for (Modality mod : {Modality::text, Modality::audio})
    for (std::size_t k = 0; k < cfg.factors; ++k) shapes[factor_weight_name(mod, k)] = {cfg.factor_dim(), d};
  shapes[kConfidenceW1] = {2 * cfg.factor_dim(), cfg.hidden_width()};
  shapes[kConfidenceB1] = {1, cfg.hidden_width()};
  shapes[kConfidenceW2] = {cfg.hidden_width(), 1};
  shapes[kConfidenceB2] = {1, 1};
  return shapes;
}

void check_shapes(const ModelConfig& cfg, const ad::ParameterStore& params) {
  const ShapeTable shapes = expected_shapes(cfg);
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("parameter '" + name + "' missing for the configured model");
    if (it->second.rows() != shape.first || it->second.cols() != shape.second) {
      throw ShapeError("parameter '" + name + "' is " + shape_string(it->second) + ", config expects " +
                       std::to_string(shape.first) + "x" + std::to_string(shape.second));
    }
  }
  for (const auto& [name, value] : params) {
    if (!shapes.contains(name)) throw ShapeError("parameter '" + name + "' is not part of the configured model");
  }
}

Model Model::initialize(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model model{cfg, {}};
  Rng rng(derive_seed(seed, "init"));
  init_text_encoder(model.params, cfg.dim, rng);
  init_audio_encoder(model.params, cfg.dim, rng);
  init_factor_banks(model.params, cfg.dim, cfg.factors, rng);
  init_confidence(model.params, cfg.factor_dim(), cfg.hidden_width(), rng);
  return model;
}

}  // namespace xmal
