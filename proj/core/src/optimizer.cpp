// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/optimizer.hpp"

#include <cmath>

#include "xmal/errors.hpp"

namespace xmal {

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam eps must be > 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
}

double global_norm(const ad::Gradients& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double x : g.data()) sq += x * x;
  return std::sqrt(sq);
}

void optimizer_step(const OptimizerConfig& cfg, OptimizerState& state, ad::ParameterStore& params,
                    const ad::Gradients& grads) {
  double factor = 1.0;
  if (cfg.clip_norm > 0.0) {
    const double norm = global_norm(grads);
    if (norm > cfg.clip_norm) factor = cfg.clip_norm / norm;
  }
  if (cfg.kind == OptimizerKind::adam) ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);

  for (auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ContractError("optimizer: no gradient for '" + name + "'");
    const Matrix& g = it->second;
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw DimensionError("optimizer: gradient for '" + name + "' is " + shape_string(g) + ", parameter is " +
                           shape_string(p));
    }
    if (cfg.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learning_rate * factor * g[i];
      continue;
    }
    auto [mi, m_new] = state.m.try_emplace(name, p.rows(), p.cols());
    auto [vi, v_new] = state.v.try_emplace(name, p.rows(), p.cols());
    Matrix& m = mi->second;
    Matrix& v = vi->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = factor * g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace xmal
