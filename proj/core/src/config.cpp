// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "xmal/errors.hpp"
#include "xmal/rng.hpp"

namespace xmal {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + value + "' is not a number");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError("key '" + key + "': '" + value + "' is not a non-negative integer");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("key '" + key + "': '" + value + "' is not a boolean");
}

namespace {

using TrainSetter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;
using SynthSetter = std::function<void(SynthConfig&, const std::string&, const std::string&)>;

const std::map<std::string, TrainSetter>& train_setters() {
  static const std::map<std::string, TrainSetter> setters = {
      {"epochs", [](TrainConfig& c, auto& k, auto& v) { c.epochs = parse_uint(k, v); }},
      {"batch_size", [](TrainConfig& c, auto& k, auto& v) { c.batch_size = parse_uint(k, v); }},
      {"seed", [](TrainConfig& c, auto& k, auto& v) { c.seed = parse_uint(k, v); }},
      {"optimizer", [](TrainConfig& c, auto&, auto& v) { c.optimizer.kind = parse_optimizer(v); }},
      {"lr", [](TrainConfig& c, auto& k, auto& v) { c.optimizer.learning_rate = parse_double(k, v); }},
      {"adam_beta1", [](TrainConfig& c, auto& k, auto& v) { c.optimizer.beta1 = parse_double(k, v); }},
      {"adam_beta2", [](TrainConfig& c, auto& k, auto& v) { c.optimizer.beta2 = parse_double(k, v); }},
      {"adam_eps", [](TrainConfig& c, auto& k, auto& v) { c.optimizer.eps = parse_double(k, v); }},
      {"clip_norm", [](TrainConfig& c, auto& k, auto& v) { c.optimizer.clip_norm = parse_double(k, v); }},
      {"tau", [](TrainConfig& c, auto& k, auto& v) { c.objective.tau = parse_double(k, v); }},
      {"alpha", [](TrainConfig& c, auto& k, auto& v) { c.objective.alpha = parse_double(k, v); }},
      {"beta", [](TrainConfig& c, auto& k, auto& v) { c.objective.beta = parse_double(k, v); }},
      {"mode", [](TrainConfig& c, auto&, auto& v) { c.objective.mode = parse_mode(v); }},
      {"lambda", [](TrainConfig& c, auto& k, auto& v) { c.model.attention.lambda = parse_double(k, v); }},
      {"direction", [](TrainConfig& c, auto&, auto& v) { c.model.attention.direction = parse_direction(v); }},
      {"combine", [](TrainConfig& c, auto&, auto& v) { c.model.attention.combine = parse_combine(v); }},
      {"K", [](TrainConfig& c, auto& k, auto& v) { c.model.factors = parse_uint(k, v); }},
      {"D", [](TrainConfig& c, auto& k, auto& v) { c.model.dim = parse_uint(k, v); }},
      {"H", [](TrainConfig& c, auto& k, auto& v) { c.model.hidden = parse_uint(k, v); }},
      {"squash", [](TrainConfig& c, auto&, auto& v) { c.model.squash = parse_squash(v); }},
      {"eps",
       [](TrainConfig& c, auto& k, auto& v) {
         c.model.eps = parse_double(k, v);
         c.model.attention.eps = c.model.eps;
       }},
      {"checkpoint_interval", [](TrainConfig& c, auto& k, auto& v) { c.checkpoint_interval = parse_uint(k, v); }},
  };
  return setters;
}

const std::map<std::string, SynthSetter>& synth_setters() {
  static const std::map<std::string, SynthSetter> setters = {
      {"pairs", [](SynthConfig& c, auto& k, auto& v) { c.pairs = parse_uint(k, v); }},
      {"K", [](SynthConfig& c, auto& k, auto& v) { c.factors = parse_uint(k, v); }},
      {"D", [](SynthConfig& c, auto& k, auto& v) { c.dim = parse_uint(k, v); }},
      {"N", [](SynthConfig& c, auto& k, auto& v) { c.text_tokens = parse_uint(k, v); }},
      {"M", [](SynthConfig& c, auto& k, auto& v) { c.audio_tokens = parse_uint(k, v); }},
      {"concept_count", [](SynthConfig& c, auto& k, auto& v) { c.concept_count = parse_uint(k, v); }},
      {"sigma", [](SynthConfig& c, auto& k, auto& v) { c.noise_sigma = parse_double(k, v); }},
      {"seed", [](SynthConfig& c, auto& k, auto& v) { c.seed = parse_uint(k, v); }},
      {"shared_projection", [](SynthConfig& c, auto& k, auto& v) { c.shared_projection = parse_bool(k, v); }},
  };
  return setters;
}

}  // namespace

KeyValues train_config_entries(const TrainConfig& c) {
  return {
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"seed", std::to_string(c.seed)},
      {"optimizer", to_string(c.optimizer.kind)},
      {"lr", format_double(c.optimizer.learning_rate)},
      {"adam_beta1", format_double(c.optimizer.beta1)},
      {"adam_beta2", format_double(c.optimizer.beta2)},
      {"adam_eps", format_double(c.optimizer.eps)},
      {"clip_norm", format_double(c.optimizer.clip_norm)},
      {"tau", format_double(c.objective.tau)},
      {"alpha", format_double(c.objective.alpha)},
      {"beta", format_double(c.objective.beta)},
      {"mode", to_string(c.objective.mode)},
      {"lambda", format_double(c.model.attention.lambda)},
      {"direction", to_string(c.model.attention.direction)},
      {"combine", to_string(c.model.attention.combine)},
      {"K", std::to_string(c.model.factors)},
      {"D", std::to_string(c.model.dim)},
      {"H", std::to_string(c.model.hidden)},
      {"squash", to_string(c.model.squash)},
      {"eps", format_double(c.model.eps)},
      {"checkpoint_interval", std::to_string(c.checkpoint_interval)},
  };
}

void set_train_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto it = train_setters().find(key);
  if (it == train_setters().end()) throw ConfigError("unknown training key '" + key + "'");
  it->second(cfg, key, value);
}

bool is_train_key(const std::string& key) { return train_setters().contains(key); }

KeyValues synth_config_entries(const SynthConfig& c) {
  return {
      {"pairs", std::to_string(c.pairs)},
      {"K", std::to_string(c.factors)},
      {"D", std::to_string(c.dim)},
      {"N", std::to_string(c.text_tokens)},
      {"M", std::to_string(c.audio_tokens)},
      {"concept_count", std::to_string(c.concept_count)},
      {"sigma", format_double(c.noise_sigma)},
      {"seed", std::to_string(c.seed)},
      {"shared_projection", c.shared_projection ? "1" : "0"},
  };
}

void set_synth_key(SynthConfig& cfg, const std::string& key, const std::string& value) {
  auto it = synth_setters().find(key);
  if (it == synth_setters().end()) throw ConfigError("unknown data key '" + key + "'");
  it->second(cfg, key, value);
}

bool is_synth_key(const std::string& key) { return synth_setters().contains(key); }

std::string format_key_values(const KeyValues& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + "=" + v + "\n";
  return out;
}

KeyValues parse_key_values(std::string_view text, const std::string& context) {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(context + ":" + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

TrainConfig train_config_from_text(std::string_view text) {
  TrainConfig cfg;
  for (const auto& [k, v] : parse_key_values(text, "train config")) set_train_key(cfg, k, v);
  return cfg;
}

std::uint64_t config_hash(const KeyValues& entries) { return fnv1a64(format_key_values(entries)); }

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace xmal
