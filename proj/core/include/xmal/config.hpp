// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value schema for the data and training configs. Reals are
// written with 17 significant digits so text round-trips are exact.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xmal/data.hpp"
#include "xmal/trainer.hpp"

namespace xmal {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string format_double(double v);
double parse_double(const std::string& key, const std::string& value);
std::uint64_t parse_uint(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

KeyValues train_config_entries(const TrainConfig& cfg);
// ConfigError for unknown keys or unparsable values.
void set_train_key(TrainConfig& cfg, const std::string& key, const std::string& value);
bool is_train_key(const std::string& key);

KeyValues synth_config_entries(const SynthConfig& cfg);
void set_synth_key(SynthConfig& cfg, const std::string& key, const std::string& value);
bool is_synth_key(const std::string& key);

// "key=value\n" per entry.
std::string format_key_values(const KeyValues& entries);
// Skips blank lines and '#' comments; ConfigError on lines without '='.
KeyValues parse_key_values(std::string_view text, const std::string& context = "config");

TrainConfig train_config_from_text(std::string_view text);

// FNV-1a over the canonical key=value text.
std::uint64_t config_hash(const KeyValues& entries);
std::string hash_hex(std::uint64_t hash);

}  // namespace xmal
