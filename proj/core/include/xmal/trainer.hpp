// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch training loop and checkpoints.
//
// Step s belongs to epoch s / steps_per_epoch; the epoch's batch order is a
// permutation drawn from a stream derived from (seed, epoch) alone, so a run
// can resume from any step without replaying earlier epochs. The trailing
// incomplete batch of each epoch is dropped.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "xmal/data.hpp"
#include "xmal/model.hpp"
#include "xmal/objective.hpp"
#include "xmal/optimizer.hpp"

namespace xmal {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 7;
  OptimizerConfig optimizer;
  ObjectiveConfig objective;
  ModelConfig model;
  // Steps between checkpoint callbacks; 0 disables.
  std::size_t checkpoint_interval = 0;

  void validate() const;
};

struct StepLog {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double l_s = 0.0;
  double l_d = 0.0;
  double l_a = 0.0;
  double total = 0.0;

  friend bool operator==(const StepLog&, const StepLog&) = default;
};

// Covariance statistics of the monitor batch; epoch 0 is before training.
struct EpochStats {
  std::uint64_t epoch = 0;
  double off_diagonal = 0.0;
  double min_diagonal = 0.0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainState {
  TrainConfig config;
  Model model;
  OptimizerState optimizer;
  std::uint64_t step = 0;
  std::vector<StepLog> log;
  std::vector<EpochStats> monitor;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochStats&)> on_epoch;
  std::function<void(const TrainState&)> on_checkpoint;
};

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size);

// Batch order of one epoch (full batches only, flattened).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t dataset_size,
                                     std::size_t batch_size);

// Fresh state with parameters drawn from the config seed.
TrainState start_training(const TrainConfig& cfg);

// Advances until `stop_step` (0 = end of the last epoch). `monitor`, if
// non-null, is the held-out batch whose covariance is logged at epoch 0
// and after each completed epoch. Throws DivergenceError naming the step
// when any loss component or gradient is non-finite.
void train_until(TrainState& state, const Dataset& data, std::uint64_t stop_step = 0,
                 const std::vector<PairItem>* monitor = nullptr, const TrainHooks& hooks = {});

TrainState train(const TrainConfig& cfg, const Dataset& data, const std::vector<PairItem>* monitor = nullptr,
                 const TrainHooks& hooks = {});

// Covariance statistics for a monitor set under the current parameters.
EpochStats monitor_stats(const Model& model, const std::vector<PairItem>& monitor_items, std::uint64_t epoch);

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const TrainState& state);
// Throws VersionError, CorruptRecordError, or ShapeError when the stored
// tensors disagree with the stored config.
TrainState decode_checkpoint(std::string_view bytes, const std::string& context = "checkpoint");
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

// ShapeError unless the checkpoint's tensors fit `expected`.
void check_compatible(const TrainState& state, const ModelConfig& expected);

}  // namespace xmal
