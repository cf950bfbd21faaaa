// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/trainer.hpp"

#include <cmath>
#include <map>

#include "xmal/binary_io.hpp"
#include "xmal/config.hpp"
#include "xmal/dcr.hpp"
#include "xmal/errors.hpp"
#include "xmal/rng.hpp"

namespace xmal {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (batch_size < 2 && (objective.alpha > 0.0 || objective.beta > 0.0)) {
    throw ConfigError("batch_size must be >= 2 when alpha > 0 or beta > 0 (factor standardization needs B >= 2)");
  }
  optimizer.validate();
  objective.validate();
  model.validate();
}

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size) {
  if (batch_size == 0 || dataset_size < batch_size) {
    throw ContractError("dataset of " + std::to_string(dataset_size) + " pairs is smaller than batch size " +
                        std::to_string(batch_size));
  }
  return dataset_size / batch_size;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t dataset_size,
                                     std::size_t batch_size) {
  Rng rng(derive_seed(derive_seed(seed, "shuffle"), "epoch." + std::to_string(epoch)));
  std::vector<std::size_t> order = rng.permutation(dataset_size);
  order.resize(steps_per_epoch(dataset_size, batch_size) * batch_size);
  return order;
}

TrainState start_training(const TrainConfig& cfg) {
  cfg.validate();
  TrainState state;
  state.config = cfg;
  state.model = Model::initialize(cfg.model, cfg.seed);
  return state;
}

EpochStats monitor_stats(const Model& model, const std::vector<PairItem>& monitor_items, std::uint64_t epoch) {
  const std::vector<EmbeddingItem> encoded = encode_items(model, monitor_items);
  const Matrix c = batch_covariance(model, encoded);
  return {epoch, off_diagonal_energy(c), min_diagonal(c)};
}

namespace {

void require_finite_grads(const ad::Gradients& grads, std::uint64_t step) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) throw DivergenceError(step, "gradient of '" + name + "' is not finite");
  }
}

}  // namespace

void train_until(TrainState& state, const Dataset& data, std::uint64_t stop_step,
                 const std::vector<PairItem>* monitor, const TrainHooks& hooks) {
  const TrainConfig& cfg = state.config;
  cfg.validate();
  if (data.config.dim != cfg.model.dim) {
    throw DimensionError("dataset has D=" + std::to_string(data.config.dim) + " but the model expects D=" +
                         std::to_string(cfg.model.dim));
  }
  const std::size_t spe = steps_per_epoch(data.items.size(), cfg.batch_size);
  const std::uint64_t total = static_cast<std::uint64_t>(cfg.epochs) * spe;
  const std::uint64_t stop = stop_step == 0 ? total : std::min<std::uint64_t>(stop_step, total);

  if (monitor != nullptr && state.step == 0 && state.monitor.empty()) {
    state.monitor.push_back(monitor_stats(state.model, *monitor, 0));
    if (hooks.on_epoch) hooks.on_epoch(state.monitor.back());
  }

  std::vector<std::size_t> order;
  std::uint64_t order_epoch = ~std::uint64_t{0};
  std::vector<const PairItem*> batch(cfg.batch_size);
  while (state.step < stop) {
    const std::uint64_t epoch = state.step / spe;
    const std::size_t b = static_cast<std::size_t>(state.step % spe);
    if (epoch != order_epoch) {
      order = epoch_order(cfg.seed, epoch, data.items.size(), cfg.batch_size);
      order_epoch = epoch;
    }
    for (std::size_t i = 0; i < cfg.batch_size; ++i) batch[i] = &data.items[order[b * cfg.batch_size + i]];

    ad::Tape tape;
    ad::Binder binder(tape, state.model.params);
    const BatchForward fwd = forward_batch(binder, cfg.model, cfg.objective, batch);
    StepLog entry{state.step,
                  epoch,
                  fwd.l_s.value().item(),
                  fwd.l_d.value().item(),
                  fwd.l_a.value().item(),
                  fwd.total.value().item()};
    if (!std::isfinite(entry.l_s) || !std::isfinite(entry.l_d) || !std::isfinite(entry.l_a) ||
        !std::isfinite(entry.total)) {
      throw DivergenceError(state.step, "L_S=" + format_double(entry.l_s) + " L_D=" + format_double(entry.l_d) +
                                            " L_A=" + format_double(entry.l_a));
    }
    tape.backward(fwd.total);
    const ad::Gradients grads = binder.gradients();
    require_finite_grads(grads, state.step);
    optimizer_step(cfg.optimizer, state.optimizer, state.model.params, grads);

    state.log.push_back(entry);
    ++state.step;
    if (hooks.on_step) hooks.on_step(entry);
    if (monitor != nullptr && state.step % spe == 0) {
      state.monitor.push_back(monitor_stats(state.model, *monitor, state.step / spe));
      if (hooks.on_epoch) hooks.on_epoch(state.monitor.back());
    }
    if (cfg.checkpoint_interval > 0 && state.step % cfg.checkpoint_interval == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(state);
    }
  }
}

TrainState train(const TrainConfig& cfg, const Dataset& data, const std::vector<PairItem>* monitor,
                 const TrainHooks& hooks) {
  TrainState state = start_training(cfg);
  train_until(state, data, 0, monitor, hooks);
  return state;
}

// ---------------------------------------------------------------------------
// Checkpoint container:
//   "XCKP" u32 version, u64 step, u32 tensor count,
//   per tensor: string name, u64 rows, u64 cols, f64 data (row-major)
//   string config (key=value lines)
// Tensors are written in name order: "adam.m/<p>", "adam.t", "adam.v/<p>",
// "param/<p>", "trainer.loss_log" (steps x 6), "trainer.monitor" (n x 3).

namespace {

constexpr std::string_view kCheckpointMagic = "XCKP";
const std::string kParamPrefix = "param/";
const std::string kAdamM = "adam.m/";
const std::string kAdamV = "adam.v/";
const std::string kAdamT = "adam.t";
const std::string kLossLog = "trainer.loss_log";
const std::string kMonitor = "trainer.monitor";
constexpr std::size_t kLogColumns = 6;
constexpr std::size_t kMonitorColumns = 3;

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

std::string encode_checkpoint(const TrainState& state) {
  std::map<std::string, Matrix> tensors;
  for (const auto& [name, p] : state.model.params) tensors[kParamPrefix + name] = p;
  for (const auto& [name, m] : state.optimizer.m) tensors[kAdamM + name] = m;
  for (const auto& [name, v] : state.optimizer.v) tensors[kAdamV + name] = v;
  tensors[kAdamT] = Matrix::scalar(static_cast<double>(state.optimizer.t));
  Matrix log(state.log.size(), kLogColumns);
  for (std::size_t i = 0; i < state.log.size(); ++i) {
    const StepLog& e = state.log[i];
    const double row[kLogColumns] = {static_cast<double>(e.step), static_cast<double>(e.epoch), e.l_s, e.l_d,
                                     e.l_a, e.total};
    for (std::size_t c = 0; c < kLogColumns; ++c) log(i, c) = row[c];
  }
  tensors[kLossLog] = std::move(log);
  Matrix mon(state.monitor.size(), kMonitorColumns);
  for (std::size_t i = 0; i < state.monitor.size(); ++i) {
    mon(i, 0) = static_cast<double>(state.monitor[i].epoch);
    mon(i, 1) = state.monitor[i].off_diagonal;
    mon(i, 2) = state.monitor[i].min_diagonal;
  }
  tensors[kMonitor] = std::move(mon);

  BinaryWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(state.step);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.string(name);
    w.u64(t.rows());
    w.u64(t.cols());
    w.values(t);
  }
  w.string(format_key_values(train_config_entries(state.config)));
  return w.bytes();
}

TrainState decode_checkpoint(std::string_view bytes, const std::string& context) {
  BinaryReader r(bytes, context);
  if (bytes.size() < 4 || r.raw(4) != kCheckpointMagic) throw SchemaError(context + ": not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError(context + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  TrainState state;
  state.step = r.u64();
  const std::uint32_t count = r.u32();
  std::map<std::string, Matrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (tensors.contains(name)) throw CorruptRecordError(context + ": duplicate tensor '" + name + "'");
    tensors[name] = r.matrix(rows, cols);
  }
  const std::string config_text = r.string();
  r.expect_end();
  state.config = train_config_from_text(config_text);

  bool have_t = false;
  for (auto& [name, t] : tensors) {
    if (starts_with(name, kParamPrefix)) {
      state.model.params[name.substr(kParamPrefix.size())] = std::move(t);
    } else if (starts_with(name, kAdamM)) {
      state.optimizer.m[name.substr(kAdamM.size())] = std::move(t);
    } else if (starts_with(name, kAdamV)) {
      state.optimizer.v[name.substr(kAdamV.size())] = std::move(t);
    } else if (name == kAdamT) {
      state.optimizer.t = static_cast<std::uint64_t>(t.item());
      have_t = true;
    } else if (name == kLossLog) {
      if (t.cols() != kLogColumns) throw CorruptRecordError(context + ": loss log has " + shape_string(t));
      for (std::size_t i = 0; i < t.rows(); ++i) {
        state.log.push_back({static_cast<std::uint64_t>(t(i, 0)), static_cast<std::uint64_t>(t(i, 1)), t(i, 2),
                             t(i, 3), t(i, 4), t(i, 5)});
      }
    } else if (name == kMonitor) {
      if (t.cols() != kMonitorColumns) throw CorruptRecordError(context + ": monitor log has " + shape_string(t));
      for (std::size_t i = 0; i < t.rows(); ++i) state.monitor.push_back({static_cast<std::uint64_t>(t(i, 0)), t(i, 1), t(i, 2)});
    } else {
      throw CorruptRecordError(context + ": unexpected tensor '" + name + "'");
    }
  }
  if (!have_t) throw CorruptRecordError(context + ": optimizer step count missing");
  if (state.log.size() != state.step) {
    throw CorruptRecordError(context + ": loss log holds " + std::to_string(state.log.size()) +
                             " steps, header says " + std::to_string(state.step));
  }
  state.model.config = state.config.model;
  check_shapes(state.config.model, state.model.params);
  for (const auto* moments : {&state.optimizer.m, &state.optimizer.v}) {
    for (const auto& [name, t] : *moments) {
      auto it = state.model.params.find(name);
      if (it == state.model.params.end() || it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
        throw ShapeError(context + ": optimizer moment for '" + name + "' does not match any parameter");
      }
    }
  }
  return state;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

void check_compatible(const TrainState& state, const ModelConfig& expected) {
  check_shapes(expected, state.model.params);
}

}  // namespace xmal
