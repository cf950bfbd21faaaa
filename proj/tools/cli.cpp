// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <json.hpp>
#include <map>
#include <memory>
#include <span>
#include <sstream>

#include "xmal/binary_io.hpp"
#include "xmal/config.hpp"
#include "xmal/data.hpp"
#include "xmal/errors.hpp"
#include "xmal/evaluation.hpp"
#include "xmal/objective.hpp"
#include "xmal/trainer.hpp"
#include "xmal/verify.hpp"

namespace xmal::cli {

namespace {

using Logger = std::shared_ptr<spdlog::logger>;

Logger make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto log = std::make_shared<spdlog::logger>("xmal", sink);
  log->set_pattern("[%l] %v");
  const char* env = std::getenv("XMAL_LOG");
  const std::string level = env != nullptr ? env : "info";
  if (level == "error") {
    log->set_level(spdlog::level::err);
  } else if (level == "debug") {
    log->set_level(spdlog::level::debug);
  } else {
    log->set_level(spdlog::level::info);
    if (level != "info") log->warn("XMAL_LOG='{}' is not one of error, info, debug; using info", level);
  }
  return log;
}

// CLI11 reads --config only ahead of the subcommand; accept it anywhere.
std::vector<std::string> hoist_config(const std::vector<std::string>& args) {
  std::vector<std::string> front;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      front.push_back(args[i]);
      front.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      front.push_back(args[i]);
    } else {
      rest.push_back(args[i]);
    }
  }
  front.insert(front.end(), rest.begin(), rest.end());
  return front;
}

// One string-valued flag per config key; values are parsed and validated by
// the library's key setters.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App* app, const KeyValues& defaults, const std::string& what) {
    for (const auto& [key, value] : defaults) {
      options[key] = app->add_option("--" + key, values[key], what + " (default " + value + ")");
    }
  }
  bool given(const std::string& key) const { return options.at(key)->count() > 0; }
};

std::string fmt_value(double v) { return format_double(v); }

std::vector<std::size_t> parse_ks(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(parse_uint("k", item)));
  if (out.empty()) throw ConfigError("--k: expected a comma-separated list of ranks");
  return out;
}

template <typename T>
std::vector<T> window(const std::vector<T>& items, std::size_t offset, std::size_t count, const char* what) {
  if (offset > items.size() || (count > 0 && offset + count > items.size())) {
    throw ContractError(std::string(what) + ": window [" + std::to_string(offset) + ", " +
                        std::to_string(offset + count) + ") exceeds " + std::to_string(items.size()) + " items");
  }
  const std::size_t end = count == 0 ? items.size() : offset + count;
  return std::vector<T>(items.begin() + static_cast<std::ptrdiff_t>(offset),
                        items.begin() + static_cast<std::ptrdiff_t>(end));
}

// ---------------------------------------------------------------------------

struct GenData {
  KeyFlags keys;
  std::string out;
};

int cmd_gen_data(const GenData& a, std::ostream& out, const Logger& log) {
  SynthConfig cfg;
  for (const auto& [key, value] : a.keys.values)
    if (a.keys.given(key)) set_synth_key(cfg, key, value);
  cfg.validate();
  const KeyValues entries = synth_config_entries(cfg);
  const std::uint64_t hash = config_hash(entries);
  const Dataset data = generate(cfg);
  save_dataset(data, a.out);
  write_file(a.out + ".manifest", dataset_manifest(data) + "config_hash=" + hash_hex(hash) + "\n");
  std::size_t labels = 0;
  for (const PairItem& item : data.items) labels += item.concepts.size();
  log->info("wrote {} pairs to {}", data.items.size(), a.out);
  out << "config_hash=" << hash_hex(hash) << "\n"
      << "seed=" << cfg.seed << "\n"
      << "pairs=" << data.items.size() << "\n"
      << "concept_labels=" << labels << "\n"
      << "out=" << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct Train {
  KeyFlags keys;
  std::string data;
  std::string out;
  std::string log_path;
  std::string resume;
  std::size_t holdout = 0;
};

std::string loss_log_jsonl(const TrainState& state, std::uint64_t hash) {
  using Json = nlohmann::ordered_json;
  std::string text;
  Json head;
  head["config_hash"] = hash_hex(hash);
  head["seed"] = state.config.seed;
  head["steps"] = state.step;
  text += head.dump() + "\n";
  for (const StepLog& e : state.log) {
    Json j;
    j["step"] = e.step;
    j["epoch"] = e.epoch;
    j["L_S"] = e.l_s;
    j["L_D"] = e.l_d;
    j["L_A"] = e.l_a;
    j["L"] = e.total;
    text += j.dump() + "\n";
  }
  for (const EpochStats& m : state.monitor) {
    Json j;
    j["monitor_epoch"] = m.epoch;
    j["off_diagonal"] = m.off_diagonal;
    j["min_diagonal"] = m.min_diagonal;
    text += j.dump() + "\n";
  }
  return text;
}

int cmd_train(const Train& a, std::ostream& out, std::ostream& err, const Logger& log) {
  TrainState state;
  if (!a.resume.empty()) {
    state = load_checkpoint(a.resume);
    for (const auto& [key, value] : a.keys.values) {
      if (!a.keys.given(key)) continue;
      if (key != "epochs") throw ConfigError("--" + key + " cannot change when resuming; only --epochs may");
      set_train_key(state.config, key, value);
    }
    state.config.validate();
    log->info("resuming {} at step {}", a.resume, state.step);
  } else {
    TrainConfig cfg;
    for (const auto& [key, value] : a.keys.values)
      if (a.keys.given(key)) set_train_key(cfg, key, value);
    state = start_training(cfg);
  }
  const std::uint64_t hash = config_hash(train_config_entries(state.config));
  const std::string log_path = a.log_path.empty() ? a.out + ".log.jsonl" : a.log_path;

  const Dataset all = load_dataset(a.data);
  if (a.holdout >= all.items.size()) {
    throw ConfigError("--holdout " + std::to_string(a.holdout) + " leaves no training pairs");
  }
  if (a.holdout == 1) throw ConfigError("--holdout must be 0 or >= 2 (covariance needs two items)");
  const auto [train_set, monitor_set] = split_dataset(all, all.items.size() - a.holdout);

  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& e) {
    log->debug("step {} epoch {} L_S={} L_D={} L_A={} L={}", e.step, e.epoch, e.l_s, e.l_d, e.l_a, e.total);
  };
  hooks.on_epoch = [&](const EpochStats& s) {
    log->info("epoch {} off_diagonal={} min_diagonal={}", s.epoch, s.off_diagonal, s.min_diagonal);
  };
  hooks.on_checkpoint = [&](const TrainState& s) {
    const std::string path = a.out + ".step" + std::to_string(s.step);
    save_checkpoint(s, path);
    log->info("checkpoint {}", path);
  };

  log->info("training config_hash={} seed={} pairs={} holdout={}", hash_hex(hash), state.config.seed,
            train_set.items.size(), a.holdout);
  try {
    train_until(state, train_set, 0, a.holdout > 0 ? &monitor_set.items : nullptr, hooks);
  } catch (const DivergenceError& e) {
    write_file(log_path, loss_log_jsonl(state, hash));
    err << "error: training diverged at step " << e.step() << ": " << e.what() << "\n";
    return kDiverged;
  }
  save_checkpoint(state, a.out);
  write_file(log_path, loss_log_jsonl(state, hash));

  out << "config_hash=" << hash_hex(hash) << "\n"
      << "seed=" << state.config.seed << "\n"
      << "steps=" << state.step << "\n";
  if (!state.log.empty()) {
    const StepLog& last = state.log.back();
    out << "final.L_S=" << fmt_value(last.l_s) << "\n"
        << "final.L_D=" << fmt_value(last.l_d) << "\n"
        << "final.L_A=" << fmt_value(last.l_a) << "\n"
        << "final.L=" << fmt_value(last.total) << "\n";
  }
  out << "checkpoint=" << a.out << "\n"
      << "log=" << log_path << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct Source {
  std::string checkpoint;
  std::string data;
  std::string embeddings;
};

std::vector<EmbeddingItem> load_items(const Source& s, const Model& model, std::size_t offset, std::size_t count,
                                      std::size_t threads) {
  if (s.data.empty() == s.embeddings.empty()) throw ConfigError("give exactly one of --data and --embeddings");
  if (!s.embeddings.empty()) return window(load_embeddings(s.embeddings), offset, count, "--embeddings");
  const std::vector<PairItem> items = window(load_dataset(s.data).items, offset, count, "--data");
  return encode_items(model, items, threads);
}

KeyValues run_entries(const TrainState& state, const KeyValues& extra) {
  KeyValues entries = train_config_entries(state.config);
  entries.insert(entries.end(), extra.begin(), extra.end());
  return entries;
}

struct Eval {
  Source source;
  std::string modes = "THA+DCR";
  std::string ks = "1,5,10";
  std::size_t eval_size = 0;
  std::size_t offset = 0;
  std::string out;
  std::string save_embeddings;
  bool diagnostics = false;
  CLI::Option* seed_opt = nullptr;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

void print_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << name << "." << i << "=";
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j == 0 ? "" : ",") << fmt_value(m(i, j));
    out << "\n";
  }
}

int cmd_eval(const Eval& a, std::ostream& out, const Logger& log) {
  const std::vector<SimilarityMode> modes = parse_modes(a.modes);
  const std::vector<std::size_t> ks = parse_ks(a.ks);
  const TrainState state = load_checkpoint(a.source.checkpoint);
  const std::uint64_t seed = a.seed_opt->count() > 0 ? a.seed : state.config.seed;
  const std::vector<EmbeddingItem> items = load_items(a.source, state.model, a.offset, a.eval_size, a.threads);
  const std::uint64_t hash = config_hash(run_entries(
      state, {{"eval.modes", a.modes}, {"eval.k", a.ks}, {"eval.eval_size", std::to_string(items.size())},
              {"eval.offset", std::to_string(a.offset)}, {"eval.seed", std::to_string(seed)}}));
  log->info("evaluating {} items, {} modes", items.size(), modes.size());
  const std::vector<RetrievalReport> reports = evaluate(state.model, items, modes, ks, seed, a.threads);
  const std::string text = format_report_text(reports, hash, seed);
  out << text;
  if (!a.out.empty()) {
    write_file(a.out, text);
    write_file(a.out + ".xrep", encode_report(reports, hash, seed));
  }
  if (!a.save_embeddings.empty()) save_embeddings(items, a.save_embeddings);
  if (a.diagnostics) {
    const DcrDiagnostics d = dcr_diagnostics(state.model, items);
    print_matrix(out, "dcr.covariance", d.covariance);
    print_matrix(out, "dcr.probability", d.probability.probability);
    out << "dcr.probability.defined=";
    for (std::size_t j = 0; j < d.probability.column_defined.size(); ++j)
      out << (j == 0 ? "" : ",") << (d.probability.column_defined[j] ? 1 : 0);
    out << "\n";
    out << "dcr.mean_confidence=";
    for (std::size_t k = 0; k < d.mean_confidence.size(); ++k) out << (k == 0 ? "" : ",") << fmt_value(d.mean_confidence[k]);
    out << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct Sim {
  Source source;
  std::size_t audio = 0;
  std::size_t text = 0;
  CLI::Option* text_opt = nullptr;
};

int cmd_sim(const Sim& a, std::ostream& out) {
  const TrainState state = load_checkpoint(a.source.checkpoint);
  const std::size_t text_id = a.text_opt->count() > 0 ? a.text : a.audio;
  std::vector<EmbeddingItem> items;
  if (!a.source.embeddings.empty() && a.source.data.empty()) {
    items = load_embeddings(a.source.embeddings);
  } else if (a.source.embeddings.empty() && !a.source.data.empty()) {
    const Dataset data = load_dataset(a.source.data);
    for (std::size_t id : {a.audio, text_id}) {
      if (id >= data.items.size()) {
        throw ContractError("item id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(data.items.size()) + ")");
      }
    }
    items.resize(data.items.size());
    const std::vector<PairItem> chosen = {data.items[a.audio], data.items[text_id]};
    const std::vector<EmbeddingItem> encoded = encode_items(state.model, chosen);
    items[a.audio] = encoded[0];
    items[text_id] = encoded[1];
  } else {
    throw ConfigError("give exactly one of --data and --embeddings");
  }
  for (std::size_t id : {a.audio, text_id}) {
    if (id >= items.size()) {
      throw ContractError("item id " + std::to_string(id) + " out of range [0, " + std::to_string(items.size()) + ")");
    }
  }
  const PairBreakdown b = pair_breakdown(state.model, items[a.audio], items[text_id]);
  const std::uint64_t hash = config_hash(run_entries(
      state, {{"sim.audio", std::to_string(a.audio)}, {"sim.text", std::to_string(text_id)}}));
  out << "config_hash=" << hash_hex(hash) << "\n"
      << "seed=" << state.config.seed << "\n"
      << "audio=" << a.audio << "\n"
      << "text=" << text_id << "\n"
      << "S_DP=" << fmt_value(b.dp) << "\n";
  for (std::size_t l = 0; l < kLevels; ++l) {
    const std::string p = std::string("S_THA.") + level_name(l);
    out << p << ".text_enhanced=" << fmt_value(b.tha.text_enhanced[l]) << "\n"
        << p << ".audio_enhanced=" << fmt_value(b.tha.audio_enhanced[l]) << "\n"
        << p << "=" << fmt_value(b.tha.level[l]) << "\n";
  }
  out << "S_THA=" << fmt_value(b.tha.total) << "\n";
  for (std::size_t k = 0; k < b.dcr.terms.size(); ++k) {
    const FactorTerm& t = b.dcr.terms[k];
    const std::string p = "S_DCR.factor" + std::to_string(k);
    out << p << ".confidence=" << fmt_value(t.confidence) << "\n"
        << p << ".cosine=" << fmt_value(t.cosine) << "\n"
        << p << ".term=" << fmt_value(t.confidence * t.cosine) << "\n";
  }
  out << "S_DCR=" << fmt_value(b.dcr.total) << "\n";
  for (SimilarityMode m : {SimilarityMode::dp, SimilarityMode::tha, SimilarityMode::dcr, SimilarityMode::tha_dp,
                           SimilarityMode::tha_dcr}) {
    out << "S[" << to_string(m) << "]=" << fmt_value(b.combined(m)) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err, const Logger& log) {
  log->info("running verification suites");
  const VerifyReport report = run_verify(o);
  out << format_verify_report(report, o);
  if (report.passed()) return kOk;
  err << "verification failed:";
  for (const std::string& f : report.failures()) err << " " << f;
  err << "\n";
  return kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Logger log = make_logger(err);

  CLI::App app{"xmal: cross-modal audio-text alignment toolkit"};
  app.set_config("--config", "", "INI file; [gen-data], [train], [eval], [sim], [verify] sections");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  // -h is taken by the finite-difference step flag.
  app.set_help_flag("--help", "Print this help message and exit");

  std::size_t threads = 1;
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads for similarity evaluation (0 = all cores)");
  };

  GenData gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic paired dataset");
  gen.keys.add(gen_cmd, synth_config_entries(SynthConfig{}), "Dataset key");
  gen_cmd->add_option("--out", gen.out, "Dataset file")->required();
  add_threads(gen_cmd);

  Train train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train.keys.add(train_cmd, train_config_entries(TrainConfig{}), "Training key");
  train_cmd->add_option("--data", train.data, "Dataset file")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint file")->required();
  train_cmd->add_option("--log", train.log_path, "Loss log (JSON lines; default <out>.log.jsonl)");
  train_cmd->add_option("--resume", train.resume, "Continue from this checkpoint");
  train_cmd->add_option("--holdout", train.holdout, "Last N pairs are held out as the covariance monitor");
  add_threads(train_cmd);

  Eval eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Retrieval evaluation");
  eval_cmd->add_option("--checkpoint", eval.source.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval.source.data, "Dataset file");
  eval_cmd->add_option("--embeddings", eval.source.embeddings, "Embedding file (instead of --data)");
  eval_cmd->add_option("--modes", eval.modes, "Comma-separated modes: DP, THA, DCR, THA+DP, THA+DCR");
  eval_cmd->add_option("--k", eval.ks, "Comma-separated ranks");
  eval_cmd->add_option("--eval_size", eval.eval_size, "Items to evaluate (0 = all)");
  eval_cmd->add_option("--offset", eval.offset, "First item to evaluate");
  eval_cmd->add_option("--out", eval.out, "Report file (key=value); <out>.xrep gets the binary report");
  eval_cmd->add_option("--save_embeddings", eval.save_embeddings, "Write the evaluated embeddings here");
  eval_cmd->add_flag("--diagnostics", eval.diagnostics, "Print DCR covariance, match probability, confidence");
  eval.seed_opt = eval_cmd->add_option("--seed", eval.seed, "Seed recorded in reports (default: training seed)");
  add_threads(eval_cmd);

  Sim sim;
  CLI::App* sim_cmd = app.add_subcommand("sim", "Score breakdown for one audio-text pair");
  sim_cmd->add_option("--checkpoint", sim.source.checkpoint, "Checkpoint file")->required();
  sim_cmd->add_option("--data", sim.source.data, "Dataset file");
  sim_cmd->add_option("--embeddings", sim.source.embeddings, "Embedding file (instead of --data)");
  sim_cmd->add_option("--audio", sim.audio, "Audio item id")->required();
  sim.text_opt = sim_cmd->add_option("--text", sim.text, "Text item id (default: --audio)");
  add_threads(sim_cmd);

  VerifyOptions verify;
  CLI::App* verify_cmd = app.add_subcommand("grad-check", "Gradient, oracle and invariant self-checks");
  verify_cmd->alias("verify");
  verify_cmd->add_option("--h", verify.h, "Finite-difference step");
  verify_cmd->add_option("--tol", verify.tolerance, "Full-loss gradient tolerance");
  verify_cmd->add_option("--primitive_tol", verify.primitive_tolerance, "Per-primitive gradient tolerance");
  verify_cmd->add_option("--seed", verify.seed, "Base seed");
  verify_cmd->add_option("--seeds", verify.seeds, "Seeds per check");
  verify_cmd->add_option("--entries", verify.full_loss_entries,
                         "Sampled entries per tensor in the full-loss check (0 = all)");
  verify_cmd->add_option("--instances", verify.property_instances, "Randomized instances per property");
  verify_cmd->add_option("--inject_bug", verify.inject_bug, "Test fixture: break this primitive's gradient")
      ->group("");
  add_threads(verify_cmd);

  std::vector<std::string> reversed = hoist_config(args);
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out, log);
    if (train_cmd->parsed()) return cmd_train(train, out, err, log);
    if (eval_cmd->parsed()) {
      eval.threads = threads;
      return cmd_eval(eval, out, log);
    }
    if (sim_cmd->parsed()) return cmd_sim(sim, out);
    if (verify_cmd->parsed()) return cmd_verify(verify, out, err, log);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace xmal::cli
