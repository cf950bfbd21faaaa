// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/evaluation.hpp"

#include <cmath>

#include "xmal/binary_io.hpp"
#include "xmal/ca.hpp"
#include "xmal/config.hpp"
#include "xmal/errors.hpp"

namespace xmal {

std::string to_string(RetrievalDirection d) {
  return d == RetrievalDirection::text_to_audio ? "text_to_audio" : "audio_to_text";
}

RetrievalDirection parse_retrieval_direction(const std::string& s) {
  if (s == "text_to_audio") return RetrievalDirection::text_to_audio;
  if (s == "audio_to_text") return RetrievalDirection::audio_to_text;
  throw ConfigError("unknown retrieval direction '" + s + "'");
}

std::vector<std::size_t> true_match_ranks(const Matrix& s, RetrievalDirection direction) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw ShapeError("retrieval: similarity must be square and non-empty, got " + shape_string(s));
  }
  const std::size_t n = s.rows();
  const bool by_row = direction == RetrievalDirection::audio_to_text;
  auto score = [&](std::size_t query, std::size_t candidate) {
    return by_row ? s(query, candidate) : s(candidate, query);
  };
  std::vector<std::size_t> ranks(n);
  for (std::size_t q = 0; q < n; ++q) {
    const double target = score(q, q);
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const double v = score(q, c);
      if (v > target || (v == target && c < q)) ++ahead;
    }
    ranks[q] = ahead + 1;
  }
  return ranks;
}

double recall_at_k(const Matrix& similarity, std::size_t k, RetrievalDirection direction) {
  if (k < 1 || k > similarity.rows()) {
    throw ContractError("recall_at_k: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(similarity.rows()) + "]");
  }
  const std::vector<std::size_t> ranks = true_match_ranks(similarity, direction);
  std::size_t hits = 0;
  for (std::size_t r : ranks) hits += r <= k ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<RetrievalReport> evaluate(const Model& model, std::span<const EmbeddingItem> items,
                                      const std::vector<SimilarityMode>& modes, const std::vector<std::size_t>& ks,
                                      std::uint64_t seed, std::size_t threads) {
  if (items.empty()) throw ContractError("evaluate: empty evaluation set");
  for (std::size_t k : ks) {
    if (k < 1 || k > items.size()) {
      throw ContractError("evaluate: k=" + std::to_string(k) + " outside [1, " + std::to_string(items.size()) + "]");
    }
  }
  bool want_dp = false;
  bool want_tha = false;
  bool want_dcr = false;
  for (SimilarityMode m : modes) {
    want_dp |= uses_dp(m);
    want_tha |= uses_tha(m);
    want_dcr |= uses_dcr(m);
  }
  const SimilarityParts parts = similarity_parts(model, items, want_dp, want_tha, want_dcr, threads);
  std::vector<RetrievalReport> reports;
  for (SimilarityMode m : modes) {
    const Matrix s = combine_parts(parts, m);
    for (RetrievalDirection d : {RetrievalDirection::text_to_audio, RetrievalDirection::audio_to_text}) {
      RetrievalReport r{d, m, items.size(), seed, {}};
      for (std::size_t k : ks) r.r_at[k] = recall_at_k(s, k, d);
      reports.push_back(std::move(r));
    }
  }
  return reports;
}

std::vector<RetrievalReport> evaluate(const Model& model, const Dataset& data,
                                      const std::vector<SimilarityMode>& modes, const std::vector<std::size_t>& ks,
                                      std::uint64_t seed, std::size_t threads) {
  const std::vector<EmbeddingItem> encoded = encode_items(model, data.items, threads);
  return evaluate(model, std::span<const EmbeddingItem>(encoded), modes, ks, seed, threads);
}

DcrDiagnostics dcr_diagnostics(const Model& model, std::span<const EmbeddingItem> items) {
  DcrDiagnostics out;
  out.covariance = batch_covariance(model, items);
  out.probability = match_probability(out.covariance);
  const std::size_t k_count = model.config.factors;
  out.mean_confidence.assign(k_count, 0.0);
  for (const EmbeddingItem& item : items) {
    const DcrBreakdown b =
        s_dcr_breakdown(model.params, item_factors(model, item.text.global, Modality::text),
                        item_factors(model, item.audio.global, Modality::audio), model.config.squash, model.config.eps);
    for (std::size_t k = 0; k < k_count; ++k) out.mean_confidence[k] += b.terms[k].confidence;
  }
  for (double& g : out.mean_confidence) g /= static_cast<double>(items.size());
  return out;
}

double PairBreakdown::combined(SimilarityMode mode) const {
  double s = 0.0;
  if (uses_tha(mode)) s += tha.total;
  if (uses_dp(mode)) s += dp;
  if (uses_dcr(mode)) s += dcr.total;
  return s;
}

PairBreakdown pair_breakdown(const Model& model, const EmbeddingItem& audio_item, const EmbeddingItem& text_item) {
  const ModelConfig& cfg = model.config;
  PairBreakdown out;
  out.dp = s_dp(audio_item.audio.global, text_item.text.global, cfg.eps);
  out.tha = s_tha_breakdown(audio_item.audio, text_item.text, cfg.attention);
  out.dcr = s_dcr_breakdown(model.params, item_factors(model, text_item.text.global, Modality::text),
                            item_factors(model, audio_item.audio.global, Modality::audio), cfg.squash, cfg.eps);
  return out;
}

CountBand binomial_band(std::size_t trials, double p, double coverage) {
  if (!(p >= 0.0 && p <= 1.0) || !(coverage > 0.0 && coverage < 1.0)) {
    throw ContractError("binomial_band: p must lie in [0, 1] and coverage in (0, 1)");
  }
  std::vector<double> pmf(trials + 1);
  for (std::size_t x = 0; x <= trials; ++x) {
    const double n = static_cast<double>(trials);
    const double xd = static_cast<double>(x);
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(xd + 1.0) - std::lgamma(n - xd + 1.0);
    const double lp = p == 0.0 ? (x == 0 ? 0.0 : -INFINITY) : xd * std::log(p);
    const double lq = p == 1.0 ? (x == trials ? 0.0 : -INFINITY) : (n - xd) * std::log1p(-p);
    pmf[x] = std::exp(log_choose + lp + lq);
  }
  const double tail = (1.0 - coverage) / 2.0;
  CountBand band{0, trials};
  double below = 0.0;
  while (band.lo < trials && below + pmf[band.lo] <= tail) below += pmf[band.lo++];
  double above = 0.0;
  while (band.hi > band.lo && above + pmf[band.hi] <= tail) above += pmf[band.hi--];
  return band;
}

std::string format_report_text(const std::vector<RetrievalReport>& reports, std::uint64_t config_hash,
                               std::uint64_t seed) {
  std::string out;
  out += "config_hash=" + hash_hex(config_hash) + "\n";
  out += "seed=" + std::to_string(seed) + "\n";
  out += "protocol=one caption per audio\n";
  out += "reports=" + std::to_string(reports.size()) + "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const RetrievalReport& r = reports[i];
    const std::string p = "report." + std::to_string(i) + ".";
    out += p + "mode=" + to_string(r.mode) + "\n";
    out += p + "direction=" + to_string(r.direction) + "\n";
    out += p + "eval_size=" + std::to_string(r.eval_size) + "\n";
    for (const auto& [k, v] : r.r_at) out += p + "R@" + std::to_string(k) + "=" + format_double(v) + "\n";
  }
  return out;
}

// Report container:
//   "XREP" u32 version, u64 config_hash, u64 seed, u32 count,
//   per report: string mode, string direction, u32 eval_size, u64 seed,
//   u32 k count, per k: u32 k, f64 percentage
std::string encode_report(const std::vector<RetrievalReport>& reports, std::uint64_t config_hash,
                          std::uint64_t seed) {
  BinaryWriter w;
  w.raw("XREP");
  w.u32(kReportVersion);
  w.u64(config_hash);
  w.u64(seed);
  w.u32(static_cast<std::uint32_t>(reports.size()));
  for (const RetrievalReport& r : reports) {
    w.string(to_string(r.mode));
    w.string(to_string(r.direction));
    w.u32(static_cast<std::uint32_t>(r.eval_size));
    w.u64(r.seed);
    w.u32(static_cast<std::uint32_t>(r.r_at.size()));
    for (const auto& [k, v] : r.r_at) {
      w.u32(static_cast<std::uint32_t>(k));
      w.f64(v);
    }
  }
  return w.bytes();
}

DecodedReport decode_report(std::string_view bytes, const std::string& context) {
  BinaryReader r(bytes, context);
  if (bytes.size() < 4 || r.raw(4) != "XREP") throw SchemaError(context + ": not a report (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kReportVersion) {
    throw VersionError(context + ": report version " + std::to_string(version) + " is not supported");
  }
  DecodedReport out;
  out.config_hash = r.u64();
  out.seed = r.u64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    RetrievalReport rep;
    rep.mode = parse_mode(r.string());
    rep.direction = parse_retrieval_direction(r.string());
    rep.eval_size = r.u32();
    rep.seed = r.u64();
    const std::uint32_t nk = r.u32();
    for (std::uint32_t j = 0; j < nk; ++j) {
      const std::uint32_t k = r.u32();
      rep.r_at[k] = r.f64();
    }
    out.reports.push_back(std::move(rep));
  }
  r.expect_end();
  return out;
}

}  // namespace xmal
