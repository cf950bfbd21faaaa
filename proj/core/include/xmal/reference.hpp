// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Straight-loop reimplementation of the full forward pass (encoders, THA,
// DCR factors, confidence network, NT-Xent, covariance losses), independent
// of the tape and templated on the scalar type. Instantiated with long
// double it is the numeric side of full-loss gradient checks: double
// rounding of an O(10) loss swamps central differences of gradients near
// 1e-6 at h = 1e-5.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xmal/autodiff.hpp"
#include "xmal/data.hpp"
#include "xmal/gradcheck.hpp"
#include "xmal/model.hpp"
#include "xmal/objective.hpp"

namespace xmal {

template <typename T>
struct RefMat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> v;

  RefMat() = default;
  RefMat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, T(0)) {}
  T& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  T operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

template <typename T>
RefMat<T> to_ref(const Matrix& m) {
  RefMat<T> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.v[i] = static_cast<T>(m[i]);
  return out;
}

template <typename T>
struct RefLosses {
  T l_s = 0;
  T l_d = 0;
  T l_a = 0;
  T total = 0;
  RefMat<T> similarity;
  RefMat<T> covariance;
};

template <typename T>
class ReferenceModel;

// Probe over L_S, L_D, L_A, L for a fixed batch; each probe offsets one
// entry, evaluates, then restores the exact original value.
template <typename T>
Prober reference_prober(ReferenceModel<T>& ref, const std::vector<PairItem>& items) {
  return [&ref, &items](const std::string& name, std::size_t index, long double delta) {
    Probe p;
    RefLosses<T> l;
    if (name.empty()) {
      l = ref.losses(items);
    } else {
      T& x = ref.entry(name, index);
      const T saved = x;
      x = saved + static_cast<T>(delta);
      l = ref.losses(items);
      x = saved;
    }
    p.values = {static_cast<long double>(l.l_s), static_cast<long double>(l.l_d), static_cast<long double>(l.l_a),
                static_cast<long double>(l.total)};
    p.signature = ref.signature();
    return p;
  };
}

template <typename T>
class ReferenceModel {
 public:
  ReferenceModel(const ad::ParameterStore& params, const ModelConfig& model, const ObjectiveConfig& objective)
      : model_(model), objective_(objective) {
    for (const auto& [name, m] : params) params_[name] = to_ref<T>(m);
  }

  T& entry(const std::string& name, std::size_t index) { return params_.at(name).v.at(index); }

  std::uint64_t signature() const { return signature_; }

  struct Blocks {
    std::array<RefMat<T>, 3> levels;
    std::vector<T> global;
  };

  Blocks encode_text(const Matrix& tokens) {
    RefMat<T> x = to_ref<T>(tokens);
    Blocks out;
    const std::size_t taps[3] = {4, 10, 12};
    std::size_t tap = 0;
    for (std::size_t b = 1; b <= 12; ++b) {
      x = block("text", b, x);
      if (tap < 3 && b == taps[tap]) out.levels[tap++] = x;
    }
    const RefMat<T>& w = params_.at("text.readout");
    std::vector<T> score(x.rows);
    for (std::size_t n = 0; n < x.rows; ++n) {
      T s = 0;
      for (std::size_t c = 0; c < x.cols; ++c) s += x(n, c) * w(c, 0);
      score[n] = s;
    }
    const T mx = *std::max_element(score.begin(), score.end());
    T z = 0;
    for (T& s : score) z += (s = std::exp(s - mx));
    out.global.assign(x.cols, T(0));
    for (std::size_t n = 0; n < x.rows; ++n)
      for (std::size_t c = 0; c < x.cols; ++c) out.global[c] += score[n] / z * x(n, c);
    return out;
  }

  Blocks encode_audio(const Matrix& frames) {
    RefMat<T> x = to_ref<T>(frames);
    Blocks out;
    const std::size_t stages[4] = {2, 2, 6, 2};
    std::size_t b = 1;
    for (std::size_t s = 0; s < 4; ++s) {
      if (s > 0) {
        RefMat<T> merged((x.rows + 1) / 2, x.cols);
        for (std::size_t r = 0; r < merged.rows; ++r)
          for (std::size_t c = 0; c < x.cols; ++c) {
            merged(r, c) = 2 * r + 1 < x.rows ? (x(2 * r, c) + x(2 * r + 1, c)) / 2 : x(2 * r, c);
          }
        x = matmul(merged, params_.at("audio.merge0" + std::to_string(s)));
      }
      for (std::size_t i = 0; i < stages[s]; ++i) x = block("audio", b++, x);
      if (s > 0) out.levels[s - 1] = x;
    }
    out.global.assign(x.cols, T(0));
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t c = 0; c < x.cols; ++c) out.global[c] += x(r, c) / static_cast<T>(x.rows);
    return out;
  }

  // Sum over query rows of cos(q_m, fused_m).
  T directional(const RefMat<T>& q, const RefMat<T>& ctx) {
    const std::size_t m_count = q.rows;
    const std::size_t n_count = ctx.rows;
    RefMat<T> s(m_count, n_count);
    for (std::size_t m = 0; m < m_count; ++m)
      for (std::size_t n = 0; n < n_count; ++n) s(m, n) = cosine(row(q, m), row(ctx, n));
    for (T& x : s.v) {
      note(x > 0);
      x = x > 0 ? x : T(0);
    }
    for (std::size_t n = 0; n < n_count; ++n) {
      T sq = 0;
      for (std::size_t m = 0; m < m_count; ++m) sq += s(m, n) * s(m, n);
      const T norm = std::sqrt(sq);
      note(norm > att_eps());
      const T d = norm > att_eps() ? norm : att_eps();
      for (std::size_t m = 0; m < m_count; ++m) s(m, n) /= d;
    }
    T total = 0;
    for (std::size_t m = 0; m < m_count; ++m) {
      T mx = s(m, 0);
      for (std::size_t n = 1; n < n_count; ++n) mx = std::max(mx, s(m, n));
      std::vector<T> w(n_count);
      T z = 0;
      for (std::size_t n = 0; n < n_count; ++n) z += (w[n] = std::exp(lambda() * (s(m, n) - mx)));
      std::vector<T> fused(ctx.cols, T(0));
      for (std::size_t n = 0; n < n_count; ++n)
        for (std::size_t c = 0; c < ctx.cols; ++c) fused[c] += w[n] / z * ctx(n, c);
      total += cosine(row(q, m), fused, eps(), att_eps());
    }
    return total;
  }

  T s_tha(const Blocks& audio, const Blocks& text) {
    T total = 0;
    for (std::size_t l = 0; l < 3; ++l) {
      const AttentionConfig& a = model_.attention;
      T level = 0;
      if (a.direction == Direction::text_enhanced) {
        level = directional(audio.levels[l], text.levels[l]);
      } else if (a.direction == Direction::audio_enhanced) {
        level = directional(text.levels[l], audio.levels[l]);
      } else {
        level = directional(audio.levels[l], text.levels[l]) + directional(text.levels[l], audio.levels[l]);
        if (a.combine == DirectionCombine::mean) level /= 2;
      }
      total += level;
    }
    return total;
  }

  // K factors of width D/K: e_k = W_k g.
  std::vector<std::vector<T>> factors(const std::vector<T>& g, const char* modality) {
    const std::size_t k_count = model_.factors;
    std::vector<std::vector<T>> out(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      const RefMat<T>& w = params_.at(factor_name(modality, k));
      out[k].assign(w.rows, T(0));
      for (std::size_t i = 0; i < w.rows; ++i)
        for (std::size_t j = 0; j < w.cols; ++j) out[k][i] += w(i, j) * g[j];
    }
    return out;
  }

  T confidence(const std::vector<T>& e_text, const std::vector<T>& e_audio) {
    const RefMat<T>& w1 = params_.at("ca.w1");
    const RefMat<T>& b1 = params_.at("ca.b1");
    const RefMat<T>& w2 = params_.at("ca.w2");
    const RefMat<T>& b2 = params_.at("ca.b2");
    std::vector<T> x(e_text);
    x.insert(x.end(), e_audio.begin(), e_audio.end());
    T z = b2(0, 0);
    for (std::size_t h = 0; h < w1.cols; ++h) {
      T a = b1(0, h);
      for (std::size_t i = 0; i < x.size(); ++i) a += x[i] * w1(i, h);
      note(a > 0);
      if (a > 0) z += a * w2(h, 0);
    }
    if (model_.squash == Squash::none) return z;
    return 1 / (1 + std::exp(-z));
  }

  T s_dcr(const std::vector<std::vector<T>>& text_factors, const std::vector<std::vector<T>>& audio_factors) {
    T total = 0;
    for (std::size_t k = 0; k < text_factors.size(); ++k) {
      total += confidence(text_factors[k], audio_factors[k]) * cosine(audio_factors[k], text_factors[k]);
    }
    return total;
  }

  T s_dp(const std::vector<T>& a, const std::vector<T>& t) { return cosine(a, t); }

  RefLosses<T> losses(const std::vector<PairItem>& items) {
    signature_ = 0xcbf29ce484222325ULL;
    const std::size_t batch = items.size();
    std::vector<Blocks> audio;
    std::vector<Blocks> text;
    std::vector<std::vector<std::vector<T>>> fa;
    std::vector<std::vector<std::vector<T>>> ft;
    for (const PairItem& item : items) {
      audio.push_back(encode_audio(item.audio));
      text.push_back(encode_text(item.text));
      fa.push_back(factors(audio.back().global, "audio"));
      ft.push_back(factors(text.back().global, "text"));
    }
    const SimilarityMode mode = objective_.mode;
    RefLosses<T> out;
    out.similarity = RefMat<T>(batch, batch);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < batch; ++j) {
        T s = 0;
        if (uses_tha(mode)) s += s_tha(audio[i], text[j]);
        if (uses_dp(mode)) s += s_dp(audio[i].global, text[j].global);
        if (uses_dcr(mode)) s += s_dcr(ft[j], fa[i]);
        out.similarity(i, j) = s;
      }
    out.l_s = nt_xent(out.similarity, static_cast<T>(objective_.tau));
    if (batch >= 2) {
      out.covariance = covariance(ft, fa);
      const std::size_t k_count = out.covariance.rows;
      for (std::size_t i = 0; i < k_count; ++i)
        for (std::size_t j = 0; j < k_count; ++j) {
          if (i == j) {
            out.l_a += (1 - out.covariance(i, i)) * (1 - out.covariance(i, i));
          } else {
            out.l_d += out.covariance(i, j) * out.covariance(i, j);
          }
        }
    }
    out.total = out.l_s + static_cast<T>(objective_.alpha) * out.l_d + static_cast<T>(objective_.beta) * out.l_a;
    return out;
  }

  static T nt_xent(const RefMat<T>& s, T tau) {
    const std::size_t b = s.rows;
    T acc = 0;
    for (std::size_t i = 0; i < b; ++i) {
      T mr = s(i, 0) / tau;
      T mc = s(0, i) / tau;
      for (std::size_t j = 1; j < b; ++j) {
        mr = std::max(mr, s(i, j) / tau);
        mc = std::max(mc, s(j, i) / tau);
      }
      T zr = 0;
      T zc = 0;
      for (std::size_t j = 0; j < b; ++j) {
        zr += std::exp(s(i, j) / tau - mr);
        zc += std::exp(s(j, i) / tau - mc);
      }
      acc += (s(i, i) / tau - mr - std::log(zr)) + (s(i, i) / tau - mc - std::log(zc));
    }
    return -acc / static_cast<T>(b);
  }

 private:
  T eps() const { return static_cast<T>(model_.eps); }
  T att_eps() const { return static_cast<T>(model_.attention.eps); }
  T lambda() const { return static_cast<T>(model_.attention.lambda); }

  void note(bool taken) {
    signature_ = (signature_ ^ (taken ? 0x9e3779b97f4a7c15ULL : 0x632be59bd9b4e019ULL)) * 0x100000001b3ULL;
  }

  static std::string factor_name(const char* modality, std::size_t k) {
    return std::string("dcr.") + modality + ".factor" + (k < 10 ? "0" : "") + std::to_string(k);
  }

  static std::vector<T> row(const RefMat<T>& m, std::size_t r) {
    return std::vector<T>(m.v.begin() + static_cast<std::ptrdiff_t>(r * m.cols),
                          m.v.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols));
  }

  static RefMat<T> matmul(const RefMat<T>& a, const RefMat<T>& b) {
    RefMat<T> out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t k = 0; k < a.cols; ++k)
        for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += a(i, k) * b(k, j);
    return out;
  }

  T cosine(const std::vector<T>& a, const std::vector<T>& b) { return cosine(a, b, eps(), eps()); }

  T cosine(const std::vector<T>& a, const std::vector<T>& b, T eps_a, T eps_b) {
    T dot = 0;
    T na = 0;
    T nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    note(na > eps_a);
    note(nb > eps_b);
    return dot / ((na > eps_a ? na : eps_a) * (nb > eps_b ? nb : eps_b));
  }

  RefMat<T> block(const char* modality, std::size_t b, const RefMat<T>& x) {
    const std::string id = std::string(modality) + ".block" + (b < 10 ? "0" : "") + std::to_string(b);
    const RefMat<T>& w = params_.at(id + ".weight");
    const RefMat<T>& bias = params_.at(id + ".bias");
    RefMat<T> pre = matmul(x, w);
    RefMat<T> out = x;
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t c = 0; c < x.cols; ++c) {
        const T a = pre(r, c) + bias(0, c);
        note(a > 0);
        if (a > 0) out(r, c) += a;
      }
    return out;
  }

  // Biased per-dimension standardization over the batch, then
  // C[i][j] = sum_b <z_i^text[b], z_j^audio[b]> / (B * D/K).
  RefMat<T> covariance(const std::vector<std::vector<std::vector<T>>>& ft,
                       const std::vector<std::vector<std::vector<T>>>& fa) {
    const std::size_t batch = ft.size();
    const std::size_t k_count = ft[0].size();
    const std::size_t width = ft[0][0].size();
    auto standardize = [&](std::vector<std::vector<std::vector<T>>> f) {
      for (std::size_t k = 0; k < k_count; ++k)
        for (std::size_t c = 0; c < width; ++c) {
          T mean = 0;
          for (std::size_t b = 0; b < batch; ++b) mean += f[b][k][c];
          mean /= static_cast<T>(batch);
          T var = 0;
          for (std::size_t b = 0; b < batch; ++b) var += (f[b][k][c] - mean) * (f[b][k][c] - mean);
          var /= static_cast<T>(batch);
          note(var > eps());
          const T inv = var > eps() ? 1 / std::sqrt(var) : T(0);
          for (std::size_t b = 0; b < batch; ++b) f[b][k][c] = (f[b][k][c] - mean) * inv;
        }
      return f;
    };
    const auto zt = standardize(ft);
    const auto za = standardize(fa);
    RefMat<T> c(k_count, k_count);
    for (std::size_t i = 0; i < k_count; ++i)
      for (std::size_t j = 0; j < k_count; ++j) {
        T acc = 0;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t d = 0; d < width; ++d) acc += zt[b][i][d] * za[b][j][d];
        c(i, j) = acc / static_cast<T>(batch * width);
      }
    return c;
  }

  ModelConfig model_;
  ObjectiveConfig objective_;
  std::map<std::string, RefMat<T>> params_;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

}  // namespace xmal
