// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Straight-loop test oracles in long double. They share only the Matrix
// container with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xmal/matrix.hpp"
#include "xmal/rng.hpp"

namespace xmal::oracle {

using Real = long double;
using Grid = std::vector<std::vector<Real>>;

inline Grid grid(const Matrix& m) {
  Grid g(m.rows(), std::vector<Real>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

inline Matrix matrix(const Grid& g) {
  Matrix m(g.size(), g.empty() ? 0 : g[0].size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = static_cast<double>(g[i][j]);
  return m;
}

inline Real norm(const std::vector<Real>& v) {
  Real s = 0;
  for (Real x : v) s += x * x;
  return std::sqrt(s);
}

inline Real cosine(const std::vector<Real>& a, const std::vector<Real>& b, Real eps = 1e-12L) {
  Real d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
  return d / (std::max(norm(a), eps) * std::max(norm(b), eps));
}

// Symmetric NT-Xent written exactly as the sum of row and column log-ratios.
inline Real nt_xent(const Matrix& s, Real tau) {
  const std::size_t b = s.rows();
  Real acc = 0;
  for (std::size_t i = 0; i < b; ++i) {
    Real row = 0;
    Real col = 0;
    for (std::size_t j = 0; j < b; ++j) {
      row += std::exp(s(i, j) / tau);
      col += std::exp(s(j, i) / tau);
    }
    const Real own = std::exp(s(i, i) / tau);
    acc += std::log(own / row) + std::log(own / col);
  }
  return -acc / static_cast<Real>(b);
}

// Clamp at zero, then scale each column to unit L2 norm.
inline Grid hinge_normalize(const Grid& s, Real eps = 1e-12L) {
  Grid out = s;
  const std::size_t rows = s.size();
  const std::size_t cols = rows ? s[0].size() : 0;
  for (std::size_t j = 0; j < cols; ++j) {
    Real sq = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      out[i][j] = s[i][j] > 0 ? s[i][j] : 0;
      sq += out[i][j] * out[i][j];
    }
    const Real d = std::max(std::sqrt(sq), eps);
    for (std::size_t i = 0; i < rows; ++i) out[i][j] /= d;
  }
  return out;
}

// Query rows aggregate context rows weighted by softmax(lambda * hinge-normalized cosine).
inline Grid attend(const Grid& q, const Grid& c, Real lambda, Real eps = 1e-12L) {
  Grid s(q.size(), std::vector<Real>(c.size()));
  for (std::size_t m = 0; m < q.size(); ++m)
    for (std::size_t n = 0; n < c.size(); ++n) s[m][n] = cosine(q[m], c[n], eps);
  const Grid sbar = hinge_normalize(s, eps);
  Grid out(q.size(), std::vector<Real>(c[0].size(), 0));
  for (std::size_t m = 0; m < q.size(); ++m) {
    Real z = 0;
    for (std::size_t n = 0; n < c.size(); ++n) z += std::exp(lambda * sbar[m][n]);
    for (std::size_t n = 0; n < c.size(); ++n) {
      const Real w = std::exp(lambda * sbar[m][n]) / z;
      for (std::size_t d = 0; d < c[n].size(); ++d) out[m][d] += w * c[n][d];
    }
  }
  return out;
}

inline Real block_similarity(const Grid& q, const Grid& fused, Real eps = 1e-12L) {
  Real total = 0;
  for (std::size_t m = 0; m < q.size(); ++m) total += cosine(q[m], fused[m], eps);
  return total;
}

// Per-level mean of the two attention directions, summed over levels.
inline Real s_tha(const std::vector<Grid>& audio_levels, const std::vector<Grid>& text_levels, Real lambda) {
  Real total = 0;
  for (std::size_t l = 0; l < audio_levels.size(); ++l) {
    const Real te = block_similarity(audio_levels[l], attend(audio_levels[l], text_levels[l], lambda));
    const Real ae = block_similarity(text_levels[l], attend(text_levels[l], audio_levels[l], lambda));
    total += (te + ae) / 2;
  }
  return total;
}

// Columnwise (x - mean) / sqrt(biased variance); zero where the variance vanishes.
inline Grid standardize(const Grid& e, Real eps = 1e-12L) {
  Grid out = e;
  const std::size_t b = e.size();
  for (std::size_t j = 0; j < e[0].size(); ++j) {
    Real mean = 0;
    for (std::size_t i = 0; i < b; ++i) mean += e[i][j];
    mean /= static_cast<Real>(b);
    Real var = 0;
    for (std::size_t i = 0; i < b; ++i) var += (e[i][j] - mean) * (e[i][j] - mean);
    var /= static_cast<Real>(b);
    const Real inv = var > eps ? 1 / std::sqrt(var) : 0;
    for (std::size_t i = 0; i < b; ++i) out[i][j] = (e[i][j] - mean) * inv;
  }
  return out;
}

// C(i, j) = sum over batch and factor coordinates of z_text[i] * z_audio[j] / (B d).
inline Grid covariance(const std::vector<Grid>& z_text, const std::vector<Grid>& z_audio) {
  const std::size_t k = z_text.size();
  const std::size_t b = z_text[0].size();
  const std::size_t d = z_text[0][0].size();
  Grid c(k, std::vector<Real>(k, 0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      Real acc = 0;
      for (std::size_t r = 0; r < b; ++r)
        for (std::size_t t = 0; t < d; ++t) acc += z_text[i][r][t] * z_audio[j][r][t];
      c[i][j] = acc / static_cast<Real>(b * d);
    }
  return c;
}

// Rank (0-based) of the true match of each query. A competitor outranks the
// match when it scores higher, or ties and has a smaller index.
inline std::vector<std::size_t> ranks(const Matrix& s, bool rows_are_queries) {
  const std::size_t n = s.rows();
  std::vector<std::size_t> out(n, 0);
  for (std::size_t q = 0; q < n; ++q) {
    auto score = [&](std::size_t cand) { return rows_are_queries ? s(q, cand) : s(cand, q); };
    const double own = score(q);
    for (std::size_t c = 0; c < n; ++c) {
      if (c == q) continue;
      if (score(c) > own || (score(c) == own && c < q)) ++out[q];
    }
  }
  return out;
}

inline double recall(const Matrix& s, std::size_t k, bool rows_are_queries) {
  std::size_t hits = 0;
  for (std::size_t r : ranks(s, rows_are_queries)) hits += r < k ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(s.rows());
}

// Hand-stepped Adam with bias-corrected moments on one scalar.
struct ScalarAdam {
  Real lr, b1, b2, eps;
  Real m = 0, v = 0;
  int t = 0;
  Real step(Real x, Real g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const Real mhat = m / (1 - std::pow(b1, t));
    const Real vhat = v / (1 - std::pow(b2, t));
    return x - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(fnv1a64(tag) ^ static_cast<std::uint64_t>(std::filesystem::file_time_type::clock::now()
                                                          .time_since_epoch()
                                                          .count()));
    path_ = std::filesystem::temp_directory_path() / ("xmal_" + tag + "_" + std::to_string(rng.next_u64()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace xmal::oracle
