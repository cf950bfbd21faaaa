// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmal/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "xmal/errors.hpp"

namespace xmal {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged initializer for matrix");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column_vector(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double Matrix::item() const {
  if (rows_ != 1 || cols_ != 1) {
    throw ContractError("item() requires a 1x1 matrix, got " + shape_string(*this));
  }
  return data_[0];
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other)) {
    throw DimensionError("cannot accumulate " + shape_string(other) + " into " +
                         shape_string(*this));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a) + " * " + shape_string(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix hinge(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix row_softmax(const Matrix& m, double scale) {
  if (!(scale > 0.0)) throw ContractError("row_softmax scale must be > 0");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(scale * (in[j] - mx));
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

Matrix row_log_softmax(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (double v : in) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < in.size(); ++j) o[j] = in[j] - lse;
  }
  return out;
}

Matrix normalize_rows(const Matrix& m, double eps) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    const double denom = std::max(l2_norm(r), eps);
    for (double& v : r) v /= denom;
  }
  return out;
}

Matrix normalize_columns(const Matrix& m, double eps) {
  Matrix out = m;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) sq += m(i, j) * m(i, j);
    const double denom = std::max(std::sqrt(sq), eps);
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) /= denom;
  }
  return out;
}

std::vector<double> l2_normalize(std::span<const double> v, double eps) {
  const double denom = std::max(l2_norm(v), eps);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= denom;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot length mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const double> a, std::span<const double> b, double eps) {
  return dot(a, b) / (std::max(l2_norm(a), eps) * std::max(l2_norm(b), eps));
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff shape mismatch: " + shape_string(a) + " vs " +
                         shape_string(b));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace xmal
