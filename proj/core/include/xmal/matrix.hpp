// Copyright 2026 The xmal Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major 64-bit matrices and the plain (non-differentiable)
// kernels used by both the autodiff primitives and the evaluation path.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace xmal {

inline constexpr double kDefaultEps = 1e-12;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(std::span<const double> values);
  static Matrix column_vector(std::span<const double> values);
  static Matrix identity(std::size_t n);
  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  // Value of a 1x1 matrix.
  double item() const;
  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& other);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix hinge(const Matrix& m);

// exp(scale * x) normalized per row, with row-max subtraction.
Matrix row_softmax(const Matrix& m, double scale);

// Per-row log-softmax computed via log-sum-exp.
Matrix row_log_softmax(const Matrix& m);

// v / max(||v||_2, eps); applied to every row (or column).
Matrix normalize_rows(const Matrix& m, double eps = kDefaultEps);
Matrix normalize_columns(const Matrix& m, double eps = kDefaultEps);
std::vector<double> l2_normalize(std::span<const double> v, double eps = kDefaultEps);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
double cosine(std::span<const double> a, std::span<const double> b, double eps = kDefaultEps);

// Largest |a - b| over entries; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace xmal
