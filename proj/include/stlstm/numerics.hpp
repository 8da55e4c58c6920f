// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace stlstm {

/// Dense vector of doubles.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  [[nodiscard]] double* data() noexcept { return data_.data(); }
  [[nodiscard]] const double* data() const noexcept { return data_.data(); }
  [[nodiscard]] std::span<double> span() noexcept { return data_; }
  [[nodiscard]] std::span<const double> span() const noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  void fill(double v);

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Throws DimensionError unless values.size() == rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] double* data() noexcept { return data_.data(); }
  [[nodiscard]] const double* data() const noexcept { return data_.data(); }
  [[nodiscard]] std::span<double> span() noexcept { return data_; }
  [[nodiscard]] std::span<const double> span() const noexcept { return data_; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  void fill(double v);

  [[nodiscard]] std::string shape() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Value-returning kernels. All throw DimensionError on shape mismatch.
Vector matvec(const Matrix& m, const Vector& v);
Vector hadamard(const Vector& a, const Vector& b);
Vector sigmoid(const Vector& v);
Vector tanh(const Vector& v);
Vector add(const Vector& a, const Vector& b);
Vector scale(double alpha, const Vector& v);
/// alpha * x + y
Vector axpy(double alpha, const Vector& x, const Vector& y);
Vector concat(std::initializer_list<const Vector*> parts);
Vector concat(std::span<const Vector> parts);
double dot(const Vector& a, const Vector& b);

inline Vector concat(const Vector& a) { return concat({&a}); }
inline Vector concat(const Vector& a, const Vector& b) { return concat({&a, &b}); }

double sigmoid(double x) noexcept;

// Accumulating kernels used on the hot forward/backward paths.
// Shapes are checked by the callers that own the buffers.
namespace kernels {

/// out += m * v
void matvec_acc(const Matrix& m, std::span<const double> v, std::span<double> out) noexcept;
/// out += m^T * v
void matvec_t_acc(const Matrix& m, std::span<const double> v, std::span<double> out) noexcept;
/// m += a * b^T
void outer_acc(Matrix& m, std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace kernels

}  // namespace stlstm
