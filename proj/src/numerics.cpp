// SPDX-License-Identifier: Apache-2.0
#include "stlstm/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "stlstm/errors.hpp"

namespace stlstm {

namespace {

void require_same_len(const Vector& a, const Vector& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
}

}  // namespace

void Vector::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Matrix: " + std::to_string(data_.size()) + " values for shape " +
                         shape());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Matrix::shape() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) {
    throw DimensionError("matvec: matrix " + m.shape() + " cannot multiply vector of length " +
                         std::to_string(v.size()));
  }
  Vector out(m.rows());
  kernels::matvec_acc(m, v.span(), out.span());
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_len(a, b, "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double sigmoid(double x) noexcept {
  // Split on sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vector tanh(const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

Vector add(const Vector& a, const Vector& b) {
  require_same_len(a, b, "add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector scale(double alpha, const Vector& v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = alpha * v[i];
  return out;
}

Vector axpy(double alpha, const Vector& x, const Vector& y) {
  require_same_len(x, y, "axpy");
  Vector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = alpha * x[i] + y[i];
  return out;
}

Vector concat(std::initializer_list<const Vector*> parts) {
  std::vector<double> out;
  for (const Vector* p : parts) out.insert(out.end(), p->begin(), p->end());
  return Vector(std::move(out));
}

Vector concat(std::span<const Vector> parts) {
  std::vector<double> out;
  for (const Vector& p : parts) out.insert(out.end(), p.begin(), p.end());
  return Vector(std::move(out));
}

double dot(const Vector& a, const Vector& b) {
  require_same_len(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace kernels {

void matvec_acc(const Matrix& m, std::span<const double> v, std::span<double> out) noexcept {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  const double* __restrict x = v.data();
  std::size_t r = 0;
  // Four rows per pass share each load of x.
  for (; r + 4 <= rows; r += 4) {
    const double* r0 = m.data() + r * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
    for (std::size_t c = 0; c < cols; ++c) {
      s0 += r0[c] * x[c];
      s1 += r1[c] * x[c];
      s2 += r2[c] * x[c];
      s3 += r3[c] * x[c];
    }
    out[r] += s0;
    out[r + 1] += s1;
    out[r + 2] += s2;
    out[r + 3] += s3;
  }
  for (; r < rows; ++r) {
    const double* row = m.data() + r * cols;
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
    out[r] += s;
  }
}

void matvec_t_acc(const Matrix& m, std::span<const double> v, std::span<double> out) noexcept {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  double* __restrict dst = out.data();
  std::size_t r = 0;
  // Four rows per pass so each element of out is loaded and stored once.
  for (; r + 4 <= rows; r += 4) {
    const double* r0 = m.data() + r * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    const double v0 = v[r], v1 = v[r + 1], v2 = v[r + 2], v3 = v[r + 3];
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] += r0[c] * v0 + r1[c] * v1 + r2[c] * v2 + r3[c] * v3;
    }
  }
  for (; r < rows; ++r) {
    const double* row = m.data() + r * cols;
    const double vr = v[r];
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) dst[c] += row[c] * vr;
  }
}

void outer_acc(Matrix& m, std::span<const double> a, std::span<const double> b) noexcept {
  const std::size_t cols = m.cols();
  double* row = m.data();
  for (std::size_t r = 0; r < m.rows(); ++r, row += cols) {
    const double ar = a[r];
    const double* __restrict src = b.data();
#pragma omp simd
    for (std::size_t c = 0; c < cols; ++c) row[c] += ar * src[c];
  }
}

}  // namespace kernels

}  // namespace stlstm
