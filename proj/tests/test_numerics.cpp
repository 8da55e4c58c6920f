// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "stlstm/errors.hpp"
#include "stlstm/numerics.hpp"

using namespace stlstm;

TEST_SUITE("numerics") {

TEST_CASE("matvec on the identity and a small example") {
  CHECK(matvec(Matrix::identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
  const Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(matvec(m, Vector{1, 0, -1}) == Vector{-2, -2});
}

TEST_CASE("shape mismatches raise DimensionError") {
  CHECK_THROWS_AS(matvec(Matrix(2, 3), Vector(2)), DimensionError);
  CHECK_THROWS_AS(hadamard(Vector(2), Vector(3)), DimensionError);
  CHECK_THROWS_AS(add(Vector(1), Vector(2)), DimensionError);
  CHECK_THROWS_AS(axpy(1.0, Vector(1), Vector(2)), DimensionError);
  CHECK_THROWS_AS(dot(Vector(4), Vector(2)), DimensionError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST_CASE("sigmoid is overflow safe and symmetric") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  for (double x : {0.1, 1.0, 3.7, 20.0}) CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
  const Vector s = sigmoid(Vector{-1, 0, 1});
  CHECK(s[1] == 0.5);
  CHECK(s[0] == doctest::Approx(1.0 / (1.0 + std::exp(1.0))));
}

TEST_CASE("elementwise helpers") {
  CHECK(hadamard(Vector{1, 2}, Vector{3, 4}) == Vector{3, 8});
  CHECK(add(Vector{1, 2}, Vector{3, 4}) == Vector{4, 6});
  CHECK(scale(2.0, Vector{1, -2}) == Vector{2, -4});
  CHECK(axpy(2.0, Vector{1, 1}, Vector{0, 1}) == Vector{2, 3});
  CHECK(dot(Vector{1, 2, 3}, Vector{4, 5, 6}) == 32.0);
  CHECK(tanh(Vector{0.0})[0] == 0.0);
  CHECK(concat(Vector{1}, Vector{2, 3}) == Vector{1, 2, 3});
  CHECK(concat(Vector{}) == Vector{});
}

TEST_CASE("kernels agree with naive loops on odd shapes") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t rows : {1u, 3u, 4u, 7u, 13u}) {
    for (std::size_t cols : {1u, 2u, 5u, 9u}) {
      Matrix m(rows, cols);
      for (double& v : m.span()) v = u(rng);
      Vector x(cols), y(rows);
      for (double& v : x) v = u(rng);
      for (double& v : y) v = u(rng);

      Vector out(rows, 0.25);
      kernels::matvec_acc(m, x.span(), out.span());
      Vector back(cols, -0.5);
      kernels::matvec_t_acc(m, y.span(), back.span());
      Matrix acc = m;
      kernels::outer_acc(acc, y.span(), x.span());

      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.25;
        for (std::size_t c = 0; c < cols; ++c) s += m(r, c) * x[c];
        CHECK(out[r] == doctest::Approx(s).epsilon(1e-14));
        for (std::size_t c = 0; c < cols; ++c)
          CHECK(acc(r, c) == doctest::Approx(m(r, c) + y[r] * x[c]).epsilon(1e-15));
      }
      for (std::size_t c = 0; c < cols; ++c) {
        double s = -0.5;
        for (std::size_t r = 0; r < rows; ++r) s += m(r, c) * y[r];
        CHECK(back[c] == doctest::Approx(s).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("matrix storage is row major") {
  Matrix m(2, 3);
  m(1, 0) = 7.0;
  CHECK(m.span()[3] == 7.0);
  CHECK(m.row(1)[0] == 7.0);
  CHECK(m.shape() == "2x3");
}

}
