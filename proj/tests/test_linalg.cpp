#include <doctest.h>

#include <cmath>
#include <limits>

#include "cocl/error.hpp"
#include "cocl/linalg.hpp"
#include "oracles.hpp"

using namespace cocl;

TEST_CASE("matmul hand example") {
  const auto a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  const auto b = DenseMatrix::from_rows({{5}, {6}});
  CHECK(matmul(a, b) == DenseMatrix::from_rows({{17}, {39}}));
}

TEST_CASE("matmul identity and zero") {
  const auto m = oracle::gaussian_matrix(3, 4, 1);
  CHECK(matmul(DenseMatrix::identity(3), m) == m);
  CHECK(matmul(DenseMatrix(2, 3), oracle::gaussian_matrix(3, 4, 2)) == DenseMatrix(2, 4));
}

TEST_CASE("matmul and matvec agree with Eigen") {
  const auto a = oracle::gaussian_matrix(7, 5, 3);
  const auto b = oracle::gaussian_matrix(5, 9, 4);
  const auto x = oracle::gaussian_vector(5, 5);
  const Eigen::MatrixXd ab = oracle::to_eigen(a) * oracle::to_eigen(b);
  CHECK(frobenius_norm(matmul(a, b) - oracle::from_eigen(ab)) <= 1e-12 * ab.norm());
  const Eigen::VectorXd ax = oracle::to_eigen(a) * oracle::to_eigen(x);
  CHECK(norm(matvec(a, x) - oracle::from_eigen(ax)) <= 1e-12 * ax.norm());
}

TEST_CASE("dimension mismatches throw") {
  CHECK_THROWS_AS(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), DimensionError);
  CHECK_THROWS_AS(matvec(DenseMatrix(2, 3), DenseVector(2)), DimensionError);
  CHECK_THROWS_AS(DenseVector(3) + DenseVector(4), DimensionError);
  CHECK_THROWS_AS(min_norm_solve(DenseMatrix(2, 3), DenseVector(3)), DimensionError);
  CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST_CASE("non-finite entries are rejected at construction") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(DenseVector(std::vector<double>{1.0, nan}), NumericalError);
  CHECK_THROWS_AS(DenseMatrix(1, 2, std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}),
                  NumericalError);
}

TEST_CASE("vector helpers") {
  const DenseVector v{3, -4};
  CHECK(norm(v) == 5.0);
  CHECK(squared_norm(v) == 25.0);
  CHECK(max_abs(v) == 4.0);
  CHECK(dot(v, DenseVector{1, 1}) == -1.0);
  CHECK(v.segment(1, 1) == DenseVector{-4});
  DenseVector w(4);
  w.set_segment(2, v);
  CHECK(w == DenseVector{0, 0, 3, -4});
  CHECK_THROWS_AS(w.segment(3, 2), DimensionError);
}

TEST_CASE("stacking") {
  const auto a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  const auto b = DenseMatrix::from_rows({{5}, {6}});
  const std::vector<DenseMatrix> side{a, b};
  CHECK(hstack(side) == DenseMatrix::from_rows({{1, 2, 5}, {3, 4, 6}}));
  const std::vector<DenseMatrix> rows{a, DenseMatrix::from_rows({{7, 8}})};
  CHECK(vstack(rows) == DenseMatrix::from_rows({{1, 2}, {3, 4}, {7, 8}}));
  const std::vector<DenseVector> parts{DenseVector{1}, DenseVector{2, 3}};
  CHECK(concat(parts) == DenseVector{1, 2, 3});
  CHECK(a.column_range(1, 1) == DenseMatrix::from_rows({{2}, {4}}));
  CHECK(a.transpose() == DenseMatrix::from_rows({{1, 3}, {2, 4}}));
}

TEST_CASE("pinv of identity and zero") {
  CHECK(frobenius_norm(pinv(DenseMatrix::identity(5)) - DenseMatrix::identity(5)) <= 1e-15);
  const auto z = pinv(DenseMatrix(3, 7));
  CHECK(z.rows() == 7);
  CHECK(z.cols() == 3);
  CHECK(z == DenseMatrix(7, 3));
  CHECK(pinv_with_rank(DenseMatrix(3, 7)).rank == 0);
}

TEST_CASE("pinv of a broad Gaussian is a right inverse") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = oracle::gaussian_matrix(2, 5, seed);
    CHECK(frobenius_norm(matmul(m, pinv(m)) - DenseMatrix::identity(2)) <= 1e-10);
  }
}

TEST_CASE("Penrose conditions on random shapes") {
  struct Shape {
    std::size_t rows, cols;
  };
  for (const auto s : {Shape{2, 5}, Shape{5, 2}, Shape{4, 4}, Shape{16, 10}, Shape{10, 64}}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto m = oracle::gaussian_matrix(s.rows, s.cols, seed);
      const auto mp = pinv(m);
      CHECK(frobenius_norm(matmul(matmul(m, mp), m) - m) <= 1e-9 * frobenius_norm(m));
      CHECK(frobenius_norm(matmul(matmul(mp, m), mp) - mp) <= 1e-9 * frobenius_norm(mp));
      const auto mmp = matmul(m, mp);
      const auto pm = matmul(mp, m);
      CHECK(frobenius_norm(mmp - mmp.transpose()) <= 1e-9);
      CHECK(frobenius_norm(pm - pm.transpose()) <= 1e-9);
    }
  }
}

TEST_CASE("rank deficient pinv matches the COD oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = matmul(oracle::gaussian_matrix(3, 2, seed), oracle::gaussian_matrix(2, 3, seed + 50));
    const auto got = pinv_with_rank(m);
    CHECK(got.rank == 2);
    const auto expected = oracle::from_eigen(oracle::cod_pinv(oracle::to_eigen(m)));
    CHECK(frobenius_norm(got.matrix - expected) <= 1e-9 * frobenius_norm(expected));
  }
}

TEST_CASE("min_norm_solve examples") {
  const auto y = oracle::gaussian_vector(4, 9);
  CHECK(max_abs(min_norm_solve(DenseMatrix::identity(4), y) - y) <= 1e-15);

  const auto x = min_norm_solve(DenseMatrix::from_rows({{1, 1}}), DenseVector{2});
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("min_norm_solve on consistent broad systems") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = oracle::gaussian_matrix(3, 8, seed);
    const auto x0 = oracle::gaussian_vector(8, seed);
    const auto y = matvec(a, x0);
    const auto x = min_norm_solve(a, y);
    CHECK(norm(matvec(a, x) - y) <= 1e-10 * std::max(1.0, norm(y)));
    CHECK(norm(x) <= norm(x0) * (1 + 1e-12));
    CHECK(oracle::elementwise_rel(oracle::min_norm(a, y), x) <= 1e-10);
    CHECK(oracle::elementwise_rel(matvec(pinv(a), y), x) <= 1e-12);
  }
}

TEST_CASE("min_norm_solve on tall systems gives least squares") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = oracle::gaussian_matrix(12, 4, seed);
    const auto y = oracle::gaussian_vector(12, seed + 1);
    const auto x = min_norm_solve(a, y);
    CHECK(oracle::elementwise_rel(oracle::min_norm(a, y), x) <= 1e-10);
    // Normal equations: A^T (A x - y) = 0.
    CHECK(norm(matvec(a.transpose(), matvec(a, x) - y)) <= 1e-10 * norm(y));
  }
}

TEST_CASE("kernels are bit-reproducible") {
  const auto a = oracle::gaussian_matrix(10, 64, 4);
  const auto y = oracle::gaussian_vector(10, 4);
  CHECK(pinv(a) == pinv(a));
  CHECK(min_norm_solve(a, y) == min_norm_solve(a, y));
  CHECK(matvec(a.transpose(), y) == matvec(a.transpose(), y));
}
