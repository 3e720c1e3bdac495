#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "nmtune/error.hpp"
#include "nmtune/matrix.hpp"
#include "nmtune/svd.hpp"
#include "oracles.hpp"

using nmtune::Matrix;

namespace {

void expect_orthonormal_columns(const Matrix& q, double tol) {
  const Matrix g = nmtune::matmul_at(q, q);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      EXPECT_NEAR(g(i, j), i == j ? 1.0 : 0.0, tol) << "at (" << i << "," << j << ")";
}

Matrix reconstruct(const nmtune::SvdResult& r) {
  Matrix us = r.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= r.sigma[j];
  return nmtune::matmul(us, r.vt);
}

}  // namespace

// ---- svd ----

TEST(Svd, DiagonalIsSorted) {
  const auto r = nmtune::svd(Matrix{{3, 0}, {0, 4}});
  ASSERT_EQ(r.sigma.size(), 2u);
  EXPECT_DOUBLE_EQ(r.sigma[0], 4.0);
  EXPECT_DOUBLE_EQ(r.sigma[1], 3.0);
}

TEST(Svd, RankOneSymmetric) {
  const auto r = nmtune::svd(Matrix{{1, 1}, {1, 1}});
  EXPECT_NEAR(r.sigma[0], 2.0, 1e-14);
  EXPECT_EQ(r.sigma[1], 0.0);  // clamped
  EXPECT_EQ(r.rank(), 1u);
}

TEST(Svd, Random6x4MatchesGramEigenvalues) {
  const Matrix f = oracle::random_matrix(6, 4, 7);
  const auto r = nmtune::svd(f);
  const auto ref = oracle::singular_values_via_gram(f);
  ASSERT_EQ(r.sigma.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    EXPECT_NEAR(r.sigma[i], ref[i], 1e-8 * ref[i]) << "sigma_" << i;
}

TEST(Svd, InvariantsOnTallWideAndSquare) {
  const std::pair<std::size_t, std::size_t> shapes[] = {{16, 12}, {12, 16}, {9, 9}, {1, 5}, {5, 1}};
  std::uint64_t seed = 100;
  for (auto [m, n] : shapes) {
    const Matrix f = oracle::random_matrix(m, n, seed++);
    const auto r = nmtune::svd(f);
    EXPECT_EQ(r.u.rows(), m);
    EXPECT_EQ(r.vt.cols(), n);
    EXPECT_TRUE(std::is_sorted(r.sigma.rbegin(), r.sigma.rend()));
    expect_orthonormal_columns(r.u, 1e-12);
    expect_orthonormal_columns(r.vt.transposed(), 1e-12);
    EXPECT_LT(nmtune::frobenius_norm(reconstruct(r) - f), 1e-12 * nmtune::frobenius_norm(f));
  }
}

TEST(Svd, RankDeficientStillOrthonormal) {
  // third column = first + second
  Matrix f = oracle::random_matrix(8, 3, 5);
  for (std::size_t i = 0; i < 8; ++i) f(i, 2) = f(i, 0) + f(i, 1);
  const auto r = nmtune::svd(f);
  EXPECT_EQ(r.sigma[2], 0.0);
  EXPECT_EQ(r.rank(), 2u);
  expect_orthonormal_columns(r.u, 1e-12);
  EXPECT_LT(nmtune::frobenius_norm(reconstruct(r) - f), 1e-12 * nmtune::frobenius_norm(f));
}

TEST(Svd, ZeroMatrixGivesZeroSpectrum) {
  const auto r = nmtune::svd(Matrix(4, 3));
  for (double s : r.sigma) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(r.rank(), 0u);
}

TEST(Svd, Deterministic) {
  const Matrix f = oracle::random_matrix(20, 7, 3);
  const auto a = nmtune::svd(f);
  const auto b = nmtune::svd(f);
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.vt, b.vt);
}

TEST(Svd, SingularValuesMatchFullDecomposition) {
  const Matrix f = oracle::random_matrix(30, 10, 8);
  const auto full = nmtune::svd(f).sigma;
  const auto only = nmtune::singular_values(f);
  for (std::size_t i = 0; i < full.size(); ++i) EXPECT_NEAR(only[i], full[i], 1e-12 * full[0]);
}

TEST(Svd, RejectsNonFinite) {
  Matrix f(2, 2, 1.0);
  f(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    nmtune::svd(f);
    FAIL() << "expected InvalidInput";
  } catch (const nmtune::Error& e) {
    EXPECT_EQ(e.kind(), nmtune::ErrorKind::kInvalidInput);
  }
  EXPECT_THROW(nmtune::svd(Matrix()), nmtune::Error);
}

// ---- covariance / normalization ----

TEST(Covariance, HandComputed) {
  EXPECT_EQ(nmtune::covariance(Matrix{{1, 1}, {-1, -1}}), (Matrix{{2, 2}, {2, 2}}));
  EXPECT_EQ(nmtune::covariance(Matrix{{1, 1}, {-1, 1}}), (Matrix{{2, 0}, {0, 0}}));
}

TEST(Covariance, RepeatedRowIsZero) {
  Matrix z(5, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    z(i, 0) = 0.1;
    z(i, 1) = -7.3;
    z(i, 2) = 1e3;
  }
  const Matrix c = nmtune::covariance(z);
  for (double v : c.values()) EXPECT_EQ(v, 0.0);
}

TEST(Covariance, NeedsTwoRows) {
  EXPECT_THROW(nmtune::covariance(Matrix{{1, 2}}), nmtune::Error);
}

TEST(RowNormalize, Examples) {
  const Matrix n = nmtune::row_normalize(Matrix{{3, 4}, {0, 0}});
  EXPECT_DOUBLE_EQ(n(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(n(0, 1), 0.8);
  EXPECT_EQ(n(1, 0), 0.0);
  EXPECT_EQ(n(1, 1), 0.0);
}

TEST(RowNormalize, IdempotentOnRandomRows) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix once = nmtune::row_normalize(oracle::random_matrix(7, 5, seed, 3.0));
    EXPECT_EQ(nmtune::row_normalize(once), once) << "seed " << seed;
  }
}

// ---- products ----

TEST(Matmul, AgreesWithTripleLoop) {
  const Matrix a = oracle::random_matrix(9, 6, 1), b = oracle::random_matrix(6, 4, 2);
  const Matrix ref = oracle::naive_matmul(a, b);
  EXPECT_LT(nmtune::frobenius_norm(nmtune::matmul(a, b) - ref), 1e-12);
  EXPECT_LT(nmtune::frobenius_norm(nmtune::matmul_bt(a, b.transposed()) - ref), 1e-12);
  EXPECT_LT(nmtune::frobenius_norm(nmtune::matmul_at(a.transposed(), b) - ref), 1e-12);
}

TEST(Matmul, ShapeMismatchThrows) {
  try {
    nmtune::matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL();
  } catch (const nmtune::Error& e) {
    EXPECT_EQ(e.kind(), nmtune::ErrorKind::kShapeError);
  }
}
