#include <gtest/gtest.h>

#include <limits>
#include <numeric>

#include "darol/rng.hpp"
#include "darol/svd.hpp"
#include "oracles.hpp"

using namespace darol;
using namespace darol::numerics;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Matrix m(r, c);
  rng::Stream s = rng::substream(seed, 0);
  for (double& v : m.data) v = s.next_gaussian();
  return m;
}

Matrix gram_rowwise(const Matrix& m) {
  return matmul(m, transpose(m));
}

}  // namespace

TEST(Svd, Identity2x2) {
  const SvdResult r = svd(identity(2));
  ASSERT_EQ(r.singular_values.size(), 2u);
  EXPECT_DOUBLE_EQ(r.singular_values[0], 1.0);
  EXPECT_DOUBLE_EQ(r.singular_values[1], 1.0);
  EXPECT_DOUBLE_EQ(r.cond_rowgram, 1.0);
}

TEST(Svd, DiagonalMatrix) {
  const SvdResult r = svd(diagonal({2.0, 1.0}));
  EXPECT_DOUBLE_EQ(r.singular_values[0], 2.0);
  EXPECT_DOUBLE_EQ(r.singular_values[1], 1.0);
  EXPECT_DOUBLE_EQ(r.sigma_min_colgram, 1.0);
  EXPECT_DOUBLE_EQ(r.sigma_min_rowgram, 1.0);
  EXPECT_DOUBLE_EQ(r.cond_rowgram, 2.0);
}

TEST(Svd, MatchesIndependentEigensolverOn5x8) {
  const Matrix m = random_matrix(5, 8, 17);
  const SvdResult r = svd(m);
  const Vec eig = oracles::jacobi_symmetric_eigenvalues(gram_rowwise(m));
  ASSERT_EQ(r.singular_values.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_NEAR(r.singular_values[i], std::sqrt(std::max(eig[i], 0.0)), 1e-8);
  // wide full-row-rank matrix: row-Gram min positive, column-Gram min zero
  EXPECT_GT(r.sigma_min_rowgram, 0.0);
  EXPECT_DOUBLE_EQ(r.sigma_min_colgram, 0.0);
}

TEST(Svd, ReconstructionWithinTolerance) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const Matrix m = random_matrix(7, 4, seed);
    const SvdFactorization f = svd_factor(m);
    Matrix rec(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < f.s.size(); ++k)
          s += f.u(i, k) * f.s[k] * f.v(j, k);
        rec(i, j) = s;
      }
    double err = 0.0;
    for (std::size_t k = 0; k < m.data.size(); ++k) {
      const double d = rec.data[k] - m.data[k];
      err += d * d;
    }
    EXPECT_LE(std::sqrt(err), 1e-10 * frobenius_norm(m));
  }
}

TEST(Svd, SingularValuesNonincreasingAndDeterministic) {
  const Matrix m = random_matrix(6, 6, 99);
  const SvdResult a = svd(m);
  const SvdResult b = svd(m);
  EXPECT_EQ(a.singular_values, b.singular_values);  // bitwise
  for (std::size_t i = 1; i < a.singular_values.size(); ++i)
    EXPECT_GE(a.singular_values[i - 1], a.singular_values[i]);
  EXPECT_LE(a.sigma_min_rowgram, a.singular_values[0]);
}

TEST(Svd, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(svd(Matrix()), std::invalid_argument);
  Matrix bad(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(svd(bad), std::invalid_argument);
}

TEST(Svd, RankDeficientHasZeroSingularValue) {
  Matrix m(3, 2);
  m(0, 0) = 1.0;
  m(1, 0) = 2.0;
  m(2, 0) = 3.0;  // second column zero
  const SvdResult r = svd(m);
  EXPECT_NEAR(r.singular_values.back(), 0.0, 1e-12);
  EXPECT_TRUE(std::isinf(r.cond_rowgram));
}

TEST(SubmatrixReport, OrthonormalColumnsExample) {
  const Matrix x = identity(2);
  const SubmatrixReport rep = submatrix_singular_report(x, {0});
  EXPECT_TRUE(rep.sigma_max_holds);
  EXPECT_DOUBLE_EQ(rep.smax_a, 1.0);
  EXPECT_DOUBLE_EQ(rep.smax_x, 1.0);
  EXPECT_DOUBLE_EQ(rep.sigma_max_slack_upper, 1.0);  // 1 + 1 - 1
  EXPECT_TRUE(rep.sigma_min_holds);
  EXPECT_TRUE(rep.cond_holds);
}

TEST(SubmatrixReport, ZeroBlockIsDegenerate) {
  Matrix x(2, 3);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;  // third column zero
  const SubmatrixReport rep = submatrix_singular_report(x, {0, 1});
  EXPECT_TRUE(rep.sigma_max_holds);
  EXPECT_NEAR(rep.sigma_max_slack_upper, 0.0, 1e-12);  // slack involving B vanishes
  EXPECT_NEAR(rep.sigma_min_slack, 0.0, 1e-12);
  EXPECT_TRUE(rep.cond_vacuous);  // Cond(B) = +inf
  EXPECT_TRUE(rep.cond_holds);    // vacuously
}

TEST(SubmatrixReport, AllChainsHoldOnRandomSplits) {
  rng::Stream s = rng::substream(2024, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix x = random_matrix(6, 10, 3000 + static_cast<std::uint64_t>(trial));
    const std::size_t k = 1 + static_cast<std::size_t>(s.next_below(9));
    std::vector<std::size_t> cols(10);
    std::iota(cols.begin(), cols.end(), 0);
    s.shuffle(cols);
    cols.resize(k);
    const SubmatrixReport rep = submatrix_singular_report(x, cols);
    EXPECT_TRUE(rep.sigma_max_holds) << "trial " << trial;
    EXPECT_TRUE(rep.sigma_min_holds) << "trial " << trial;
    EXPECT_TRUE(rep.cond_holds) << "trial " << trial;
    EXPECT_GE(rep.sigma_max_slack_lower, -1e-9);
    EXPECT_GE(rep.sigma_max_slack_upper, -1e-9);
    EXPECT_GE(rep.sigma_min_slack, -1e-9);
  }
}

// The literal two-sided min chain fails under the column-Gram reading:
// X = I_2 split into two unit columns gives 1 >= 1 >= 1 + 1.
TEST(SubmatrixReport, ColumnGramCounterexampleOnRecord) {
  const SubmatrixReport rep = submatrix_singular_report(identity(2), {0});
  EXPECT_FALSE(rep.literal_min_chain_colgram);
}

TEST(SubmatrixReport, RejectsBadColumnSets) {
  const Matrix x = identity(3);
  EXPECT_THROW(submatrix_singular_report(x, {}), std::invalid_argument);
  EXPECT_THROW(submatrix_singular_report(x, {5}), std::invalid_argument);
  EXPECT_THROW(submatrix_singular_report(x, {0, 1, 2}), std::invalid_argument);
}
