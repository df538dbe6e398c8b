#include <gtest/gtest.h>

#include "grassmann/sparse_solvers.hpp"
#include "support.hpp"

using namespace grassmann;
using namespace testsupport;

namespace {

LassoResult solve(const Matrix& a, const Vector& x, double lambda, SolverConfig cfg = {}) {
  return lasso_solve(LassoProblem{a, x, lambda}, cfg);
}

double lasso_objective(const Matrix& a, const Vector& x, double lambda, const Vector& y) {
  return (x - a * y).squaredNorm() + lambda * y.lpNorm<1>();
}

}  // namespace

TEST(Lasso, IdentityDesign) {
  const Matrix a = Matrix::Identity(2, 2);
  Vector x(2);
  x << 1.0, 0.0;
  const auto r0 = solve(a, x, 0.0);
  EXPECT_NEAR(r0.coeffs(0), 1.0, 1e-10);
  EXPECT_NEAR(r0.coeffs(1), 0.0, 1e-10);
  const auto r1 = solve(a, x, 1.0);
  EXPECT_NEAR(r1.coeffs(0), 0.5, 1e-10);
  EXPECT_EQ(r1.coeffs(1), 0.0);
  EXPECT_TRUE(r1.converged);
}

TEST(Lasso, MatchesSignPatternOracle) {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const auto k = static_cast<Eigen::Index>(uniform_int(rng, 2, 7));
    const auto r = static_cast<Eigen::Index>(uniform_int(rng, 2, 9));
    const Matrix a = gaussian(r, k, rng);
    const Vector x = gaussian(r, 1, rng);
    const double lambda = uniform(rng, 0.01, 1.0);
    double oracle_obj = 0.0;
    const Vector oracle = lasso_enumerate(a.transpose() * a, a.transpose() * x, lambda, &oracle_obj);
    const auto res = solve(a, x, lambda);
    ASSERT_TRUE(res.converged);
    EXPECT_NEAR(res.objective, oracle_obj + x.squaredNorm(), 1e-6) << "trial " << t;
    EXPECT_NEAR(lasso_objective(a, x, lambda, res.coeffs), res.objective, 1e-9);
    // Unique when A has full column rank; only then compare coefficients.
    if (r >= k) {
      EXPECT_LE((res.coeffs - oracle).cwiseAbs().maxCoeff(), 1e-5) << "trial " << t;
    }
  }
}

TEST(Lasso, WideDesignInstance) {
  Rng rng(32);
  const Matrix a = gaussian(5, 8, rng);
  const Vector x = gaussian(5, 1, rng);
  double oracle_obj = 0.0;
  lasso_enumerate(a.transpose() * a, a.transpose() * x, 0.1, &oracle_obj);
  EXPECT_NEAR(solve(a, x, 0.1).objective, oracle_obj + x.squaredNorm(), 1e-6);
}

TEST(Lasso, ObjectiveHistoryNonIncreasing) {
  Rng rng(33);
  SolverConfig cfg;
  cfg.record_history = true;
  for (int t = 0; t < 50; ++t) {
    const Matrix a = gaussian(12, 8, rng);
    const Vector x = gaussian(12, 1, rng);
    const auto res = solve(a, x, uniform(rng, 0.001, 0.5), cfg);
    ASSERT_FALSE(res.history.empty());
    for (std::size_t i = 1; i < res.history.size(); ++i) EXPECT_LE(res.history[i], res.history[i - 1] + 1e-12);
  }
}

TEST(Lasso, ZeroAboveAnalyticThreshold) {
  Rng rng(34);
  for (int t = 0; t < 50; ++t) {
    const Matrix a = gaussian(6, 5, rng);
    const Vector x = gaussian(6, 1, rng);
    const double threshold = 2.0 * (a.transpose() * x).cwiseAbs().maxCoeff();
    const auto res = solve(a, x, threshold * uniform(rng, 1.0, 3.0));
    EXPECT_TRUE(res.coeffs.isZero(0.0));
    EXPECT_TRUE(res.converged);
  }
}

TEST(Lasso, DeterministicForSameInput) {
  Rng rng(35);
  const Matrix a = gaussian(10, 8, rng);
  const Vector x = gaussian(10, 1, rng);
  EXPECT_EQ(solve(a, x, 0.05).coeffs, solve(a, x, 0.05).coeffs);
}

TEST(Lasso, RejectsBadConfig) {
  const Matrix a = Matrix::Identity(2, 2);
  const Vector x = Vector::Ones(2);
  EXPECT_THROW(solve(a, x, -1.0), Error);
  SolverConfig cfg;
  cfg.tol = 0.0;
  EXPECT_THROW(solve(a, x, 0.1, cfg), Error);
  EXPECT_THROW(solve(a, Vector::Ones(3), 0.1), Error);
}

TEST(AffineLocalSolve, Examples) {
  const Vector eq = affine_local_solve(Matrix::Identity(2, 2), 0.0);
  EXPECT_NEAR(eq(0), 0.5, 1e-15);
  EXPECT_NEAR(eq(1), 0.5, 1e-15);

  const Vector w = affine_local_solve(Vector::LinSpaced(2, 1.0, 3.0).asDiagonal().toDenseMatrix(), 0.0);
  EXPECT_NEAR(w(0), 0.75, 1e-15);
  EXPECT_NEAR(w(1), 0.25, 1e-15);

  EXPECT_EQ(affine_local_solve(Matrix::Constant(1, 1, 4.0), 0.0)(0), 1.0);
}

TEST(AffineLocalSolve, MatchesLagrangianOracle) {
  Rng rng(36);
  for (int t = 0; t < 100; ++t) {
    const Matrix b = random_spd(4, rng);
    const Vector binv1 = b.llt().solve(Vector::Ones(4));
    const Vector oracle = binv1 / binv1.sum();
    const Vector y = affine_local_solve(b, 0.0);
    EXPECT_LE((y - oracle).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(y.sum(), 1.0, 1e-12);
  }
}

TEST(AffineLocalSolve, ScaleInvariantWithTraceRidge) {
  Rng rng(37);
  for (int t = 0; t < 50; ++t) {
    const Matrix b = random_spd(5, rng);
    const double s = uniform(rng, 0.01, 100.0);
    EXPECT_LE((affine_local_solve(b, 1e-3) - affine_local_solve(s * b, 1e-3)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(AffineLocalSolve, SingularThrows) {
  try {
    affine_local_solve(Matrix::Ones(3, 3), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Singular);
  }
}
