#include <gtest/gtest.h>

#include "grassmann/coding.hpp"
#include "support.hpp"

using namespace grassmann;
using namespace testsupport;

namespace {

Matrix axes(Eigen::Index d, std::initializer_list<Eigen::Index> idx) {
  Matrix m = Matrix::Zero(d, static_cast<Eigen::Index>(idx.size()));
  Eigen::Index c = 0;
  for (auto i : idx) m(i, c++) = 1.0;
  return m;
}

GrassmannPoint rotated(const GrassmannPoint& x, Rng& rng) {
  return GrassmannPoint(x.basis() * random_orthogonal(x.order(), rng), 1e-9);
}

/// Closed-form locality-constrained code over the n_lc chordally nearest
/// atoms, built from dense projection matrices.
Vector dense_local_code(const std::vector<GrassmannPoint>& atoms, const GrassmannPoint& x, int n_lc) {
  const auto n = static_cast<Eigen::Index>(atoms.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return dense_chordal_sq(x, atoms[static_cast<std::size_t>(a)]) < dense_chordal_sq(x, atoms[static_cast<std::size_t>(b)]);
  });
  Matrix b(n_lc, n_lc);
  for (int i = 0; i < n_lc; ++i)
    for (int j = 0; j < n_lc; ++j)
      b(i, j) = ((proj(x) - proj(atoms[static_cast<std::size_t>(order[i])])).cwiseProduct(
                     proj(x) - proj(atoms[static_cast<std::size_t>(order[j])])))
                    .sum();
  const Vector w = b.fullPivLu().solve(Vector::Ones(n_lc));
  Vector code = Vector::Zero(n);
  for (int i = 0; i < n_lc; ++i) code(order[i]) = w(i) / w.sum();
  return code;
}

}  // namespace

TEST(AtomGram, OrthogonalAtomsGiveIdentity) {
  const GrassmannDictionary dict({GrassmannPoint(axes(2, {0})), GrassmannPoint(axes(2, {1}))});
  EXPECT_LE((dict.gram().similarity() - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(AtomGram, DuplicateAtomsAreRankDeficient) {
  Rng rng(41);
  const auto a = gs_point(6, 2, rng);
  const auto b = gs_point(6, 2, rng);
  const GrassmannDictionary dict({a, b, a});
  const Matrix& k = dict.gram().similarity();
  EXPECT_LE((k.row(0) - k.row(2)).norm(), 1e-12);
  EXPECT_LE(dict.gram().eigenvalues()(0), 1e-12);
  EXPECT_EQ(dict.gram().design().rows(), 2);
}

TEST(AtomGram, PsdAndMatchesQuadraticForm) {
  Rng rng(42);
  const auto atoms = random_points(8, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  EXPECT_GE(dict.gram().eigenvalues().minCoeff(), 0.0);
  for (int t = 0; t < 20; ++t) {
    const Vector v = gaussian(8, 1, rng);
    Matrix s = Matrix::Zero(6, 6);
    for (int i = 0; i < 8; ++i) s += v(i) * proj(atoms[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(v.dot(dict.gram().similarity() * v), s.squaredNorm(), 1e-10);
  }
}

TEST(AtomGram, RejectsIndefinite) {
  Matrix k(2, 2);
  k << 1.0, 2.0, 2.0, 1.0;
  try {
    AtomGram g(k);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPSD);
  }
}

TEST(Dictionary, ValidatesShapesAndLabels) {
  Rng rng(43);
  EXPECT_THROW(GrassmannDictionary(std::vector<GrassmannPoint>{}), Error);
  EXPECT_THROW(GrassmannDictionary({gs_point(6, 2, rng), gs_point(5, 2, rng)}), Error);
  EXPECT_THROW(GrassmannDictionary({gs_point(6, 2, rng)}, {0, 1}), Error);
  const GrassmannDictionary dict({gs_point(6, 2, rng)});
  EXPECT_THROW(dict.similarities(gs_point(6, 3, rng)), Error);
}

TEST(Gsc, ExactAtomIsReconstructed) {
  Rng rng(44);
  const auto atoms = random_points(8, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    const CodeVector code = gsc_encode(dict, atoms[j], 0.0);
    EXPECT_LE(sc_objective(dict, atoms[j], code.coeffs, 0.0), 1e-8);
    EXPECT_LE(dense_sc_objective(atoms, atoms[j], code.coeffs, 0.0), 1e-8);
  }
}

TEST(Gsc, ZeroCodeAboveThreshold) {
  Rng rng(45);
  const auto atoms = random_points(8, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  for (int t = 0; t < 20; ++t) {
    const auto x = gs_point(6, 2, rng);
    const double lambda = 2.0 * dict.similarities(x).maxCoeff() * uniform(rng, 1.0, 2.0);
    const CodeVector code = gsc_encode(dict, x, lambda);
    EXPECT_TRUE(code.coeffs.isZero(0.0));
  }
}

TEST(Gsc, ObjectiveMatchesDenseOracle) {
  Rng rng(46);
  for (int t = 0; t < 100; ++t) {
    const auto atoms = random_points(8, 6, 2, rng);
    const GrassmannDictionary dict(atoms);
    const auto x = gs_point(6, 2, rng);
    const double lambda = uniform(rng, 0.0, 0.5);
    const CodeVector code = gsc_encode(dict, x, lambda);
    EXPECT_NEAR(dense_sc_objective(atoms, x, code.coeffs, lambda), sc_objective(dict, x, code.coeffs, lambda), 1e-8);
  }
}

TEST(Gsc, OptimalAgainstSignPatternOracle) {
  // Five atoms keep the 3^5 enumeration small.
  Rng rng(47);
  for (int t = 0; t < 50; ++t) {
    const auto atoms = random_points(5, 5, 2, rng);
    const GrassmannDictionary dict(atoms);
    const auto x = gs_point(5, 2, rng);
    const double lambda = uniform(rng, 0.01, 0.5);
    double oracle = 0.0;
    lasso_enumerate(dict.gram().similarity(), dict.similarities(x), lambda, &oracle);
    const CodeVector code = gsc_encode(dict, x, lambda);
    EXPECT_NEAR(sc_objective(dict, x, code.coeffs, lambda), oracle + 2.0, 1e-6);
  }
}

TEST(Gsc, BasisInvariance) {
  Rng rng(48);
  for (int t = 0; t < 30; ++t) {
    const auto atoms = random_points(8, 6, 2, rng);
    const auto x = gs_point(6, 2, rng);
    std::vector<GrassmannPoint> moved;
    for (const auto& a : atoms) moved.push_back(rotated(a, rng));
    const GrassmannDictionary d1(atoms), d2(moved);
    const Vector c1 = gsc_encode(d1, x, 0.1).coeffs;
    const Vector c2 = gsc_encode(d2, rotated(x, rng), 0.1).coeffs;
    EXPECT_LE((c1 - c2).cwiseAbs().maxCoeff(), 1e-8);
    const Vector l1 = glc_encode(d1, x, 4).coeffs;
    const Vector l2 = glc_encode(d2, rotated(x, rng), 4).coeffs;
    EXPECT_LE((l1 - l2).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Gsc, L1NormShrinksWithLambda) {
  Rng rng(49);
  for (int t = 0; t < 20; ++t) {
    const auto atoms = random_points(8, 6, 2, rng);
    const GrassmannDictionary dict(atoms);
    const auto x = gs_point(6, 2, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.001, 0.01, 0.05, 0.1, 0.3, 1.0, 3.0}) {
      const double l1 = gsc_encode(dict, x, lambda).coeffs.lpNorm<1>();
      EXPECT_LE(l1, prev + 1e-6);
      prev = l1;
    }
  }
}

TEST(Gsc, RejectsNegativeLambdaAndShapeMismatch) {
  Rng rng(50);
  const GrassmannDictionary dict(random_points(3, 6, 2, rng));
  EXPECT_THROW(gsc_encode(dict, gs_point(6, 2, rng), -0.1), Error);
  EXPECT_THROW(gsc_encode(dict, gs_point(7, 2, rng), 0.1), Error);
}

TEST(Glc, SingleNeighbourIsNearestIndicator) {
  Rng rng(51);
  for (int t = 0; t < 100; ++t) {
    const auto atoms = random_points(8, 6, 2, rng);
    const GrassmannDictionary dict(atoms);
    const auto x = gs_point(6, 2, rng);
    Eigen::Index nearest = 0;
    for (Eigen::Index j = 1; j < 8; ++j)
      if (dense_chordal_sq(x, atoms[static_cast<std::size_t>(j)]) <
          dense_chordal_sq(x, atoms[static_cast<std::size_t>(nearest)]))
        nearest = j;
    const Vector code = glc_encode(dict, x, 1).coeffs;
    EXPECT_EQ(code(nearest), 1.0);
    EXPECT_EQ(code.cwiseAbs().sum(), 1.0);
  }
}

TEST(Glc, SumsToOneAndMatchesClosedForm) {
  Rng rng(52);
  for (int t = 0; t < 100; ++t) {
    const auto atoms = random_points(8, 6, 2, rng);
    const GrassmannDictionary dict(atoms);
    const auto x = gs_point(6, 2, rng);
    const int n_lc = uniform_int(rng, 2, 5);
    const Vector code = glc_encode(dict, x, n_lc, 0.0).coeffs;
    EXPECT_NEAR(code.sum(), 1.0, 1e-12);
    EXPECT_LE((code - dense_local_code(atoms, x, n_lc)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ((code.array() != 0.0).count(), n_lc);
  }
}

TEST(Glc, QueryOnAtomConcentratesWeight) {
  Rng rng(53);
  const auto atoms = random_points(8, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  for (std::size_t i = 0; i < atoms.size(); ++i)
    EXPECT_GE(glc_encode(dict, atoms[i], 3, 1e-6).coeffs(static_cast<Eigen::Index>(i)), 0.99);
}

TEST(Glc, NeighbourDistancesAreChordal) {
  Rng rng(54);
  const auto atoms = random_points(8, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  const auto x = gs_point(6, 2, rng);
  const Vector delta = (4.0 - 2.0 * dict.similarities(x).array()).matrix();
  for (Eigen::Index j = 0; j < 8; ++j)
    EXPECT_NEAR(delta(j), chordal_distance_squared(x, atoms[static_cast<std::size_t>(j)]), 1e-10);
}

TEST(Glc, RejectsBadNeighbourCount) {
  Rng rng(55);
  const GrassmannDictionary dict(random_points(3, 6, 2, rng));
  EXPECT_THROW(glc_encode(dict, gs_point(6, 2, rng), 0), Error);
  EXPECT_THROW(glc_encode(dict, gs_point(6, 2, rng), 4), Error);
}

TEST(LogEuclidean, QueryAtBaseGivesZeroCode) {
  Rng rng(56);
  const GrassmannDictionary dict(random_points(5, 6, 2, rng));
  const GrassmannPoint base = canonical_point(6, 2);
  const CodeVector code = loge_encode(dict, base, base, 0.1);
  EXPECT_TRUE(code.coeffs.isZero(0.0));
}

TEST(LogEuclidean, AtomIsReconstructedExactly) {
  Rng rng(57);
  const auto atoms = random_points(5, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  const LogEuclideanCoder coder(dict, canonical_point(6, 2));
  for (const auto& a : atoms) EXPECT_LE(coder.objective(a, coder.encode(a, 0.0).coeffs, 0.0), 1e-8);
}

TEST(LogEuclidean, MatchesExplicitTangentLasso) {
  Rng rng(58);
  const auto atoms = random_points(5, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  const LogEuclideanCoder coder(dict, canonical_point(6, 2));
  for (int t = 0; t < 20; ++t) {
    const auto x = gs_point(6, 2, rng);
    const double lambda = uniform(rng, 0.01, 0.3);
    const Matrix& a = coder.design();
    const Vector v = coder.tangent_coordinates(x);
    double oracle = 0.0;
    lasso_enumerate(a.transpose() * a, a.transpose() * v, lambda, &oracle);
    EXPECT_NEAR(coder.objective(x, coder.encode(x, lambda).coeffs, lambda), oracle + v.squaredNorm(), 1e-6);
  }
}

TEST(FrechetMean, RecoversCenterOfSymmetricCloud) {
  Rng rng(59);
  const auto center = gs_point(6, 2, rng);
  std::vector<GrassmannPoint> pts;
  for (int i = 0; i < 10; ++i) {
    const Matrix delta = horizontal_projection(center, gaussian(6, 2, rng, 0.1));
    pts.push_back(exp_map(TangentVector(center, delta)));
    pts.push_back(exp_map(TangentVector(center, -delta)));
  }
  const auto mean = frechet_mean(pts);
  EXPECT_LE(chordal_distance(mean, center), 1e-6);
  Matrix avg = Matrix::Zero(6, 2);
  for (const auto& p : pts) avg += log_map(mean, p).delta();
  EXPECT_LE(avg.norm() / 20.0, 1e-8);
}

TEST(Reconstruct, IndicatorGivesAtom) {
  Rng rng(60);
  const auto atoms = random_points(4, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  for (Eigen::Index j = 0; j < 4; ++j) {
    CodeVector code{Vector::Unit(4, j), CodingMethod::gSC, {}, true};
    EXPECT_LE(chordal_distance(reconstruct(dict, code), atoms[static_cast<std::size_t>(j)]), 1e-10);
  }
}

TEST(Reconstruct, GlcOnAtomGivesAtom) {
  Rng rng(61);
  const auto atoms = random_points(6, 6, 2, rng);
  const GrassmannDictionary dict(atoms);
  EXPECT_LE(chordal_distance(reconstruct(dict, glc_encode(dict, atoms[2], 3)), atoms[2]), 1e-6);
}

TEST(Reconstruct, SparseCodeGivesValidPointAndZeroThrows) {
  Rng rng(62);
  const GrassmannDictionary dict(random_points(6, 6, 2, rng));
  const auto out = reconstruct(dict, gsc_encode(dict, gs_point(6, 2, rng), 0.05));
  EXPECT_LE((out.basis().transpose() * out.basis() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  try {
    reconstruct(dict, CodeVector{Vector::Zero(6), CodingMethod::gSC, {}, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllZeroCode);
  }
}

TEST(CodingMethodNames, RoundTrip) {
  for (auto m : {CodingMethod::gSC, CodingMethod::gLC, CodingMethod::kgSC, CodingMethod::kgLC, CodingMethod::logE})
    EXPECT_EQ(parse_coding_method(to_string(m)), m);
  EXPECT_THROW(parse_coding_method("isc"), Error);
}
