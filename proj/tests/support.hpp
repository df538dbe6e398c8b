// Shared generators and brute-force oracles for the test suite. Oracles work
// on explicit d x d projection matrices so they share no code path with the
// library's quadratic-form evaluations.
#ifndef GRASSMANN_TESTS_SUPPORT_HPP
#define GRASSMANN_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "grassmann/geometry.hpp"

namespace testsupport {

using grassmann::GrassmannPoint;
using grassmann::Matrix;
using grassmann::Vector;
using Rng = std::mt19937_64;

inline Matrix gaussian(Eigen::Index r, Eigen::Index c, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Orthonormal basis via Gram-Schmidt, independent of the library's SVD path.
inline Matrix gram_schmidt(Matrix m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < j; ++k) m.col(j) -= m.col(k).dot(m.col(j)) * m.col(k);
    m.col(j).normalize();
  }
  return m;
}

inline GrassmannPoint gs_point(Eigen::Index d, Eigen::Index p, Rng& rng) {
  return GrassmannPoint(gram_schmidt(gaussian(d, p, rng)));
}

/// A point within a small geodesic-ish neighbourhood of `x`.
inline GrassmannPoint perturb(const GrassmannPoint& x, double eps, Rng& rng) {
  return GrassmannPoint(gram_schmidt(x.basis() + eps * gaussian(x.ambient(), x.order(), rng)));
}

inline std::vector<GrassmannPoint> random_points(std::size_t n, Eigen::Index d, Eigen::Index p, Rng& rng) {
  std::vector<GrassmannPoint> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(gs_point(d, p, rng));
  return out;
}

inline Matrix proj(const GrassmannPoint& x) { return x.basis() * x.basis().transpose(); }

inline double dense_chordal_sq(const GrassmannPoint& x, const GrassmannPoint& y) {
  return (proj(x) - proj(y)).squaredNorm();
}

/// ||X X^T - sum_j y_j D_j D_j^T||_F^2 + lambda ||y||_1 with explicit matrices.
inline double dense_sc_objective(const std::vector<GrassmannPoint>& atoms, const GrassmannPoint& x, const Vector& y,
                                 double lambda) {
  Matrix r = proj(x);
  for (std::size_t j = 0; j < atoms.size(); ++j) r -= y(static_cast<Eigen::Index>(j)) * proj(atoms[j]);
  return r.squaredNorm() + lambda * y.lpNorm<1>();
}

/// Principal angles from the eigenvalues of X^T Y Y^T X (cos^2), an
/// independent route from the library's atan2 construction.
inline Vector oracle_angles(const GrassmannPoint& x, const GrassmannPoint& y) {
  const Matrix c = x.basis().transpose() * y.basis();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c * c.transpose());
  Vector a(eig.eigenvalues().size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    a(i) = std::acos(std::sqrt(std::clamp(eig.eigenvalues()(a.size() - 1 - i), 0.0, 1.0)));
  return a;
}

/// Exhaustive sign-pattern lasso oracle for
///   min y^T Q y - 2 c^T y + lambda ||y||_1
/// over k <= 7 variables: every pattern s in {-1,0,1}^k is solved on its
/// support and kept when sign-consistent; the best objective wins.
inline Vector lasso_enumerate(const Matrix& q, const Vector& c, double lambda, double* best_obj = nullptr) {
  const Eigen::Index k = c.size();
  long total = 1;
  for (Eigen::Index i = 0; i < k; ++i) total *= 3;
  Vector best = Vector::Zero(k);
  double best_val = 0.0;
  for (long code = 0; code < total; ++code) {
    std::vector<int> sign(static_cast<std::size_t>(k));
    long rest = code;
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < k; ++i) {
      sign[static_cast<std::size_t>(i)] = static_cast<int>(rest % 3) - 1;
      rest /= 3;
      if (sign[static_cast<std::size_t>(i)] != 0) support.push_back(i);
    }
    if (support.empty()) continue;
    const auto m = static_cast<Eigen::Index>(support.size());
    Matrix qs(m, m);
    Vector rhs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      rhs(a) = c(support[a]) - 0.5 * lambda * sign[static_cast<std::size_t>(support[a])];
      for (Eigen::Index b = 0; b < m; ++b) qs(a, b) = q(support[a], support[b]);
    }
    Eigen::FullPivLU<Matrix> lu(qs);
    if (!lu.isInvertible()) continue;
    const Vector ys = lu.solve(rhs);
    bool consistent = true;
    for (Eigen::Index a = 0; a < m; ++a)
      if (ys(a) * sign[static_cast<std::size_t>(support[a])] <= 0.0) consistent = false;
    if (!consistent) continue;
    Vector y = Vector::Zero(k);
    for (Eigen::Index a = 0; a < m; ++a) y(support[a]) = ys(a);
    const double val = y.dot(q * y) - 2.0 * c.dot(y) + lambda * y.lpNorm<1>();
    if (val < best_val) {
      best_val = val;
      best = y;
    }
  }
  if (best_obj) *best_obj = best_val;
  return best;
}

/// Random symmetric positive-definite matrix with controlled conditioning.
inline Matrix random_spd(Eigen::Index n, Rng& rng, double floor = 0.1) {
  const Matrix g = gaussian(n, n, rng);
  return g * g.transpose() + floor * Matrix::Identity(n, n);
}

}  // namespace testsupport

#endif  // GRASSMANN_TESTS_SUPPORT_HPP
