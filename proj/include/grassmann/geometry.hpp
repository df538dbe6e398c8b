#ifndef GRASSMANN_GEOMETRY_HPP
#define GRASSMANN_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grassmann/errors.hpp"

namespace grassmann {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline double orthonormality_error(const Matrix& basis) {
  const Matrix gram = basis.transpose() * basis;
  return (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

inline std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace detail

/// A point on G(p,d), held as a d x p matrix with orthonormal columns.
///
/// Only the span matters. Two points are "equal" when their chordal distance
/// vanishes; bases are never compared entrywise.
class GrassmannPoint {
 public:
  static constexpr double kOrthonormalTol = 1e-10;

  GrassmannPoint() = default;

  explicit GrassmannPoint(Matrix basis, double tol = kOrthonormalTol) : basis_(std::move(basis)) {
    detail::require(basis_.cols() > 0 && basis_.cols() <= basis_.rows(), ErrorCode::InvalidArgument,
                    "subspace basis must satisfy 0 < p <= d, got " + detail::shape(basis_));
    detail::require(basis_.allFinite(), ErrorCode::InvalidArgument, "basis has non-finite entries");
    const double err = detail::orthonormality_error(basis_);
    detail::require(err <= tol, ErrorCode::InvalidArgument,
                    "basis columns are not orthonormal (max deviation " + std::to_string(err) + ")");
  }

  const Matrix& basis() const noexcept { return basis_; }
  Eigen::Index ambient() const noexcept { return basis_.rows(); }
  Eigen::Index order() const noexcept { return basis_.cols(); }

  /// The d x d projection matrix X X^T. Meant for small problems and oracles.
  Matrix projection() const { return basis_ * basis_.transpose(); }

 private:
  Matrix basis_;
};

/// Tangent vector at `base`, stored as a horizontal d x p matrix (base^T delta = 0).
class TangentVector {
 public:
  static constexpr double kHorizontalTol = 1e-10;

  TangentVector(GrassmannPoint base, Matrix delta) : base_(std::move(base)), delta_(std::move(delta)) {
    detail::require(delta_.rows() == base_.ambient() && delta_.cols() == base_.order(),
                    ErrorCode::DimensionMismatch,
                    "tangent delta " + detail::shape(delta_) + " does not match base " +
                        detail::shape(base_.basis()));
    const double scale = std::max(1.0, delta_.cwiseAbs().maxCoeff());
    const double err = (base_.basis().transpose() * delta_).cwiseAbs().maxCoeff();
    detail::require(err <= kHorizontalTol * scale, ErrorCode::InvalidArgument,
                    "tangent delta is not horizontal (max |base^T delta| = " + std::to_string(err) + ")");
  }

  const GrassmannPoint& base() const noexcept { return base_; }
  const Matrix& delta() const noexcept { return delta_; }
  double norm() const { return delta_.norm(); }

 private:
  GrassmannPoint base_;
  Matrix delta_;
};

/// Principal angles in radians, ascending, each in [0, pi/2].
using PrincipalAngleVector = Vector;

namespace detail {

inline void require_same_shape(const GrassmannPoint& x, const GrassmannPoint& y) {
  require(x.ambient() == y.ambient() && x.order() == y.order(), ErrorCode::DimensionMismatch,
          "points live on different manifolds: " + shape(x.basis()) + " vs " + shape(y.basis()));
}

inline void require_same_ambient(const GrassmannPoint& x, const GrassmannPoint& y) {
  require(x.ambient() == y.ambient(), ErrorCode::DimensionMismatch,
          "ambient dimensions differ: " + shape(x.basis()) + " vs " + shape(y.basis()));
}

}  // namespace detail

// Projection of an arbitrary d x p matrix onto the horizontal space at `base`.
inline Matrix horizontal_projection(const GrassmannPoint& base, const Matrix& m) {
  return m - base.basis() * (base.basis().transpose() * m);
}

/// Best rank-p column space of `raw` (leading left singular vectors).
///
/// Throws RankDeficient when the p-th singular value is at most 1e-10 times
/// the largest one.
inline GrassmannPoint orthonormalize(const Matrix& raw, Eigen::Index p) {
  detail::require(p >= 1, ErrorCode::InvalidArgument, "subspace order must be >= 1");
  detail::require(raw.cols() >= p && raw.rows() >= p, ErrorCode::RankDeficient,
                  "cannot extract order " + std::to_string(p) + " from " + detail::shape(raw));
  detail::require(raw.allFinite(), ErrorCode::InvalidArgument, "matrix has non-finite entries");
  Eigen::BDCSVD<Matrix> svd(raw, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double cutoff = 1e-10 * s(0);
  detail::require(s(0) > 0.0 && s(p - 1) > cutoff, ErrorCode::RankDeficient,
                  "rank of " + detail::shape(raw) + " is below " + std::to_string(p));
  return GrassmannPoint(svd.matrixU().leftCols(p));
}

/// Span of the first p canonical axes, [I_p; 0].
inline GrassmannPoint canonical_point(Eigen::Index d, Eigen::Index p) {
  return GrassmannPoint(Matrix::Identity(d, p));
}

inline PrincipalAngleVector principal_angles(const GrassmannPoint& x, const GrassmannPoint& y) {
  detail::require_same_shape(x, y);
  // Cosines from X^T Y and sines from (I - X X^T) Y; pairing them through
  // atan2 keeps small angles accurate where acos alone would not.
  const Matrix c = x.basis().transpose() * y.basis();
  const Matrix s = y.basis() - x.basis() * c;
  const Vector cosines = Eigen::JacobiSVD<Matrix>(c).singularValues();
  const Vector sines = Eigen::JacobiSVD<Matrix>(s).singularValues();
  const Eigen::Index p = x.order();
  Vector angles(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double cs = std::clamp(cosines(i), 0.0, 1.0);
    const double sn = std::clamp(sines(p - 1 - i), 0.0, 1.0);
    angles(i) = std::atan2(sn, cs);
  }
  std::sort(angles.data(), angles.data() + p);
  return angles;
}

inline double geodesic_distance(const GrassmannPoint& x, const GrassmannPoint& y) {
  return principal_angles(x, y).norm();
}

/// ||Y^T X||_F^2, the Frobenius inner product of the two projection matrices.
inline double projection_inner(const GrassmannPoint& x, const GrassmannPoint& y) {
  detail::require_same_ambient(x, y);
  return (y.basis().transpose() * x.basis()).squaredNorm();
}

/// 2 ||(I - X X^T) Y||_F^2 = 2 sum sin^2(theta_i) = 2p - 2 ||X^T Y||_F^2, in
/// the form that does not cancel for nearby subspaces.
inline double chordal_distance_squared(const GrassmannPoint& x, const GrassmannPoint& y) {
  detail::require_same_shape(x, y);
  return 2.0 * (y.basis() - x.basis() * (x.basis().transpose() * y.basis())).squaredNorm();
}

/// ||X X^T - Y Y^T||_F, evaluated without forming d x d matrices.
inline double chordal_distance(const GrassmannPoint& x, const GrassmannPoint& y) {
  return std::sqrt(chordal_distance_squared(x, y));
}

/// Result of projecting a symmetric matrix onto the embedded manifold.
struct ClosestPoint {
  GrassmannPoint point;
  /// True when lambda_p - lambda_{p+1} <= 1e-8 |lambda_1|; the point is still a
  /// minimizer but not the unique one.
  bool degenerate_gap = false;
};

namespace detail {

inline ClosestPoint top_eigenvectors(const Matrix& sym, Eigen::Index p, double next_eigenvalue_floor,
                                     const Matrix* range_basis) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  require(eig.info() == Eigen::Success, ErrorCode::NotConverged, "symmetric eigensolver failed");
  const Vector& vals = eig.eigenvalues();  // ascending
  const Eigen::Index n = vals.size();
  Matrix basis(sym.rows(), p);
  for (Eigen::Index k = 0; k < p; ++k) basis.col(k) = eig.eigenvectors().col(n - 1 - k);
  if (range_basis != nullptr) basis = (*range_basis) * basis;

  const double top = std::max(std::abs(vals(n - 1)), std::abs(vals(0)));
  double next = next_eigenvalue_floor;
  if (n > p) next = std::max(next, vals(n - 1 - p));
  bool degenerate = false;
  if (n > p || range_basis != nullptr) degenerate = vals(n - p) - next <= 1e-8 * top;

  // Re-orthonormalize to remove eigensolver round-off before validation.
  Eigen::HouseholderQR<Matrix> qr(basis);
  Matrix q = qr.householderQ() * Matrix::Identity(basis.rows(), p);
  return ClosestPoint{GrassmannPoint(std::move(q)), degenerate};
}

}  // namespace detail

/// Closest point on P(p,d) to a symmetric matrix: its p leading eigenvectors.
inline ClosestPoint proj_to_manifold(const Matrix& s, Eigen::Index p) {
  detail::require(s.rows() == s.cols(), ErrorCode::DimensionMismatch,
                  "expected a square matrix, got " + detail::shape(s));
  detail::require(p >= 1 && p <= s.rows(), ErrorCode::InvalidArgument, "order out of range");
  const Matrix sym = 0.5 * (s + s.transpose());
  return detail::top_eigenvectors(sym, p, -std::numeric_limits<double>::infinity(), nullptr);
}

/// Leading eigenvectors of sum_i w_i X_i X_i^T without forming the d x d sum
/// when the stacked bases span a proper subspace of R^d.
inline ClosestPoint leading_eigvecs_weighted_sum(std::span<const Matrix> bases, std::span<const double> weights,
                                                 Eigen::Index d, Eigen::Index p) {
  detail::require(bases.size() == weights.size(), ErrorCode::DimensionMismatch, "one weight per basis required");
  Eigen::Index cols = 0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    detail::require(bases[i].rows() == d, ErrorCode::DimensionMismatch, "basis ambient dimension mismatch");
    if (weights[i] != 0.0) cols += bases[i].cols();
  }
  if (cols == 0) return proj_to_manifold(Matrix::Zero(d, d), p);

  Matrix stacked(d, cols);
  Vector col_weights(cols);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    if (weights[i] == 0.0) continue;
    stacked.middleCols(at, bases[i].cols()) = bases[i];
    col_weights.segment(at, bases[i].cols()).setConstant(weights[i]);
    at += bases[i].cols();
  }

  if (cols < d) {
    Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > 1e-12 * sv(0)) ++rank;
    if (rank >= p && rank < d) {
      const Matrix range = svd.matrixU().leftCols(rank);
      const Matrix g = range.transpose() * stacked;
      const Matrix small = g * col_weights.asDiagonal() * g.transpose();
      Eigen::SelfAdjointEigenSolver<Matrix> probe(small, Eigen::EigenvaluesOnly);
      // Outside the range the full matrix has eigenvalue 0; the reduced
      // problem is only valid when the p leading reduced eigenvalues beat it.
      if (probe.eigenvalues()(rank - p) >= 0.0) {
        return detail::top_eigenvectors(0.5 * (small + small.transpose()), p, 0.0, &range);
      }
    }
  }
  const Matrix dense = stacked * col_weights.asDiagonal() * stacked.transpose();
  return proj_to_manifold(dense, p);
}

/// Minimizer over G(p,d) of sum_i w_i ||Y Y^T - X_i X_i^T||_F^2.
///
/// Negative weights are allowed: the closed form Proj(sum_i w_i X_i X_i^T)
/// still minimizes the signed objective because ||Y Y^T||_F^2 = p is constant.
inline GrassmannPoint weighted_chordal_mean(std::span<const GrassmannPoint> atoms, std::span<const double> weights) {
  detail::require(!atoms.empty(), ErrorCode::InvalidArgument, "chordal mean needs at least one atom");
  detail::require(atoms.size() == weights.size(), ErrorCode::DimensionMismatch, "one weight per atom required");
  std::vector<Matrix> bases;
  bases.reserve(atoms.size());
  for (const auto& a : atoms) {
    detail::require_same_shape(atoms.front(), a);
    bases.push_back(a.basis());
  }
  for (double w : weights) detail::require(std::isfinite(w), ErrorCode::InvalidArgument, "non-finite weight");
  return leading_eigvecs_weighted_sum(bases, weights, atoms.front().ambient(), atoms.front().order()).point;
}

/// Geodesic step from tv.base() along tv.delta():
/// Y = X V cos(S) V^T + U sin(S) V^T where delta = U S V^T.
inline GrassmannPoint exp_map(const TangentVector& tv) {
  const Matrix& x = tv.base().basis();
  Eigen::JacobiSVD<Matrix> svd(tv.delta(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const Matrix& v = svd.matrixV();
  const Matrix y = x * v * s.array().cos().matrix().asDiagonal() * v.transpose() +
                   svd.matrixU() * s.array().sin().matrix().asDiagonal() * v.transpose();
  Eigen::HouseholderQR<Matrix> qr(y);
  return GrassmannPoint(qr.householderQ() * Matrix::Identity(y.rows(), y.cols()));
}

/// Inverse of exp_map. Throws CutLocus when some principal angle is pi/2.
inline TangentVector log_map(const GrassmannPoint& base, const GrassmannPoint& y) {
  detail::require_same_shape(base, y);
  const Matrix& x = base.basis();
  const Matrix c = x.transpose() * y.basis();
  Eigen::JacobiSVD<Matrix> csvd(c);
  detail::require(csvd.singularValues().minCoeff() > 1e-10, ErrorCode::CutLocus,
                  "point is at principal angle pi/2 from the base");
  const Matrix residual = y.basis() - x * c;
  // M = (I - X X^T) Y (X^T Y)^{-1}
  const Matrix m = c.transpose().fullPivLu().solve(residual.transpose()).transpose();
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector theta = svd.singularValues().array().atan().matrix();
  Matrix delta = svd.matrixU() * theta.asDiagonal() * svd.matrixV().transpose();
  // Strip the round-off vertical component so the horizontality check holds.
  delta = horizontal_projection(base, delta);
  return TangentVector(base, std::move(delta));
}

inline GrassmannPoint random_point(Eigen::Index d, Eigen::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix raw(d, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < d; ++i) raw(i, j) = normal(rng);
  return orthonormalize(raw, p);
}

/// Horizontal tangent at `base` with i.i.d. N(0, sigma^2) entries before projection.
inline TangentVector random_tangent(const GrassmannPoint& base, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sigma);
  Matrix raw(base.ambient(), base.order());
  for (Eigen::Index j = 0; j < raw.cols(); ++j)
    for (Eigen::Index i = 0; i < raw.rows(); ++i) raw(i, j) = normal(rng);
  return TangentVector(base, horizontal_projection(base, raw));
}

inline Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix raw(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) raw(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(raw);
  return qr.householderQ();
}

}  // namespace grassmann

#endif  // GRASSMANN_GEOMETRY_HPP
