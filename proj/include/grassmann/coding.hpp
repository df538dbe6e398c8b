#ifndef GRASSMANN_CODING_HPP
#define GRASSMANN_CODING_HPP

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grassmann/errors.hpp"
#include "grassmann/geometry.hpp"
#include "grassmann/sparse_solvers.hpp"

namespace grassmann {

enum class CodingMethod { gSC, gLC, kgSC, kgLC, logE };

inline const char* to_string(CodingMethod m) {
  switch (m) {
    case CodingMethod::gSC: return "gsc";
    case CodingMethod::gLC: return "glc";
    case CodingMethod::kgSC: return "kgsc";
    case CodingMethod::kgLC: return "kglc";
    case CodingMethod::logE: return "loge";
  }
  return "unknown";
}

inline CodingMethod parse_coding_method(const std::string& name) {
  if (name == "gsc") return CodingMethod::gSC;
  if (name == "glc") return CodingMethod::gLC;
  if (name == "kgsc") return CodingMethod::kgSC;
  if (name == "kglc") return CodingMethod::kgLC;
  if (name == "loge") return CodingMethod::logE;
  throw Error(ErrorCode::InvalidArgument, "unknown coding method '" + name + "'");
}

inline bool is_kernel_method(CodingMethod m) { return m == CodingMethod::kgSC || m == CodingMethod::kgLC; }
inline bool is_local_method(CodingMethod m) { return m == CodingMethod::gLC || m == CodingMethod::kgLC; }

struct CodeParams {
  double lambda = 0.0;
  int n_lc = 0;
  double ridge = 0.0;
};

struct CodeVector {
  Vector coeffs;
  CodingMethod method = CodingMethod::gSC;
  CodeParams params;
  bool converged = true;
};

/// Atom-atom similarity matrix [K]_ij = <D_i, D_j> together with the
/// eigen-factorization K = U S U^T used to vectorize sparse coding.
///
/// Eigenvalues below -1e-8 * lambda_max raise NotPSD; smaller negatives are
/// clamped to zero. The design A = S^{1/2} U^T keeps only eigenvalues above
/// 1e-10 * lambda_max so that x* = S^{-1/2} U^T k is a pseudo-inverse.
class AtomGram {
 public:
  static constexpr double kPsdTol = 1e-8;
  static constexpr double kPinvTol = 1e-10;

  AtomGram() = default;

  explicit AtomGram(const Matrix& similarity) {
    detail::require(similarity.rows() == similarity.cols() && similarity.rows() > 0, ErrorCode::DimensionMismatch,
                    "similarity matrix must be square and nonempty");
    k_ = 0.5 * (similarity + similarity.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k_);
    detail::require(eig.info() == Eigen::Success, ErrorCode::NotConverged, "eigensolver failed on atom Gram");
    eigvecs_ = eig.eigenvectors();
    eigvals_ = eig.eigenvalues();
    const double top = eigvals_.maxCoeff();
    detail::require(top > 0.0 && eigvals_.minCoeff() >= -kPsdTol * top, ErrorCode::NotPSD,
                    "atom similarity matrix is not positive semidefinite (min eigenvalue " +
                        std::to_string(eigvals_.minCoeff()) + ")");
    eigvals_ = eigvals_.cwiseMax(0.0);

    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = eigvals_.size() - 1; i >= 0; --i)
      if (eigvals_(i) > kPinvTol * top) kept.push_back(i);
    const auto r = static_cast<Eigen::Index>(kept.size());
    design_.resize(r, k_.rows());
    inv_sqrt_ut_.resize(r, k_.rows());
    for (Eigen::Index a = 0; a < r; ++a) {
      const double s = eigvals_(kept[a]);
      design_.row(a) = std::sqrt(s) * eigvecs_.col(kept[a]).transpose();
      inv_sqrt_ut_.row(a) = eigvecs_.col(kept[a]).transpose() / std::sqrt(s);
    }
    design_gram_ = design_.transpose() * design_;
  }

  Eigen::Index size() const noexcept { return k_.rows(); }
  const Matrix& similarity() const noexcept { return k_; }
  const Matrix& eigenvectors() const noexcept { return eigvecs_; }
  /// Ascending, clamped at zero.
  const Vector& eigenvalues() const noexcept { return eigvals_; }
  /// A = S^{1/2} U^T over the retained spectrum (r x N).
  const Matrix& design() const noexcept { return design_; }
  /// A^T A, equal to the similarity matrix up to the dropped spectrum.
  const Matrix& design_gram() const noexcept { return design_gram_; }

  /// x* = S^{-1/2} U^T k for a query similarity vector k.
  Vector target(const Vector& sims) const {
    detail::require(sims.size() == size(), ErrorCode::DimensionMismatch, "similarity vector length mismatch");
    return inv_sqrt_ut_ * sims;
  }

 private:
  Matrix k_;
  Matrix eigvecs_;
  Vector eigvals_;
  Matrix design_;
  Matrix design_gram_;
  Matrix inv_sqrt_ut_;
};

namespace detail {

inline LassoResult sparse_code_from_similarities(const AtomGram& gram, const Vector& sims, double lambda,
                                                 const SolverConfig& cfg) {
  detail::require(lambda >= 0.0, ErrorCode::InvalidArgument, "lambda must be >= 0");
  const Vector x_star = gram.target(sims);
  const Vector c = gram.design().transpose() * x_star;
  LassoResult res = lasso_solve_gram(gram.design_gram(), c, lambda, cfg);
  res.objective += x_star.squaredNorm();
  return res;
}

/// Indices of the n smallest values, ties to the lower index.
inline std::vector<Eigen::Index> smallest_indices(const Vector& values, int n) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  order.resize(static_cast<std::size_t>(n));
  return order;
}

inline Vector local_code_from_similarities(const Matrix& atom_sims, const Vector& sims, double p, int n_lc,
                                           double ridge) {
  const Eigen::Index n = sims.size();
  detail::require(n_lc >= 1 && n_lc <= n, ErrorCode::InvalidArgument,
                  "n_lc must lie in [1, " + std::to_string(n) + "], got " + std::to_string(n_lc));
  const Vector delta = (2.0 * p - 2.0 * sims.array()).matrix();
  const auto active = smallest_indices(delta, n_lc);
  Matrix b(n_lc, n_lc);
  for (int i = 0; i < n_lc; ++i)
    for (int j = 0; j < n_lc; ++j)
      b(i, j) = p - sims(active[i]) - sims(active[j]) + atom_sims(active[j], active[i]);
  const Vector local = affine_local_solve(b, ridge);
  Vector code = Vector::Zero(n);
  for (int i = 0; i < n_lc; ++i) code(active[i]) = local(i);
  return code;
}

}  // namespace detail

/// Ordered Grassmann atoms sharing (p, d) with optional class labels and the
/// precomputed atom similarity factorization.
class GrassmannDictionary {
 public:
  GrassmannDictionary() = default;

  GrassmannDictionary(std::vector<GrassmannPoint> atoms, std::vector<int> labels = {})
      : atoms_(std::move(atoms)), labels_(std::move(labels)) {
    detail::require(!atoms_.empty(), ErrorCode::InvalidArgument, "dictionary needs at least one atom");
    detail::require(labels_.empty() || labels_.size() == atoms_.size(), ErrorCode::DimensionMismatch,
                    "label count does not match atom count");
    const auto n = static_cast<Eigen::Index>(atoms_.size());
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      detail::require_same_shape(atoms_.front(), atoms_[i]);
      for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = projection_inner(atoms_[i], atoms_[j]);
    }
    gram_ = AtomGram(k);
  }

  std::size_t size() const noexcept { return atoms_.size(); }
  Eigen::Index order() const { return atoms_.front().order(); }
  Eigen::Index ambient() const { return atoms_.front().ambient(); }
  const std::vector<GrassmannPoint>& atoms() const noexcept { return atoms_; }
  const GrassmannPoint& atom(std::size_t i) const { return atoms_.at(i); }
  const std::vector<int>& labels() const noexcept { return labels_; }
  bool labeled() const noexcept { return !labels_.empty(); }
  const AtomGram& gram() const noexcept { return gram_; }

  /// [k]_i = ||X^T D_i||_F^2 for a query X.
  Vector similarities(const GrassmannPoint& query) const {
    detail::require_same_shape(atoms_.front(), query);
    Vector sims(static_cast<Eigen::Index>(atoms_.size()));
    for (std::size_t i = 0; i < atoms_.size(); ++i) sims(static_cast<Eigen::Index>(i)) = projection_inner(query, atoms_[i]);
    return sims;
  }

 private:
  std::vector<GrassmannPoint> atoms_;
  std::vector<int> labels_;
  AtomGram gram_;
};

inline GrassmannDictionary build_dictionary(std::vector<GrassmannPoint> atoms, std::vector<int> labels = {}) {
  return GrassmannDictionary(std::move(atoms), std::move(labels));
}

/// ||X X^T - sum_j y_j D_j D_j^T||_F^2 + lambda ||y||_1 through the
/// quadratic form p + y^T K y - 2 y^T k.
inline double sc_objective(const GrassmannDictionary& dict, const GrassmannPoint& query, const Vector& y,
                           double lambda) {
  const Vector sims = dict.similarities(query);
  return static_cast<double>(dict.order()) + y.dot(dict.gram().similarity() * y) - 2.0 * y.dot(sims) +
         lambda * y.lpNorm<1>();
}

/// Grassmann sparse coding (gSC).
inline CodeVector gsc_encode(const GrassmannDictionary& dict, const GrassmannPoint& query, double lambda,
                             const SolverConfig& cfg = {}) {
  const LassoResult res = detail::sparse_code_from_similarities(dict.gram(), dict.similarities(query), lambda, cfg);
  return CodeVector{res.coeffs, CodingMethod::gSC, CodeParams{lambda, 0, 0.0}, res.converged};
}

/// Grassmann locality-constrained coding (gLC): affine weights over the
/// n_lc chordally nearest atoms.
inline CodeVector glc_encode(const GrassmannDictionary& dict, const GrassmannPoint& query, int n_lc,
                             double ridge = 1e-6, const SolverConfig& = {}) {
  const Vector code = detail::local_code_from_similarities(dict.gram().similarity(), dict.similarities(query),
                                                           static_cast<double>(dict.order()), n_lc, ridge);
  return CodeVector{code, CodingMethod::gLC, CodeParams{0.0, n_lc, ridge}, true};
}

/// Column-major flattening of a tangent matrix.
inline Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

/// Fixed-tangent-space baseline: atoms and queries are sent through log at a
/// single base point and coded as ordinary vectors.
class LogEuclideanCoder {
 public:
  LogEuclideanCoder(const GrassmannDictionary& dict, GrassmannPoint base) : base_(std::move(base)) {
    detail::require_same_shape(dict.atom(0), base_);
    design_.resize(base_.ambient() * base_.order(), static_cast<Eigen::Index>(dict.size()));
    for (std::size_t j = 0; j < dict.size(); ++j)
      design_.col(static_cast<Eigen::Index>(j)) = flatten(log_map(base_, dict.atom(j)).delta());
    gram_ = design_.transpose() * design_;
  }

  const GrassmannPoint& base() const noexcept { return base_; }
  /// Columns are the vectorized log-atoms.
  const Matrix& design() const noexcept { return design_; }

  Vector tangent_coordinates(const GrassmannPoint& query) const { return flatten(log_map(base_, query).delta()); }

  CodeVector encode(const GrassmannPoint& query, double lambda, const SolverConfig& cfg = {}) const {
    const Vector x = tangent_coordinates(query);
    LassoResult res = lasso_solve_gram(gram_, design_.transpose() * x, lambda, cfg);
    return CodeVector{res.coeffs, CodingMethod::logE, CodeParams{lambda, 0, 0.0}, res.converged};
  }

  /// ||log(X) - sum_j y_j log(D_j)||^2 + lambda ||y||_1
  double objective(const GrassmannPoint& query, const Vector& y, double lambda) const {
    return (tangent_coordinates(query) - design_ * y).squaredNorm() + lambda * y.lpNorm<1>();
  }

 private:
  GrassmannPoint base_;
  Matrix design_;
  Matrix gram_;
};

inline CodeVector loge_encode(const GrassmannDictionary& dict, const GrassmannPoint& query, const GrassmannPoint& base,
                              double lambda, const SolverConfig& cfg = {}) {
  return LogEuclideanCoder(dict, base).encode(query, lambda, cfg);
}

struct FrechetOptions {
  int max_iter = 50;
  double step = 1.0;
  double tol = 1e-8;
};

/// Karcher mean by iterated log/exp averaging, started at the first point.
inline GrassmannPoint frechet_mean(std::span<const GrassmannPoint> points, const FrechetOptions& opt = {}) {
  detail::require(!points.empty(), ErrorCode::InvalidArgument, "mean of an empty set");
  GrassmannPoint mean = points.front();
  for (int it = 0; it < opt.max_iter; ++it) {
    Matrix avg = Matrix::Zero(mean.ambient(), mean.order());
    for (const auto& x : points) avg += log_map(mean, x).delta();
    avg /= static_cast<double>(points.size());
    if (avg.norm() < opt.tol) break;
    mean = exp_map(TangentVector(mean, horizontal_projection(mean, opt.step * avg)));
  }
  return mean;
}

/// Point on the manifold represented by a code: the weighted chordal mean of
/// the atoms with the code as weights.
inline GrassmannPoint reconstruct(const GrassmannDictionary& dict, const CodeVector& code) {
  detail::require(code.coeffs.size() == static_cast<Eigen::Index>(dict.size()), ErrorCode::DimensionMismatch,
                  "code length does not match dictionary size");
  detail::require(!code.coeffs.isZero(0.0), ErrorCode::AllZeroCode, "cannot reconstruct from an all-zero code");
  std::vector<double> w(code.coeffs.data(), code.coeffs.data() + code.coeffs.size());
  return weighted_chordal_mean(dict.atoms(), w);
}

}  // namespace grassmann

#endif  // GRASSMANN_CODING_HPP
