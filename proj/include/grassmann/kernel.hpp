#ifndef GRASSMANN_KERNEL_HPP
#define GRASSMANN_KERNEL_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grassmann/coding.hpp"
#include "grassmann/errors.hpp"
#include "grassmann/geometry.hpp"
#include "grassmann/sparse_solvers.hpp"

namespace grassmann {

enum class KernelKind { Linear, Gaussian, Polynomial };

/// Pointwise kernel on R^d. Gaussian: exp(-gamma ||a-b||^2); polynomial:
/// (a.b + offset)^degree.
struct KernelFunction {
  KernelKind kind = KernelKind::Linear;
  double gamma = 1.0;
  int degree = 2;
  double offset = 1.0;

  static KernelFunction linear() { return {}; }
  static KernelFunction gaussian(double gamma) {
    detail::require(gamma > 0.0 && std::isfinite(gamma), ErrorCode::InvalidArgument, "gaussian gamma must be > 0");
    return {KernelKind::Gaussian, gamma, 2, 1.0};
  }
  static KernelFunction polynomial(int degree, double offset) {
    detail::require(degree >= 1 && offset >= 0.0, ErrorCode::InvalidArgument,
                    "polynomial kernel needs degree >= 1 and offset >= 0");
    return {KernelKind::Polynomial, 1.0, degree, offset};
  }

  /// Parses "linear", "gaussian:GAMMA" or "polynomial:DEGREE:OFFSET".
  static KernelFunction parse(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
    try {
      if (parts.size() == 1 && parts[0] == "linear") return linear();
      if (parts.size() == 2 && parts[0] == "gaussian") return gaussian(std::stod(parts[1]));
      if (parts.size() == 3 && parts[0] == "polynomial") return polynomial(std::stoi(parts[1]), std::stod(parts[2]));
    } catch (const std::logic_error&) {
      // fall through to the error below
    }
    throw Error(ErrorCode::InvalidArgument, "bad kernel spec '" + spec + "'");
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
      case KernelKind::Linear: os << "linear"; break;
      case KernelKind::Gaussian: os << "gaussian:" << gamma; break;
      case KernelKind::Polynomial: os << "polynomial:" << degree << ":" << offset; break;
    }
    return os.str();
  }

  bool operator==(const KernelFunction& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case KernelKind::Linear: return true;
      case KernelKind::Gaussian: return gamma == o.gamma;
      case KernelKind::Polynomial: return degree == o.degree && offset == o.offset;
    }
    return false;
  }

  double operator()(const Vector& a, const Vector& b) const {
    switch (kind) {
      case KernelKind::Linear: return a.dot(b);
      case KernelKind::Gaussian: return std::exp(-gamma * (a - b).squaredNorm());
      case KernelKind::Polynomial: return std::pow(a.dot(b) + offset, degree);
    }
    return 0.0;
  }

  /// Cross Gram block: [K]_ij = k(z_i, x_j) over the columns of z and x.
  Matrix gram(const Matrix& z, const Matrix& x) const {
    detail::require(z.rows() == x.rows(), ErrorCode::DimensionMismatch, "sample dimensions differ");
    const Matrix inner = z.transpose() * x;
    switch (kind) {
      case KernelKind::Linear: return inner;
      case KernelKind::Gaussian: {
        const Vector zn = z.colwise().squaredNorm().transpose();
        const Vector xn = x.colwise().squaredNorm().transpose();
        Matrix out(inner.rows(), inner.cols());
        for (Eigen::Index j = 0; j < out.cols(); ++j)
          for (Eigen::Index i = 0; i < out.rows(); ++i)
            out(i, j) = std::exp(-gamma * std::max(0.0, zn(i) + xn(j) - 2.0 * inner(i, j)));
        return out;
      }
      case KernelKind::Polynomial:
        return (inner.array() + offset).pow(static_cast<double>(degree)).matrix();
    }
    return inner;
  }
};

/// Orthonormal basis of the span of Phi(samples) in the RKHS, held
/// implicitly as Psi = Phi(samples) * coeff with coeff^T K coeff = I_p.
class KernelSubspace {
 public:
  KernelSubspace() = default;

  KernelSubspace(std::shared_ptr<const Matrix> samples, Matrix coeff, KernelFunction kernel, Vector eigvals = {})
      : samples_(std::move(samples)), coeff_(std::move(coeff)), eigvals_(std::move(eigvals)), kernel_(kernel) {
    detail::require(samples_ != nullptr, ErrorCode::InvalidArgument, "kernel subspace needs samples");
    detail::require(coeff_.rows() == samples_->cols() && coeff_.cols() >= 1, ErrorCode::DimensionMismatch,
                    "coefficient matrix " + detail::shape(coeff_) + " does not match " +
                        std::to_string(samples_->cols()) + " samples");
  }

  const Matrix& samples() const { return *samples_; }
  const std::shared_ptr<const Matrix>& samples_ptr() const noexcept { return samples_; }
  const Matrix& coeff() const noexcept { return coeff_; }
  const Vector& eigvals() const noexcept { return eigvals_; }
  const KernelFunction& kernel() const noexcept { return kernel_; }
  Eigen::Index order() const noexcept { return coeff_.cols(); }
  Eigen::Index sample_dim() const { return samples_->rows(); }

  /// max |A^T K A - I|.
  double orthonormality_error() const {
    const Matrix k = kernel_.gram(*samples_, *samples_);
    const Matrix g = coeff_.transpose() * k * coeff_;
    return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
  }

 private:
  std::shared_ptr<const Matrix> samples_;
  Matrix coeff_;
  Vector eigvals_;
  KernelFunction kernel_;
};

/// Leading p eigenpairs of the sample Gram matrix: A = U_p S_p^{-1/2}.
inline KernelSubspace gram_basis(std::shared_ptr<const Matrix> samples, Eigen::Index p, const KernelFunction& kernel) {
  detail::require(samples != nullptr, ErrorCode::InvalidArgument, "null sample matrix");
  detail::require(p >= 1 && samples->cols() >= p, ErrorCode::RankDeficient,
                  "need at least p = " + std::to_string(p) + " samples, got " + std::to_string(samples->cols()));
  Matrix k = kernel.gram(*samples, *samples);
  k = 0.5 * (k + k.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  detail::require(eig.info() == Eigen::Success, ErrorCode::NotConverged, "eigensolver failed on sample Gram");
  const Vector& vals = eig.eigenvalues();
  const Eigen::Index q = vals.size();
  const double top = vals(q - 1);
  detail::require(vals(0) >= -AtomGram::kPsdTol * std::abs(top), ErrorCode::NotPSD, "sample Gram is not PSD");
  detail::require(top > 0.0 && vals(q - p) > 1e-10 * top, ErrorCode::RankDeficient,
                  "sample Gram has rank below " + std::to_string(p));
  Matrix coeff(q, p);
  Vector kept(p);
  for (Eigen::Index k2 = 0; k2 < p; ++k2) {
    kept(k2) = vals(q - 1 - k2);
    coeff.col(k2) = eig.eigenvectors().col(q - 1 - k2) / std::sqrt(kept(k2));
  }
  return KernelSubspace(std::move(samples), std::move(coeff), kernel, std::move(kept));
}

inline KernelSubspace gram_basis(const Matrix& samples, Eigen::Index p, const KernelFunction& kernel) {
  return gram_basis(std::make_shared<const Matrix>(samples), p, kernel);
}

namespace detail {

inline void require_compatible(const KernelSubspace& z, const KernelSubspace& x) {
  require(z.kernel() == x.kernel(), ErrorCode::KernelMismatch,
          "subspaces use different kernels: " + z.kernel().to_string() + " vs " + x.kernel().to_string());
  require(z.sample_dim() == x.sample_dim(), ErrorCode::DimensionMismatch, "sample dimensions differ");
}

}  // namespace detail

/// The p x p cross block Psi(Z)^T Psi(X) = A_Z^T K(Z,X) A_X.
inline Matrix kernel_cross_block(const KernelSubspace& z, const KernelSubspace& x) {
  detail::require_compatible(z, x);
  return z.coeff().transpose() * z.kernel().gram(z.samples(), x.samples()) * x.coeff();
}

/// ||A_Z^T K(Z,X) A_X||_F^2, the coding similarity between two RKHS subspaces.
inline double kernel_subspace_inner(const KernelSubspace& z, const KernelSubspace& x) {
  return kernel_cross_block(z, x).squaredNorm();
}

/// Dictionary of RKHS subspaces with the precomputed atom similarity factorization.
class KernelDictionary {
 public:
  KernelDictionary() = default;

  KernelDictionary(std::vector<KernelSubspace> atoms, std::vector<int> labels = {})
      : atoms_(std::move(atoms)), labels_(std::move(labels)) {
    detail::require(!atoms_.empty(), ErrorCode::InvalidArgument, "dictionary needs at least one atom");
    detail::require(labels_.empty() || labels_.size() == atoms_.size(), ErrorCode::DimensionMismatch,
                    "label count does not match atom count");
    const auto n = static_cast<Eigen::Index>(atoms_.size());
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      detail::require_compatible(atoms_.front(), atoms_[i]);
      detail::require(atoms_[i].order() == atoms_.front().order(), ErrorCode::DimensionMismatch,
                      "kernel atoms have different orders");
      for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel_subspace_inner(atoms_[i], atoms_[j]);
    }
    gram_ = AtomGram(k);
  }

  std::size_t size() const noexcept { return atoms_.size(); }
  Eigen::Index order() const { return atoms_.front().order(); }
  const KernelFunction& kernel() const { return atoms_.front().kernel(); }
  const std::vector<KernelSubspace>& atoms() const noexcept { return atoms_; }
  const KernelSubspace& atom(std::size_t i) const { return atoms_.at(i); }
  const std::vector<int>& labels() const noexcept { return labels_; }
  bool labeled() const noexcept { return !labels_.empty(); }
  const AtomGram& gram() const noexcept { return gram_; }

  Vector similarities(const KernelSubspace& query) const {
    detail::require(query.order() == order(), ErrorCode::DimensionMismatch, "query order differs from atoms");
    Vector sims(static_cast<Eigen::Index>(atoms_.size()));
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      sims(static_cast<Eigen::Index>(i)) = kernel_subspace_inner(query, atoms_[i]);
    return sims;
  }

 private:
  std::vector<KernelSubspace> atoms_;
  std::vector<int> labels_;
  AtomGram gram_;
};

inline KernelDictionary build_kernel_dictionary(std::vector<KernelSubspace> atoms, std::vector<int> labels = {}) {
  return KernelDictionary(std::move(atoms), std::move(labels));
}

/// ||Psi^(X) - sum_j y_j Psi^(D_j)||_F^2 + lambda ||y||_1 in quadratic form.
inline double ksc_objective(const KernelDictionary& dict, const KernelSubspace& query, const Vector& y,
                            double lambda) {
  const Vector sims = dict.similarities(query);
  return static_cast<double>(dict.order()) + y.dot(dict.gram().similarity() * y) - 2.0 * y.dot(sims) +
         lambda * y.lpNorm<1>();
}

/// Kernel Grassmann sparse coding (kgSC).
inline CodeVector kgsc_encode(const KernelDictionary& dict, const KernelSubspace& query, double lambda,
                              const SolverConfig& cfg = {}) {
  const LassoResult res = detail::sparse_code_from_similarities(dict.gram(), dict.similarities(query), lambda, cfg);
  return CodeVector{res.coeffs, CodingMethod::kgSC, CodeParams{lambda, 0, 0.0}, res.converged};
}

/// Kernel Grassmann locality-constrained coding (kgLC).
inline CodeVector kglc_encode(const KernelDictionary& dict, const KernelSubspace& query, int n_lc,
                              double ridge = 1e-6, const SolverConfig& = {}) {
  const Vector code = detail::local_code_from_similarities(dict.gram().similarity(), dict.similarities(query),
                                                           static_cast<double>(dict.order()), n_lc, ridge);
  return CodeVector{code, CodingMethod::kgLC, CodeParams{0.0, n_lc, ridge}, true};
}

/// gamma = 1 / (2 median^2) over pairwise distances of all pooled columns.
/// At most `max_pool` columns are used, taken at an even stride.
inline double median_heuristic_gamma(const std::vector<Matrix>& sample_sets, std::size_t max_pool = 2000) {
  std::vector<Vector> pool;
  for (const auto& s : sample_sets)
    for (Eigen::Index j = 0; j < s.cols(); ++j) pool.emplace_back(s.col(j));
  detail::require(pool.size() >= 2, ErrorCode::InvalidArgument, "median heuristic needs at least two samples");
  const std::size_t stride = (pool.size() + max_pool - 1) / max_pool;
  std::vector<double> dists;
  for (std::size_t i = 0; i < pool.size(); i += stride)
    for (std::size_t j = i + stride; j < pool.size(); j += stride) dists.push_back((pool[i] - pool[j]).norm());
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  const double med = *mid;
  detail::require(med > 0.0, ErrorCode::InvalidArgument, "all samples coincide; median distance is zero");
  return 1.0 / (2.0 * med * med);
}

}  // namespace grassmann

#endif  // GRASSMANN_KERNEL_HPP
