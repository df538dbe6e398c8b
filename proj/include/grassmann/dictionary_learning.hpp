#ifndef GRASSMANN_DICTIONARY_LEARNING_HPP
#define GRASSMANN_DICTIONARY_LEARNING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "grassmann/coding.hpp"
#include "grassmann/errors.hpp"
#include "grassmann/geometry.hpp"
#include "grassmann/kernel.hpp"
#include "grassmann/parallel.hpp"
#include "grassmann/sparse_solvers.hpp"

namespace grassmann {

struct DLConfig {
  std::size_t n_atoms = 8;
  int n_iter = 10;
  double lambda = 0.1;
  /// gSC/kgSC or gLC/kgLC; the kernel variant is implied by the learner.
  CodingMethod coding = CodingMethod::gSC;
  int n_lc = 5;
  double ridge = 1e-6;
  std::uint64_t seed = 1;
  /// Early exit once the objective improves by less than this for three
  /// consecutive iterations.
  double tol = 1e-9;
  /// kgDL: training items per atom support, largest |code| first.
  std::size_t max_support = 50;
  SolverConfig solver;
  unsigned threads = 1;

  void validate(std::size_t m) const {
    detail::require(n_atoms >= 1, ErrorCode::InvalidArgument, "n_atoms must be >= 1");
    detail::require(n_iter >= 1, ErrorCode::InvalidArgument, "n_iter must be >= 1");
    detail::require(lambda >= 0.0, ErrorCode::InvalidArgument, "lambda must be >= 0");
    detail::require(max_support >= 1, ErrorCode::InvalidArgument, "max_support must be >= 1");
    detail::require(m >= n_atoms, ErrorCode::InvalidArgument,
                    "need at least as many training points (" + std::to_string(m) + ") as atoms (" +
                        std::to_string(n_atoms) + ")");
    if (is_local_method(coding))
      detail::require(n_lc >= 1 && static_cast<std::size_t>(n_lc) <= n_atoms, ErrorCode::InvalidArgument,
                      "n_lc must lie in [1, n_atoms]");
    solver.validate();
  }

  bool sparse() const { return !is_local_method(coding); }
  double penalty() const { return sparse() ? lambda : 0.0; }
};

struct DLTrace {
  /// Objective after each iteration's atom update.
  std::vector<double> objective;
  /// Objective of the initial dictionary with the first codes.
  double initial_objective = 0.0;
  std::vector<double> max_atom_change;
  std::vector<int> reseeded;
  /// kgDL only: max |A_r^T K A_r - I| over the atoms updated in an iteration.
  std::vector<double> orthonormality_error;
};

namespace detail {

inline std::vector<std::size_t> pick_without_replacement(std::size_t m, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

// Residual ||X^ - sum_j y_j D^_j||^2 from similarities: p - 2 y.k + y^T K y.
inline double quadratic_residual(double p, const Matrix& atom_sims, const Vector& sims, const Vector& y) {
  return p - 2.0 * y.dot(sims) + y.dot(atom_sims * y);
}

// Training indices ordered by decreasing residual, ties to the lower index.
inline std::vector<std::size_t> worst_first(const std::vector<double>& residuals) {
  std::vector<std::size_t> order(residuals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return residuals[a] > residuals[b]; });
  return order;
}

template <class Dict, class Point, class EncodeSparse, class EncodeLocal>
std::vector<Vector> code_all(const Dict& dict, const std::vector<Point>& train, const DLConfig& cfg,
                             EncodeSparse&& sparse, EncodeLocal&& local) {
  std::vector<Vector> codes(train.size());
  parallel_for(train.size(), cfg.threads, [&](std::size_t i) {
    codes[i] = cfg.sparse() ? sparse(dict, train[i], cfg.lambda, cfg.solver).coeffs
                            : local(dict, train[i], cfg.n_lc, cfg.ridge, cfg.solver).coeffs;
  });
  return codes;
}

}  // namespace detail

/// sum_i ||X^_i - sum_j [y_i]_j D^_j||_F^2 + lambda sum_i ||y_i||_1 via the
/// atom/query similarity identities.
inline double dl_objective(const GrassmannDictionary& dict, const std::vector<GrassmannPoint>& train,
                           const std::vector<Vector>& codes, double lambda) {
  detail::require(train.size() == codes.size(), ErrorCode::DimensionMismatch, "one code per training point required");
  const double p = static_cast<double>(dict.order());
  double total = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i)
    total += detail::quadratic_residual(p, dict.gram().similarity(), dict.similarities(train[i]), codes[i]) +
             lambda * codes[i].lpNorm<1>();
  return total;
}

inline double dl_objective(const KernelDictionary& dict, const std::vector<KernelSubspace>& train,
                           const std::vector<Vector>& codes, double lambda) {
  detail::require(train.size() == codes.size(), ErrorCode::DimensionMismatch, "one code per training point required");
  const double p = static_cast<double>(dict.order());
  double total = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i)
    total += detail::quadratic_residual(p, dict.gram().similarity(), dict.similarities(train[i]), codes[i]) +
             lambda * codes[i].lpNorm<1>();
  return total;
}

/// One Gauss-Seidel sweep of closed-form atom updates with codes fixed:
/// D_r <- leading p eigenvectors of
///   S_r = sum_i [y_i]_r (X^_i - sum_{j != r} [y_i]_j D^_j).
/// Atoms that no code uses, or whose S_r vanishes, are replaced by training
/// points in order of decreasing `residuals`. Returns the number replaced.
inline int gdl_update_atoms(std::vector<GrassmannPoint>& atoms, const std::vector<GrassmannPoint>& train,
                            const std::vector<Vector>& codes, const std::vector<double>& residuals) {
  detail::require(codes.size() == train.size() && residuals.size() == train.size(), ErrorCode::DimensionMismatch,
                  "codes and residuals must cover the training set");
  const std::size_t n = atoms.size();
  const Eigen::Index d = atoms.front().ambient();
  const Eigen::Index p = atoms.front().order();
  const auto reseed_order = detail::worst_first(residuals);
  std::size_t next_reseed = 0;
  int reseeded = 0;

  for (std::size_t r = 0; r < n; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    std::vector<Matrix> bases;
    std::vector<double> weights;
    Vector cross = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double yr = codes[i](ri);
      if (yr == 0.0) continue;
      bases.push_back(train[i].basis());
      weights.push_back(yr);
      cross += yr * codes[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double c = cross(static_cast<Eigen::Index>(j));
      if (j == r || c == 0.0) continue;
      bases.push_back(atoms[j].basis());
      weights.push_back(-c);
    }

    // ||S_r||_F^2 through the pairwise projection inner products.
    double s_norm2 = 0.0;
    double scale = 0.0;
    for (std::size_t a = 0; a < bases.size(); ++a) {
      scale += std::abs(weights[a]);
      for (std::size_t b = 0; b < bases.size(); ++b)
        s_norm2 += weights[a] * weights[b] * (bases[a].transpose() * bases[b]).squaredNorm();
    }
    if (bases.empty() || std::sqrt(std::max(0.0, s_norm2)) <= 1e-12 * scale) {
      atoms[r] = train[reseed_order[next_reseed % reseed_order.size()]];
      ++next_reseed;
      ++reseeded;
      continue;
    }
    atoms[r] = leading_eigvecs_weighted_sum(bases, weights, d, p).point;
  }
  return reseeded;
}

struct GdlResult {
  GrassmannDictionary dictionary;
  DLTrace trace;
  /// Codes from the last coding step (against the dictionary before its final update).
  std::vector<Vector> codes;
};

/// Grassmann dictionary learning: alternate coding of every training point
/// with per-atom closed-form updates.
inline GdlResult gdl_learn(const std::vector<GrassmannPoint>& train, const DLConfig& cfg) {
  cfg.validate(train.size());
  for (const auto& x : train) detail::require_same_shape(train.front(), x);
  std::mt19937_64 rng(cfg.seed);
  std::vector<GrassmannPoint> atoms;
  for (std::size_t i : detail::pick_without_replacement(train.size(), cfg.n_atoms, rng)) atoms.push_back(train[i]);

  const double p = static_cast<double>(train.front().order());
  GdlResult out;
  int stalled = 0;
  for (int t = 0; t < cfg.n_iter; ++t) {
    const GrassmannDictionary dict(atoms);
    out.codes = detail::code_all(
        dict, train, cfg, [](const auto& d, const auto& x, double l, const SolverConfig& s) { return gsc_encode(d, x, l, s); },
        [](const auto& d, const auto& x, int k, double rg, const SolverConfig& s) { return glc_encode(d, x, k, rg, s); });
    std::vector<double> residuals(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
      residuals[i] = detail::quadratic_residual(p, dict.gram().similarity(), dict.similarities(train[i]), out.codes[i]);
    if (t == 0) out.trace.initial_objective = dl_objective(dict, train, out.codes, cfg.penalty());

    const std::vector<GrassmannPoint> before = atoms;
    out.trace.reseeded.push_back(gdl_update_atoms(atoms, train, out.codes, residuals));
    double change = 0.0;
    for (std::size_t r = 0; r < atoms.size(); ++r) change = std::max(change, chordal_distance(before[r], atoms[r]));
    out.trace.max_atom_change.push_back(change);

    const double obj = dl_objective(GrassmannDictionary(atoms), train, out.codes, cfg.penalty());
    const double prev = out.trace.objective.empty() ? out.trace.initial_objective : out.trace.objective.back();
    out.trace.objective.push_back(obj);
    stalled = (prev - obj < cfg.tol) ? stalled + 1 : 0;
    if (stalled >= 3) break;
  }
  out.dictionary = GrassmannDictionary(std::move(atoms));
  return out;
}

struct KernelAtomUpdateStats {
  int reseeded = 0;
  int rejected = 0;
  double max_orthonormality_error = 0.0;
};

namespace detail {

// <Gamma_r, Psi^(atom)> = sum_i [y_i]_r ||Psi(X_i)^T Psi||^2 - sum_{j!=r} c_j ||Psi(D_j)^T Psi||^2
inline double kernel_atom_score(const KernelSubspace& atom, const std::vector<KernelSubspace>& train,
                                const std::vector<KernelSubspace>& atoms, const std::vector<Vector>& codes,
                                std::size_t r, const Vector& cross) {
  double s = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const double yr = codes[i](static_cast<Eigen::Index>(r));
    if (yr != 0.0) s += yr * kernel_subspace_inner(train[i], atom);
  }
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    const double c = cross(static_cast<Eigen::Index>(j));
    if (j != r && c != 0.0) s -= c * kernel_subspace_inner(atoms[j], atom);
  }
  return s;
}

}  // namespace detail

/// One Gauss-Seidel sweep of kernel atom updates with codes fixed.
///
/// Atom r is re-expressed over the samples of the training items that use it
/// (largest |[y_i]_r| first, at most cfg.max_support items, dropping those
/// below 1e-6 of the largest). With B(D,Z) = K(D,Z) A_Z A_Z^T K(Z,D),
///   S_r = sum_i [y_i]_r (B(D_r,X_i) - sum_{j != r} [y_i]_j B(D_r,D_j))
/// and A_r holds the leading p generalized eigenvectors of
/// S_r v = mu K(D_r,D_r) v, solved on the range of K(D_r,D_r) so that a
/// singular support Gram is handled. A candidate is kept only if it does not
/// lower <Gamma_r, Psi^(D_r)>; otherwise the previous atom stays.
inline KernelAtomUpdateStats kgdl_update_atoms(std::vector<KernelSubspace>& atoms,
                                               const std::vector<KernelSubspace>& train,
                                               const std::vector<Vector>& codes, const std::vector<double>& residuals,
                                               const DLConfig& cfg) {
  detail::require(codes.size() == train.size() && residuals.size() == train.size(), ErrorCode::DimensionMismatch,
                  "codes and residuals must cover the training set");
  const std::size_t n = atoms.size();
  const Eigen::Index p = atoms.front().order();
  const KernelFunction& kernel = atoms.front().kernel();
  const auto reseed_order = detail::worst_first(residuals);
  std::size_t next_reseed = 0;
  KernelAtomUpdateStats stats;

  for (std::size_t r = 0; r < n; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    Vector cross = Vector::Zero(static_cast<Eigen::Index>(n));
    std::vector<std::size_t> users;
    double biggest = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double yr = codes[i](ri);
      if (yr == 0.0) continue;
      users.push_back(i);
      cross += yr * codes[i];
      biggest = std::max(biggest, std::abs(yr));
    }
    auto reseed = [&] {
      const KernelSubspace candidate = train[reseed_order[next_reseed % reseed_order.size()]];
      ++next_reseed;
      const double old_score = detail::kernel_atom_score(atoms[r], train, atoms, codes, r, cross);
      const double new_score = detail::kernel_atom_score(candidate, train, atoms, codes, r, cross);
      if (users.empty() || new_score >= old_score - 1e-12 * (1.0 + std::abs(old_score))) {
        atoms[r] = candidate;
        ++stats.reseeded;
      } else {
        ++stats.rejected;
      }
    };
    if (users.empty()) {
      reseed();
      continue;
    }

    std::vector<std::size_t> support;
    for (std::size_t i : users)
      if (std::abs(codes[i](ri)) >= 1e-6 * biggest) support.push_back(i);
    std::stable_sort(support.begin(), support.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(codes[a](ri)) > std::abs(codes[b](ri));
    });
    if (support.size() > cfg.max_support) support.resize(cfg.max_support);
    Eigen::Index cols = 0;
    for (std::size_t i : support) cols += train[i].samples().cols();
    auto samples = std::make_shared<Matrix>(train.front().sample_dim(), cols);
    cols = 0;
    for (std::size_t i : support) {
      samples->middleCols(cols, train[i].samples().cols()) = train[i].samples();
      cols += train[i].samples().cols();
    }

    Matrix k_dd = kernel.gram(*samples, *samples);
    k_dd = 0.5 * (k_dd + k_dd.transpose());
    Matrix s = Matrix::Zero(cols, cols);
    for (std::size_t i : users) {
      const Matrix g = kernel.gram(*samples, train[i].samples()) * train[i].coeff();
      s += codes[i](ri) * (g * g.transpose());
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double c = cross(static_cast<Eigen::Index>(j));
      if (j == r || c == 0.0) continue;
      const Matrix g = kernel.gram(*samples, atoms[j].samples()) * atoms[j].coeff();
      s -= c * (g * g.transpose());
    }
    s = 0.5 * (s + s.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> keig(k_dd);
    const Vector& kv = keig.eigenvalues();
    const double ktop = kv.maxCoeff();
    std::vector<Eigen::Index> range;
    for (Eigen::Index i = kv.size() - 1; i >= 0; --i)
      if (kv(i) > 1e-8 * ktop) range.push_back(i);
    if (ktop <= 0.0 || static_cast<Eigen::Index>(range.size()) < p) {
      reseed();
      continue;
    }
    Matrix whiten(cols, static_cast<Eigen::Index>(range.size()));
    for (std::size_t a = 0; a < range.size(); ++a)
      whiten.col(static_cast<Eigen::Index>(a)) = keig.eigenvectors().col(range[a]) / std::sqrt(kv(range[a]));
    Matrix reduced = whiten.transpose() * s * whiten;
    reduced = 0.5 * (reduced + reduced.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> seig(reduced);
    if (seig.info() != Eigen::Success) {
      ++stats.rejected;
      continue;
    }
    const Eigen::Index m = reduced.rows();
    Matrix top(m, p);
    Vector top_vals(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      top.col(k) = seig.eigenvectors().col(m - 1 - k);
      top_vals(k) = seig.eigenvalues()(m - 1 - k);
    }
    KernelSubspace candidate(samples, whiten * top, kernel, top_vals);

    const double old_score = detail::kernel_atom_score(atoms[r], train, atoms, codes, r, cross);
    const double new_score = (candidate.coeff().transpose() * s * candidate.coeff()).trace();
    if (new_score >= old_score - 1e-12 * (1.0 + std::abs(old_score))) {
      const Matrix g = candidate.coeff().transpose() * k_dd * candidate.coeff();
      stats.max_orthonormality_error = std::max(
          stats.max_orthonormality_error, (g - Matrix::Identity(p, p)).cwiseAbs().maxCoeff());
      atoms[r] = std::move(candidate);
    } else {
      ++stats.rejected;
    }
  }
  return stats;
}

struct KgdlResult {
  KernelDictionary dictionary;
  DLTrace trace;
  std::vector<Vector> codes;
};

/// Kernelized Grassmann dictionary learning over RKHS subspaces.
inline KgdlResult kgdl_learn(const std::vector<KernelSubspace>& train, const DLConfig& cfg) {
  cfg.validate(train.size());
  std::mt19937_64 rng(cfg.seed);
  std::vector<KernelSubspace> atoms;
  for (std::size_t i : detail::pick_without_replacement(train.size(), cfg.n_atoms, rng)) atoms.push_back(train[i]);
  const double p = static_cast<double>(train.front().order());

  KgdlResult out;
  int stalled = 0;
  for (int t = 0; t < cfg.n_iter; ++t) {
    const KernelDictionary dict(atoms);
    out.codes = detail::code_all(
        dict, train, cfg,
        [](const auto& d, const auto& x, double l, const SolverConfig& s) { return kgsc_encode(d, x, l, s); },
        [](const auto& d, const auto& x, int k, double rg, const SolverConfig& s) { return kglc_encode(d, x, k, rg, s); });
    std::vector<double> residuals(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
      residuals[i] = detail::quadratic_residual(p, dict.gram().similarity(), dict.similarities(train[i]), out.codes[i]);
    if (t == 0) out.trace.initial_objective = dl_objective(dict, train, out.codes, cfg.penalty());

    const std::vector<KernelSubspace> before = atoms;
    const KernelAtomUpdateStats stats = kgdl_update_atoms(atoms, train, out.codes, residuals, cfg);
    out.trace.reseeded.push_back(stats.reseeded);
    out.trace.orthonormality_error.push_back(stats.max_orthonormality_error);
    double change = 0.0;
    for (std::size_t r = 0; r < atoms.size(); ++r) {
      const double sim = kernel_subspace_inner(before[r], atoms[r]);
      change = std::max(change, std::sqrt(std::max(0.0, 2.0 * p - 2.0 * sim)));
    }
    out.trace.max_atom_change.push_back(change);

    const double obj = dl_objective(KernelDictionary(atoms), train, out.codes, cfg.penalty());
    const double prev = out.trace.objective.empty() ? out.trace.initial_objective : out.trace.objective.back();
    out.trace.objective.push_back(obj);
    stalled = (prev - obj < cfg.tol) ? stalled + 1 : 0;
    if (stalled >= 3) break;
  }
  out.dictionary = KernelDictionary(std::move(atoms));
  return out;
}

/// Builds the RKHS bases of raw training sample sets, then learns.
inline KgdlResult kgdl_learn(const std::vector<Matrix>& train_samples, Eigen::Index p, const KernelFunction& kernel,
                             const DLConfig& cfg) {
  std::vector<KernelSubspace> train;
  train.reserve(train_samples.size());
  for (const auto& x : train_samples) train.push_back(gram_basis(x, p, kernel));
  return kgdl_learn(train, cfg);
}

}  // namespace grassmann

#endif  // GRASSMANN_DICTIONARY_LEARNING_HPP
