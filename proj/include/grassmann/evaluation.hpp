#ifndef GRASSMANN_EVALUATION_HPP
#define GRASSMANN_EVALUATION_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grassmann/coding.hpp"
#include "grassmann/errors.hpp"
#include "grassmann/geometry.hpp"
#include "grassmann/kernel.hpp"
#include "grassmann/parallel.hpp"
#include "grassmann/sparse_solvers.hpp"

namespace grassmann {

// ---------------------------------------------------------------------------
// Residual-error classification

struct ClassDecision {
  int label = 0;
  /// Sorted ascending; residuals[k] belongs to classes[k].
  std::vector<int> classes;
  std::vector<double> residuals;
};

namespace detail {

inline std::vector<int> sorted_classes(const std::vector<int>& labels) {
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

inline Vector class_part(const Vector& y, const std::vector<int>& labels, int c) {
  Vector yc = y;
  for (Eigen::Index j = 0; j < y.size(); ++j)
    if (labels[static_cast<std::size_t>(j)] != c) yc(j) = 0.0;
  return yc;
}

template <class ResidualFn>
ClassDecision decide(const std::vector<int>& labels, const Vector& y, ResidualFn&& residual) {
  require(!labels.empty(), ErrorCode::InvalidArgument, "residual classification needs a labeled dictionary");
  require(y.size() == static_cast<Eigen::Index>(labels.size()), ErrorCode::DimensionMismatch,
          "code length does not match dictionary size");
  ClassDecision out;
  out.classes = sorted_classes(labels);
  double best = std::numeric_limits<double>::infinity();
  for (int c : out.classes) {
    const double e = residual(class_part(y, labels, c));
    out.residuals.push_back(e);
    if (e < best) {
      best = e;
      out.label = c;
    }
  }
  return out;
}

}  // namespace detail

/// eps_c = ||X^ - sum_{l_j = c} y_j D^_j||_F^2, evaluated as
/// p + y_c^T K y_c - 2 y_c^T k; argmin class wins, ties to the lowest id.
inline ClassDecision residual_classify(const GrassmannDictionary& dict, const GrassmannPoint& query,
                                       const CodeVector& code) {
  const Vector sims = dict.similarities(query);
  const double p = static_cast<double>(dict.order());
  const Matrix& k = dict.gram().similarity();
  return detail::decide(dict.labels(), code.coeffs,
                        [&](const Vector& yc) { return p + yc.dot(k * yc) - 2.0 * yc.dot(sims); });
}

/// Kernelized residual with RKHS subspace similarities.
inline ClassDecision residual_classify(const KernelDictionary& dict, const KernelSubspace& query,
                                       const CodeVector& code) {
  const Vector sims = dict.similarities(query);
  const double p = static_cast<double>(dict.order());
  const Matrix& k = dict.gram().similarity();
  return detail::decide(dict.labels(), code.coeffs,
                        [&](const Vector& yc) { return p + yc.dot(k * yc) - 2.0 * yc.dot(sims); });
}

/// Tangent-space residual ||log(X) - sum_{l_j = c} y_j log(D_j)||^2 for the
/// Log-Euclidean baseline.
inline ClassDecision residual_classify(const LogEuclideanCoder& coder, const std::vector<int>& labels,
                                       const GrassmannPoint& query, const CodeVector& code) {
  const Vector x = coder.tangent_coordinates(query);
  return detail::decide(labels, code.coeffs,
                        [&](const Vector& yc) { return (x - coder.design() * yc).squaredNorm(); });
}

// ---------------------------------------------------------------------------
// Synthetic data

enum class SyntheticBase { Identity, Random };
enum class Difficulty { Easy, Medium, Hard, VeryHard };

/// Tangent standard deviation of each difficulty preset, in radians.
inline double preset_sigma(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return 0.1;
    case Difficulty::Medium: return 0.3;
    case Difficulty::Hard: return 0.6;
    case Difficulty::VeryHard: return 0.9;
  }
  return 0.1;
}

inline Difficulty parse_difficulty(const std::string& s) {
  if (s == "easy") return Difficulty::Easy;
  if (s == "medium") return Difficulty::Medium;
  if (s == "hard") return Difficulty::Hard;
  if (s == "very_hard" || s == "veryhard" || s == "very-hard") return Difficulty::VeryHard;
  throw Error(ErrorCode::InvalidArgument, "unknown difficulty '" + s + "'");
}

struct SyntheticSpec {
  int classes = 4;
  Eigen::Index p = 2;
  Eigen::Index d = 6;
  /// Identity: class means sit at a fixed frame around the canonical point.
  /// Random: every class mean is a uniformly random point.
  SyntheticBase base = SyntheticBase::Identity;
  double sigma = 0.1;
  /// Geodesic offset of the Identity-mode class means from the canonical point.
  double mean_offset = 0.8;
  /// false: sigma is the RMS geodesic displacement, so each of the (d-p)p
  /// horizontal coordinates gets std sigma / sqrt((d-p)p).
  /// true: every coordinate gets std sigma.
  bool per_entry_sigma = false;
  int dict_per_class = 8;
  int query_per_class = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    detail::require(classes >= 1 && dict_per_class >= 1 && query_per_class >= 1, ErrorCode::InvalidArgument,
                    "synthetic counts must be >= 1");
    detail::require(p >= 1 && d > p, ErrorCode::InvalidArgument, "synthetic manifold needs 1 <= p < d");
    detail::require(sigma > 0.0, ErrorCode::InvalidArgument, "sigma must be > 0");
    if (base == SyntheticBase::Identity)
      detail::require(classes <= (d - p) * p, ErrorCode::InvalidArgument,
                      "identity-base layout supports at most (d-p)*p classes");
  }

  /// Experiment #1 layout (identity tangent space) at the given difficulty.
  static SyntheticSpec experiment1(Difficulty diff, std::uint64_t seed) {
    SyntheticSpec s;
    s.base = SyntheticBase::Identity;
    s.sigma = preset_sigma(diff);
    s.seed = seed;
    return s;
  }

  /// Experiment #2 layout (random tangent spaces) at the given difficulty.
  static SyntheticSpec experiment2(Difficulty diff, std::uint64_t seed) {
    SyntheticSpec s = experiment1(diff, seed);
    s.base = SyntheticBase::Random;
    return s;
  }
};

struct LabeledPoints {
  std::vector<GrassmannPoint> points;
  std::vector<int> labels;
};

struct SyntheticDataset {
  LabeledPoints dictionary;
  LabeledPoints queries;
  std::vector<GrassmannPoint> class_means;
};

/// Tangent direction at the canonical point used for the class-k mean: a
/// single unit entry in the horizontal block, distinct for every class.
inline Matrix class_mean_direction(Eigen::Index d, Eigen::Index p, int k) {
  const Eigen::Index rows = d - p;
  Matrix e = Matrix::Zero(d, p);
  e(p + k % rows, (k + k / rows) % p) = 1.0;
  return e;
}

/// Samples of class k are exp_{M_k}(V) with V the horizontal projection of
/// an i.i.d. Gaussian matrix at the class mean M_k. Deterministic in
/// spec.seed; per class the mean is drawn first, then dictionary samples,
/// then queries.
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const double entry_sigma =
      spec.per_entry_sigma ? spec.sigma : spec.sigma / std::sqrt(static_cast<double>((spec.d - spec.p) * spec.p));
  const GrassmannPoint origin = canonical_point(spec.d, spec.p);
  SyntheticDataset out;
  for (int k = 0; k < spec.classes; ++k) {
    GrassmannPoint mean = spec.base == SyntheticBase::Identity
                              ? exp_map(TangentVector(origin, spec.mean_offset * class_mean_direction(spec.d, spec.p, k)))
                              : random_point(spec.d, spec.p, rng);
    for (int i = 0; i < spec.dict_per_class; ++i) {
      out.dictionary.points.push_back(exp_map(random_tangent(mean, entry_sigma, rng)));
      out.dictionary.labels.push_back(k);
    }
    for (int i = 0; i < spec.query_per_class; ++i) {
      out.queries.points.push_back(exp_map(random_tangent(mean, entry_sigma, rng)));
      out.queries.labels.push_back(k);
    }
    out.class_means.push_back(std::move(mean));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

enum class LogEBase { Canonical, Frechet };

struct MethodConfig {
  CodingMethod method = CodingMethod::gSC;
  double lambda = 0.1;
  int n_lc = 5;
  double ridge = 1e-6;
  KernelFunction kernel = KernelFunction::linear();
  LogEBase loge_base = LogEBase::Canonical;
  SolverConfig solver;
  unsigned threads = 1;
};

struct ExperimentMetrics {
  double accuracy = 0.0;
  /// confusion[true][predicted], both indexed by position in `classes`.
  std::vector<std::vector<int>> confusion;
  std::vector<int> classes;
  std::vector<int> predictions;
  std::size_t queries = 0;
  std::size_t not_converged = 0;
  /// Wall-clock seconds per query spent coding; not reproducible bit-for-bit.
  double mean_code_seconds = 0.0;
  double objective_mean = 0.0;
  double objective_std = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

struct QueryOutcome {
  int predicted = 0;
  bool converged = true;
  double objective = 0.0;
  double seconds = 0.0;
};

inline ExperimentMetrics summarize(const LabeledPoints& queries, const std::vector<int>& dict_labels,
                                   const std::vector<QueryOutcome>& outcomes) {
  ExperimentMetrics m;
  m.classes = sorted_classes(dict_labels);
  for (int c : sorted_classes(queries.labels))
    if (!std::binary_search(m.classes.begin(), m.classes.end(), c)) m.classes.insert(std::upper_bound(m.classes.begin(), m.classes.end(), c), c);
  std::map<int, std::size_t> pos;
  for (std::size_t i = 0; i < m.classes.size(); ++i) pos[m.classes[i]] = i;
  m.confusion.assign(m.classes.size(), std::vector<int>(m.classes.size(), 0));
  m.queries = outcomes.size();
  std::size_t correct = 0;
  std::vector<double> objectives;
  double seconds = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    m.predictions.push_back(o.predicted);
    if (o.predicted == queries.labels[i]) ++correct;
    ++m.confusion[pos.at(queries.labels[i])][pos.at(o.predicted)];
    if (!o.converged) ++m.not_converged;
    objectives.push_back(o.objective);
    seconds += o.seconds;
  }
  m.accuracy = m.queries ? static_cast<double>(correct) / static_cast<double>(m.queries) : 0.0;
  m.mean_code_seconds = m.queries ? seconds / static_cast<double>(m.queries) : 0.0;
  std::tie(m.objective_mean, m.objective_std) = mean_std(objectives);
  return m;
}

template <class Fn>
std::vector<QueryOutcome> run_queries(std::size_t n, unsigned threads, Fn&& fn) {
  std::vector<QueryOutcome> outcomes(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    outcomes[i] = fn(i);
    outcomes[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  return outcomes;
}

}  // namespace detail

/// Codes every query against the labeled dictionary set and classifies it by
/// class residual.
inline ExperimentMetrics run_experiment(const LabeledPoints& dictionary, const LabeledPoints& queries,
                                        const MethodConfig& cfg) {
  detail::require(dictionary.points.size() == dictionary.labels.size() &&
                      queries.points.size() == queries.labels.size(),
                  ErrorCode::DimensionMismatch, "points and labels differ in length");
  const std::size_t nq = queries.points.size();
  std::vector<detail::QueryOutcome> outcomes;

  switch (cfg.method) {
    case CodingMethod::gSC:
    case CodingMethod::gLC: {
      const GrassmannDictionary dict(dictionary.points, dictionary.labels);
      outcomes = detail::run_queries(nq, cfg.threads, [&](std::size_t i) {
        const auto& x = queries.points[i];
        const CodeVector code = cfg.method == CodingMethod::gSC ? gsc_encode(dict, x, cfg.lambda, cfg.solver)
                                                                : glc_encode(dict, x, cfg.n_lc, cfg.ridge, cfg.solver);
        const double penalty = cfg.method == CodingMethod::gSC ? cfg.lambda : 0.0;
        return detail::QueryOutcome{residual_classify(dict, x, code).label, code.converged,
                                    sc_objective(dict, x, code.coeffs, penalty), 0.0};
      });
      break;
    }
    case CodingMethod::kgSC:
    case CodingMethod::kgLC: {
      std::vector<KernelSubspace> atoms;
      for (const auto& a : dictionary.points) atoms.push_back(gram_basis(a.basis(), a.order(), cfg.kernel));
      const KernelDictionary dict(std::move(atoms), dictionary.labels);
      outcomes = detail::run_queries(nq, cfg.threads, [&](std::size_t i) {
        const auto& x = queries.points[i];
        const KernelSubspace kx = gram_basis(x.basis(), x.order(), cfg.kernel);
        const CodeVector code = cfg.method == CodingMethod::kgSC ? kgsc_encode(dict, kx, cfg.lambda, cfg.solver)
                                                                 : kglc_encode(dict, kx, cfg.n_lc, cfg.ridge, cfg.solver);
        const double penalty = cfg.method == CodingMethod::kgSC ? cfg.lambda : 0.0;
        return detail::QueryOutcome{residual_classify(dict, kx, code).label, code.converged,
                                    ksc_objective(dict, kx, code.coeffs, penalty), 0.0};
      });
      break;
    }
    case CodingMethod::logE: {
      const GrassmannDictionary dict(dictionary.points, dictionary.labels);
      const GrassmannPoint base = cfg.loge_base == LogEBase::Canonical
                                      ? canonical_point(dict.ambient(), dict.order())
                                      : frechet_mean(dictionary.points);
      const LogEuclideanCoder coder(dict, base);
      outcomes = detail::run_queries(nq, cfg.threads, [&](std::size_t i) {
        const auto& x = queries.points[i];
        const CodeVector code = coder.encode(x, cfg.lambda, cfg.solver);
        return detail::QueryOutcome{residual_classify(coder, dictionary.labels, x, code).label, code.converged,
                                    coder.objective(x, code.coeffs, cfg.lambda), 0.0};
      });
      break;
    }
  }
  return detail::summarize(queries, dictionary.labels, outcomes);
}

inline ExperimentMetrics run_experiment(const SyntheticDataset& data, const MethodConfig& cfg) {
  return run_experiment(data.dictionary, data.queries, cfg);
}

struct TrialSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<ExperimentMetrics> trials;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
};

/// Regenerates the synthetic data for every seed and runs the method on it.
inline TrialSummary run_trials(SyntheticSpec spec, const MethodConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  TrialSummary out;
  std::vector<double> acc;
  for (std::uint64_t s : seeds) {
    spec.seed = s;
    out.seeds.push_back(s);
    out.trials.push_back(run_experiment(generate_synthetic(spec), cfg));
    acc.push_back(out.trials.back().accuracy);
  }
  std::tie(out.accuracy_mean, out.accuracy_std) = detail::mean_std(acc);
  return out;
}

/// Seeds 1..n, the default ten-trial protocol.
inline std::vector<std::uint64_t> default_seeds(std::size_t n = 10) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i + 1;
  return s;
}

}  // namespace grassmann

#endif  // GRASSMANN_EVALUATION_HPP
