#ifndef GRASSMANN_SPARSE_SOLVERS_HPP
#define GRASSMANN_SPARSE_SOLVERS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "grassmann/errors.hpp"
#include "grassmann/geometry.hpp"

namespace grassmann {

struct SolverConfig {
  int max_iter = 10000;
  double tol = 1e-8;
  // Reserved for randomized restarts; the default solver is deterministic.
  std::uint64_t seed = 0;
  bool record_history = false;

  void validate() const {
    detail::require(max_iter >= 1, ErrorCode::InvalidArgument, "max_iter must be >= 1");
    detail::require(tol > 0.0, ErrorCode::InvalidArgument, "tol must be positive");
  }
};

/// min_y ||target - design * y||^2 + lambda * ||y||_1
struct LassoProblem {
  Matrix design;
  Vector target;
  double lambda = 0.0;
};

struct LassoResult {
  Vector coeffs;
  bool converged = false;
  int iterations = 0;
  /// Objective value of `coeffs` (for LassoProblem, including ||target||^2).
  double objective = 0.0;
  /// Objective per iteration when SolverConfig::record_history is set.
  std::vector<double> history;
};

namespace detail {

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

inline double quadratic_objective(const Matrix& q, const Vector& c, double lambda, const Vector& y) {
  return y.dot(q * y) - 2.0 * c.dot(y) + lambda * y.lpNorm<1>();
}

// Largest violation of the subgradient optimality conditions.
inline double kkt_violation(const Matrix& q, const Vector& c, double lambda, const Vector& y) {
  const Vector g = 2.0 * (q * y - c);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double v = y(j) != 0.0 ? std::abs(g(j) + lambda * sign(y(j))) : std::max(0.0, std::abs(g(j)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

inline Vector soft_threshold(const Vector& v, double t) {
  return v.unaryExpr([t](double x) { return sign(x) * std::max(std::abs(x) - t, 0.0); });
}

// Solve the stationarity equations restricted to the support and sign pattern
// of `y`. Returns an empty vector when the result is not sign-consistent.
inline Vector polish_on_support(const Matrix& q, const Vector& c, double lambda, const Vector& y) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < y.size(); ++j)
    if (y(j) != 0.0) support.push_back(j);
  Vector out = Vector::Zero(y.size());
  if (support.empty()) return out;
  const auto k = static_cast<Eigen::Index>(support.size());
  Matrix qs(k, k);
  Vector rhs(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    rhs(a) = c(support[a]) - 0.5 * lambda * sign(y(support[a]));
    for (Eigen::Index b = 0; b < k; ++b) qs(a, b) = q(support[a], support[b]);
  }
  const Vector ys = qs.completeOrthogonalDecomposition().solve(rhs);
  for (Eigen::Index a = 0; a < k; ++a) {
    if (lambda > 0.0 && sign(ys(a)) != sign(y(support[a]))) return {};
    out(support[a]) = ys(a);
  }
  return out;
}

}  // namespace detail

/// Lasso in Gram form: min_y y^T Q y - 2 c^T y + lambda ||y||_1, Q symmetric PSD.
///
/// Monotone accelerated proximal gradient with backtracking; whenever the
/// sign pattern settles, the stationarity system on that support is solved
/// directly and accepted if it satisfies the optimality conditions.
/// The reported objective omits any constant term.
inline LassoResult lasso_solve_gram(const Matrix& q, const Vector& c, double lambda, const SolverConfig& cfg) {
  cfg.validate();
  detail::require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::InvalidArgument, "lambda must be >= 0");
  detail::require(q.rows() == q.cols() && q.rows() == c.size(), ErrorCode::DimensionMismatch,
                  "Gram matrix and linear term sizes differ");
  const Eigen::Index n = c.size();
  auto objective = [&](const Vector& y) { return detail::quadratic_objective(q, c, lambda, y); };

  LassoResult res;
  Vector x = Vector::Zero(n);
  double fx = 0.0;
  if (cfg.record_history) res.history.push_back(fx);
  if (n == 0 || detail::kkt_violation(q, c, lambda, x) <= cfg.tol) {
    res.coeffs = x;
    res.converged = true;
    return res;
  }

  double lip = std::max(2.0 * q.diagonal().maxCoeff(), 1e-12);
  Vector x_prev = x;
  Vector w = x;
  double t = 1.0;
  Vector last_sign = Vector::Zero(n);
  int stable_for = 0;
  bool polished_this_pattern = false;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Vector grad = 2.0 * (q * w - c);
    Vector u;
    for (;;) {
      u = detail::soft_threshold(w - grad / lip, lambda / lip);
      const Vector step = u - w;
      const double curvature = step.dot(q * step);
      if (curvature <= 0.5 * lip * step.squaredNorm() * (1.0 + 1e-12)) break;
      lip *= 2.0;
    }
    const double fu = objective(u);
    x_prev = x;
    if (fu <= fx) {
      x = u;
      fx = fu;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    w = x + (t / t_next) * (u - x) + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;
    res.iterations = it;
    if (cfg.record_history) res.history.push_back(fx);

    const Vector pattern = x.unaryExpr([](double v) { return detail::sign(v); });
    if (pattern == last_sign) {
      ++stable_for;
    } else {
      last_sign = pattern;
      stable_for = 0;
      polished_this_pattern = false;
    }
    if (stable_for >= 3 && !polished_this_pattern) {
      polished_this_pattern = true;
      Vector candidate = detail::polish_on_support(q, c, lambda, x);
      if (candidate.size() == n) {
        const double fc = objective(candidate);
        if (fc <= fx + 1e-12 * (1.0 + std::abs(fx)) &&
            detail::kkt_violation(q, c, lambda, candidate) <= cfg.tol) {
          x = std::move(candidate);
          fx = std::min(fx, fc);
          if (cfg.record_history) res.history.back() = fx;
          res.converged = true;
          break;
        }
      }
    }
    if (it % 5 == 0 && detail::kkt_violation(q, c, lambda, x) <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.coeffs = std::move(x);
  res.objective = fx;
  return res;
}

/// Solves a LassoProblem. NotConverged is reported through `converged` with
/// the best iterate returned, not thrown.
inline LassoResult lasso_solve(const LassoProblem& prob, const SolverConfig& cfg) {
  detail::require(prob.design.rows() == prob.target.size(), ErrorCode::DimensionMismatch,
                  "design has " + std::to_string(prob.design.rows()) + " rows but target has " +
                      std::to_string(prob.target.size()) + " entries");
  const Matrix q = prob.design.transpose() * prob.design;
  const Vector c = prob.design.transpose() * prob.target;
  LassoResult res = lasso_solve_gram(q, c, prob.lambda, cfg);
  const double offset = prob.target.squaredNorm();
  res.objective += offset;
  for (double& h : res.history) h += offset;
  return res;
}

/// Weights minimizing y^T B y subject to sum(y) = 1: solves
/// (B + ridge * tr(B)/k * I) y = 1 and rescales y to sum to one.
inline Vector affine_local_solve(const Matrix& b, double ridge) {
  detail::require(b.rows() == b.cols() && b.rows() >= 1, ErrorCode::DimensionMismatch,
                  "local system must be square and nonempty");
  detail::require(ridge >= 0.0, ErrorCode::InvalidArgument, "ridge must be >= 0");
  const Eigen::Index k = b.rows();
  if (k == 1) return Vector::Ones(1);
  Matrix reg = 0.5 * (b + b.transpose());
  reg.diagonal().array() += ridge * reg.trace() / static_cast<double>(k);
  Eigen::JacobiSVD<Matrix> svd(reg, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  detail::require(s(k - 1) > 0.0 && s(0) / s(k - 1) <= 1e14, ErrorCode::Singular,
                  "local coding system is numerically singular");
  const Vector y = svd.solve(Vector::Ones(k));
  const double total = y.sum();
  detail::require(std::abs(total) > std::numeric_limits<double>::min() && std::isfinite(total), ErrorCode::Singular,
                  "local coding weights cannot be normalized");
  return y / total;
}

}  // namespace grassmann

#endif  // GRASSMANN_SPARSE_SOLVERS_HPP
