#ifndef GRASSMANN_MODELING_HPP
#define GRASSMANN_MODELING_HPP

#include <string>

#include <Eigen/Dense>

#include "grassmann/errors.hpp"
#include "grassmann/geometry.hpp"

namespace grassmann {

/// d x tau matrix of vectorized frames, columns in time order for videos.
struct ObservationMatrix {
  Matrix data;
  bool centered = false;
  bool unit_variance = false;

  void validate() const {
    detail::require(data.cols() >= 1 && data.rows() >= 1, ErrorCode::InvalidArgument, "observation matrix is empty");
    detail::require(data.allFinite(), ErrorCode::InvalidArgument, "observation matrix has non-finite entries");
  }
};

/// Subtracts the mean frame and/or rescales to unit overall variance.
inline ObservationMatrix preprocess(Matrix data, bool center, bool unit_variance) {
  if (center) data.colwise() -= data.rowwise().mean();
  if (unit_variance) {
    const double mean = data.mean();
    const double var = (data.array() - mean).square().mean();
    detail::require(var > 0.0, ErrorCode::InvalidArgument, "cannot scale a constant matrix to unit variance");
    data /= std::sqrt(var);
  }
  return ObservationMatrix{std::move(data), center, unit_variance};
}

struct ArmaParams {
  Matrix transition;   // n x n
  Matrix measurement;  // d x n, orthonormal columns
  Eigen::Index state_order() const { return transition.rows(); }
};

/// Leading p left singular vectors of the frames.
inline GrassmannPoint appearance_subspace(const ObservationMatrix& obs, Eigen::Index p) {
  obs.validate();
  return orthonormalize(obs.data, p);
}

/// Closed-form ARMA fit from the rank-n SVD F = U S V^T:
///   C = U,  A = S V^T D1 V (V^T D2 V)^{-1} S^{-1}
/// with D1 the down-shift and D2 the leading (tau-1) identity block.
inline ArmaParams fit_arma(const ObservationMatrix& obs, Eigen::Index n) {
  obs.validate();
  const Eigen::Index tau = obs.data.cols();
  detail::require(n >= 1, ErrorCode::InvalidArgument, "state order must be >= 1");
  detail::require(tau >= n + 1, ErrorCode::InvalidArgument,
                  "ARMA fit needs tau >= n + 1 frames (tau = " + std::to_string(tau) + ", n = " + std::to_string(n) + ")");
  detail::require(obs.data.rows() >= n, ErrorCode::RankDeficient, "state order exceeds frame dimension");

  Eigen::BDCSVD<Matrix> svd(obs.data, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  detail::require(sv(0) > 0.0 && sv(n - 1) > 1e-10 * sv(0), ErrorCode::RankDeficient,
                  "frames have rank below the state order " + std::to_string(n));
  const Matrix u = svd.matrixU().leftCols(n);
  const Matrix v = svd.matrixV().leftCols(n);
  const Vector s = sv.head(n);

  // V^T D1 V = sum_t v_{t+1} v_t^T and V^T D2 V = sum_{t<tau-1} v_t v_t^T.
  const Matrix head = v.topRows(tau - 1);
  const Matrix tail = v.bottomRows(tau - 1);
  const Matrix shifted = tail.transpose() * head;
  const Matrix leading = head.transpose() * head;
  Eigen::JacobiSVD<Matrix> lsvd(leading);
  const Vector& lsv = lsvd.singularValues();
  detail::require(lsv(n - 1) > 0.0 && lsv(0) / lsv(n - 1) <= 1e12, ErrorCode::Singular,
                  "V^T D2 V is numerically singular");
  // (V^T D2 V)^{-1} applied on the right.
  const Matrix right = leading.transpose().fullPivLu().solve(shifted.transpose()).transpose();
  Matrix a = s.asDiagonal() * right * s.cwiseInverse().asDiagonal();
  return ArmaParams{std::move(a), u};
}

/// Stacked observability matrix [C; CA; ...; CA^{m-1}].
inline Matrix observability_matrix(const ArmaParams& params, Eigen::Index m_obs) {
  detail::require(m_obs >= 1, ErrorCode::InvalidArgument, "observability order must be >= 1");
  const Eigen::Index d = params.measurement.rows();
  const Eigen::Index n = params.state_order();
  Matrix o(m_obs * d, n);
  Matrix block = params.measurement;
  for (Eigen::Index k = 0; k < m_obs; ++k) {
    o.middleRows(k * d, d) = block;
    block = block * params.transition;
  }
  return o;
}

/// Column space of the finite observability matrix, a point on G(n, m_obs d).
inline GrassmannPoint observability_subspace(const ArmaParams& params, Eigen::Index m_obs) {
  return orthonormalize(observability_matrix(params, m_obs), params.state_order());
}

}  // namespace grassmann

#endif  // GRASSMANN_MODELING_HPP
