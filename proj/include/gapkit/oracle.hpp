#pragma once

#include <optional>

#include "gapkit/frame.hpp"
#include "gapkit/types.hpp"

namespace gapkit {

/// One InfoNCE minibatch: anchors e_{x,i} scored against candidates e_{y,j}
/// with dot-product logits / temperature.
struct ContrastiveBatch {
  RowMatrix anchors;
  RowMatrix candidates;
  double temperature = 1.0;

  Eigen::Index size() const { return anchors.rows(); }
  Eigen::Index dims() const { return anchors.cols(); }
};

/// Throws DataError unless both sides have the same shape and every row is
/// unit-norm within tol; UsageError for a non-positive temperature.
void validate(const ContrastiveBatch& batch, double tol = 1e-9);

/// Softmax weights p_ij over candidates j for anchor i (max-shifted).
Vector softmax_weights(const ContrastiveBatch& batch, Eigen::Index i);

/// -log softmax_i(<e_{x,i}, e_{y,.}> / tau), computed with a stable
/// log-sum-exp.
double infonce_loss(const ContrastiveBatch& batch, Eigen::Index i);

/// (1/tau) (sum_j p_ij e_{y,j} - e_{y,i}).
Vector grad_anchor(const ContrastiveBatch& batch, Eigen::Index i);

/// (1/tau) (p_ij - [j == i]) e_{x,i}.
Vector grad_candidate(const ContrastiveBatch& batch, Eigen::Index i, Eigen::Index j);

/// Ridge estimate of the linear map carrying U-residuals into V.
struct CouplingEstimate {
  Matrix l_hat;  // q x r
  double spectral_norm = 0.0;
  double r_squared = 0.0;
  double ridge_lambda = 0.0;
  bool recentered = false;  // inputs were not zero-mean and got centered
};

/// L = Z D^T (D D^T + lambda I)^{-1} with D = delta^T (r x N) and
/// Z = zeta^T (q x N); R^2 = 1 - ||Z - L D||_F^2 / ||Z||_F^2.
CouplingEstimate estimate_coupling(const RowMatrix& delta, const RowMatrix& zeta, double ridge_lambda);

struct LeakageReport {
  double sin_theta = 0.0;
  double coupling_norm = 0.0;
  double bound = 0.0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double violation_fraction = 0.0;
  double max_excess = 0.0;  // max(ratio - bound); negative when none exceed
  double max_ratio = 0.0;
};

/// Checks ||P_V g|| / ||g|| <= sin(theta(U_t, U)) + ||L|| for every row g.
LeakageReport leakage_bound_check(const RowMatrix& gradients, const ReferenceFrame& frame, const Matrix& basis_ut,
                                  const Matrix& l_hat, double tolerance = 1e-9);

struct MomentIdentityResiduals {
  double cross_abs = 0.0;  // ||E[delta zeta^T] - Sigma_U L^T||_F
  double cross_rel = 0.0;
  double cov_abs = 0.0;    // ||Cov(zeta) - (Sigma_V + L Sigma_U L^T)||_F
  double cov_rel = 0.0;
};

/// Compares empirical second moments against the coupling identities.
/// Sigma_U is the empirical Cov(delta). Sigma_V is the supplied background
/// covariance, or Cov(zeta - L delta) when none is given.
MomentIdentityResiduals moment_identity_check(const RowMatrix& delta, const RowMatrix& zeta, const Matrix& l,
                                              const std::optional<Matrix>& sigma_v_background = std::nullopt);

}  // namespace gapkit
