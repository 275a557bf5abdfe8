#pragma once

#include <cstdint>

#include "gapkit/io.hpp"
#include "gapkit/types.hpp"

namespace gapkit {

/// Frozen orthonormal basis U of the effective task subspace; V is its
/// orthogonal complement.
struct ReferenceFrame {
  Matrix basis_u;  // d x r
  double energy_threshold = 0.9;
  std::int64_t created_at_step = 0;

  Eigen::Index dims() const { return basis_u.rows(); }
  Eigen::Index rank() const { return basis_u.cols(); }
};

inline constexpr double kDefaultEnergy = 0.90;

/// Eigendecomposes sigma_x + sigma_y and keeps the smallest number of leading
/// eigenvectors whose cumulative energy reaches the threshold.
ReferenceFrame build_frame(const Matrix& sigma_x, const Matrix& sigma_y, double energy = kDefaultEnergy,
                           std::int64_t step = 0);

/// Frame from a single summed covariance.
ReferenceFrame build_frame(const Matrix& sigma_sum, double energy = kDefaultEnergy, std::int64_t step = 0);

/// Top-r eigenbasis of a covariance, signs canonicalized.
Matrix top_eigenbasis(const Matrix& sigma, Eigen::Index r);

/// Orthonormal basis of V (d x (d - r)), signs canonicalized.
Matrix complement_basis(const ReferenceFrame& frame);

/// Coordinates of v in the U basis (B^T v).
Vector project_u(const Eigen::Ref<const Vector>& v, const ReferenceFrame& frame);
/// Ambient-space V component (v - B B^T v).
Vector project_v(const Eigen::Ref<const Vector>& v, const ReferenceFrame& frame);

struct GapDecomposition {
  Vector mean_gap;  // E[Delta], ambient
  Vector beta;      // U coordinates (r)
  Vector gamma;     // ambient vector lying in V
  RowMatrix delta;  // N x r, zero-mean U residual coordinates
  RowMatrix zeta;   // N x d, zero-mean ambient V residuals
};

/// Paired gap Delta_i = x_i - y_i split into bias (beta, gamma) and
/// zero-mean residuals (delta, zeta) in the frozen frame.
GapDecomposition decompose_gap(const EmbeddingSet& x, const EmbeddingSet& y, const ReferenceFrame& frame);

/// ||P_V g|| / ||g||.
double leakage_ratio(const Eigen::Ref<const Vector>& g, const ReferenceFrame& frame);

/// sin of the largest principal angle between the frozen U and basis_ut.
double geometric_baseline(const ReferenceFrame& frame, const Matrix& basis_ut);

/// ||gamma_t - gamma_t0|| / max(||gamma_t0||, eps).
double cob_drift(const Vector& gamma_t, const Vector& gamma_t0, double eps = 1e-8);

struct Flagged {
  double value = 0.0;
  bool degenerate = false;
};

/// Cosine between consecutive gamma vectors; a zero vector is flagged.
Flagged cosine_stability(const Vector& gamma_t, const Vector& gamma_prev);

/// Pearson correlation of the descending eigenvalue vectors of two
/// equally-sized symmetric matrices. Constant spectra are flagged.
Flagged rho_align(const Matrix& sigma_u, const Matrix& grad_cov_u);

/// Angle in degrees, folded into [0, 90], between gamma and the top
/// eigenvector of sigma_v.
double gamma_noise_angle(const Vector& gamma, const Matrix& sigma_v);

}  // namespace gapkit
