#pragma once

#include <cstdint>

#include "gapkit/frame.hpp"
#include "gapkit/io.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/types.hpp"

namespace gapkit {

inline constexpr double kDefaultRealignEps = 1e-8;
inline constexpr double kCollapseNorm = 1e-12;
inline constexpr double kDefaultEigFloor = 1e-6;
inline constexpr double kDefaultC3Sigma = 0.04;

/// Calibration for mapping a source modality (y) onto a target (x).
struct AlignmentStats {
  Vector mu_src;
  Vector mu_tgt;
  double trace_src = 0.0;
  double trace_tgt = 0.0;
  double s = 1.0;  // sqrt(trace_tgt / (trace_src + eps))
  double eps = kDefaultRealignEps;
  Vector mu_drift;  // mean of the first spherical projection on calibration data
  std::uint64_t calib_n = 0;

  Eigen::Index dims() const { return mu_src.size(); }
};

/// Intermediate values of one ReAlign application.
struct RealignStages {
  Vector affine;      // mu_x + s (e - mu_y)
  Vector projected;   // affine / ||affine||
  Vector recentered;  // projected - mu_drift + mu_x
  Vector output;      // recentered / ||recentered||
};

/// Anchor and scale only; mu_drift is left empty.
AlignmentStats affine_stats(const ModalityStats& src, const ModalityStats& tgt, double eps = kDefaultRealignEps);

/// Full calibration: scale from the traces, then mu_drift as the mean of the
/// projected affine outputs over calib_src. Covariances are not needed.
AlignmentStats estimate_realign(const ModalityStats& src, const ModalityStats& tgt, const EmbeddingSet& calib_src,
                                double eps = kDefaultRealignEps);

/// Throws DegenerateError naming the stage whose norm collapsed.
RealignStages realign_stages(const Eigen::Ref<const Vector>& e, const AlignmentStats& stats);
Vector apply_realign(const Eigen::Ref<const Vector>& e, const AlignmentStats& stats);

/// Row-wise apply_realign; order preserved, errors carry the row index.
EmbeddingSet substitution_operator(const EmbeddingSet& source, const AlignmentStats& stats);

/// normalize(e - mu_src + mu_tgt).
Vector apply_anchor_only(const Eigen::Ref<const Vector>& e, const Vector& mu_src, const Vector& mu_tgt);

/// normalize(e - mu_src + mu_tgt + sigma z) with z drawn from the
/// counter-based generator keyed by (seed, stream); batch callers pass the
/// row index as stream.
Vector apply_c3_baseline(const Eigen::Ref<const Vector>& e, const Vector& mu_src, const Vector& mu_tgt,
                         double noise_sigma, std::uint64_t seed, std::uint64_t stream = 0);

EmbeddingSet apply_anchor_only(const EmbeddingSet& source, const Vector& mu_src, const Vector& mu_tgt);
EmbeddingSet apply_c3_baseline(const EmbeddingSet& source, const Vector& mu_src, const Vector& mu_tgt,
                               double noise_sigma, std::uint64_t seed);

/// Blockwise whitening-coloring calibration in a fixed (U, V) frame.
struct BlockwiseStats {
  ReferenceFrame frame;
  Matrix basis_v;  // d x (d - r)
  Matrix t_u;      // r x r
  Matrix t_v;      // (d - r) x (d - r)
  Vector mu_src;
  Vector mu_tgt;
  Vector mu_drift;  // mean of the geometry-aligned, normalized calibration outputs
  double eig_floor = kDefaultEigFloor;
  bool floored_u = false;
  bool floored_v = false;
  std::uint64_t calib_n = 0;

  Eigen::Index dims() const { return mu_src.size(); }
};

struct BlockwiseStages {
  Vector anchored;    // normalize(e - mu_src + mu_tgt)
  Vector geometry;    // B T_U B^T a + C T_V C^T a
  Vector aligned;     // geometry / ||geometry||
  Vector recentered;  // aligned - mu_drift + mu_tgt
  Vector output;
};

/// T = (Sigma_target)^{1/2} (Sigma_source)^{-1/2}, with source eigenvalues
/// floored at eig_floor * lambda_max. `floored` reports whether the floor bit.
Matrix whitening_coloring(const Matrix& sigma_source, const Matrix& sigma_target, double eig_floor, bool& floored);

BlockwiseStats estimate_blockwise(const ReferenceFrame& frame, const EmbeddingSet& calib_src,
                                  const EmbeddingSet& calib_tgt, double eig_floor = kDefaultEigFloor);

BlockwiseStages blockwise_stages(const Eigen::Ref<const Vector>& e, const BlockwiseStats& stats);
Vector apply_blockwise(const Eigen::Ref<const Vector>& e, const BlockwiseStats& stats);
EmbeddingSet apply_blockwise(const EmbeddingSet& source, const BlockwiseStats& stats);

}  // namespace gapkit
