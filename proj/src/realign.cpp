#include "gapkit/realign.hpp"

#include <cmath>
#include <string>

#include "gapkit/error.hpp"
#include "gapkit/log.hpp"
#include "gapkit/random.hpp"
#include "gapkit/spectral.hpp"

namespace gapkit {

namespace {

Vector normalize_or_throw(const Vector& v, const char* stage) {
  const double norm = v.norm();
  if (!(norm >= kCollapseNorm)) throw DegenerateError(std::string("degenerate collapse at ") + stage + " (norm " +
                                                      std::to_string(norm) + ")");
  return v / norm;
}

void check_dims(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    throw DataError(std::string(what) + ": dimension mismatch (got d=" + std::to_string(got) + ", expected d=" +
                    std::to_string(want) + ")");
}

template <class Fn>
EmbeddingSet map_rows(const EmbeddingSet& source, Fn&& fn) {
  EmbeddingSet out(RowMatrix(source.rows(), source.dims()), Dtype::F64, source.modality_tag);
  for (Eigen::Index i = 0; i < source.rows(); ++i) {
    try {
      out.data.row(i) = fn(Vector(source.data.row(i).transpose()), i).transpose();
    } catch (const DegenerateError& e) {
      throw DegenerateError("row " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

AlignmentStats affine_stats(const ModalityStats& src, const ModalityStats& tgt, double eps) {
  check_dims(src.dims(), tgt.dims(), "alignment stats");
  if (tgt.trace < 0.0) throw DataError("target trace is negative");
  if (src.trace < 0.0) throw DataError("source trace is negative");
  if (eps < 0.0) throw UsageError("eps must be non-negative");
  AlignmentStats st;
  st.mu_src = src.mean;
  st.mu_tgt = tgt.mean;
  st.trace_src = src.trace;
  st.trace_tgt = tgt.trace;
  st.eps = eps;
  if (!(src.trace + eps > 0.0)) throw DegenerateError("source trace plus eps is zero; scale undefined");
  st.s = std::sqrt(tgt.trace / (src.trace + eps));
  return st;
}

AlignmentStats estimate_realign(const ModalityStats& src, const ModalityStats& tgt, const EmbeddingSet& calib_src,
                                double eps) {
  AlignmentStats st = affine_stats(src, tgt, eps);
  if (calib_src.empty()) throw DataError("empty calibration set");
  check_dims(calib_src.dims(), st.dims(), "calibration set");

  Vector drift = Vector::Zero(st.dims());
  for (Eigen::Index i = 0; i < calib_src.rows(); ++i) {
    const Vector affine = st.mu_tgt + st.s * (calib_src.data.row(i).transpose() - st.mu_src);
    const double norm = affine.norm();
    if (!(norm >= kCollapseNorm))
      throw DegenerateError("row " + std::to_string(i) + ": degenerate collapse at affine step");
    drift += affine / norm;
  }
  st.mu_drift = drift / static_cast<double>(calib_src.rows());
  st.calib_n = static_cast<std::uint64_t>(calib_src.rows());
  return st;
}

RealignStages realign_stages(const Eigen::Ref<const Vector>& e, const AlignmentStats& stats) {
  check_dims(e.size(), stats.dims(), "apply_realign");
  if (stats.mu_drift.size() != stats.dims()) throw DataError("alignment stats are missing the drift centroid");
  RealignStages out;
  out.affine = stats.mu_tgt + stats.s * (e - stats.mu_src);
  out.projected = normalize_or_throw(out.affine, "affine step");
  out.recentered = out.projected - stats.mu_drift + stats.mu_tgt;
  out.output = normalize_or_throw(out.recentered, "centroid step");
  return out;
}

Vector apply_realign(const Eigen::Ref<const Vector>& e, const AlignmentStats& stats) {
  return realign_stages(e, stats).output;
}

EmbeddingSet substitution_operator(const EmbeddingSet& source, const AlignmentStats& stats) {
  check_dims(source.dims(), stats.dims(), "substitution");
  return map_rows(source, [&](const Vector& e, Eigen::Index) { return apply_realign(e, stats); });
}

Vector apply_anchor_only(const Eigen::Ref<const Vector>& e, const Vector& mu_src, const Vector& mu_tgt) {
  check_dims(e.size(), mu_src.size(), "anchor alignment");
  check_dims(mu_tgt.size(), mu_src.size(), "anchor alignment");
  return normalize_or_throw(e - mu_src + mu_tgt, "anchor step");
}

Vector apply_c3_baseline(const Eigen::Ref<const Vector>& e, const Vector& mu_src, const Vector& mu_tgt,
                         double noise_sigma, std::uint64_t seed, std::uint64_t stream) {
  if (noise_sigma < 0.0) throw UsageError("noise sigma must be non-negative");
  check_dims(e.size(), mu_src.size(), "c3 baseline");
  check_dims(mu_tgt.size(), mu_src.size(), "c3 baseline");
  Vector out = e - mu_src + mu_tgt;
  if (noise_sigma > 0.0)
    for (Eigen::Index j = 0; j < out.size(); ++j)
      out[j] += noise_sigma * counter_normal(seed, stream, static_cast<std::uint64_t>(j));
  return normalize_or_throw(out, "noise step");
}

EmbeddingSet apply_anchor_only(const EmbeddingSet& source, const Vector& mu_src, const Vector& mu_tgt) {
  return map_rows(source, [&](const Vector& e, Eigen::Index) { return apply_anchor_only(e, mu_src, mu_tgt); });
}

EmbeddingSet apply_c3_baseline(const EmbeddingSet& source, const Vector& mu_src, const Vector& mu_tgt,
                               double noise_sigma, std::uint64_t seed) {
  return map_rows(source, [&](const Vector& e, Eigen::Index i) {
    return apply_c3_baseline(e, mu_src, mu_tgt, noise_sigma, seed, static_cast<std::uint64_t>(i));
  });
}

Matrix whitening_coloring(const Matrix& sigma_source, const Matrix& sigma_target, double eig_floor, bool& floored) {
  floored = false;
  const EigenDecomposition src = sym_eig(sigma_source);
  const double top = src.eigenvalues.size() ? src.eigenvalues[0] : 0.0;
  if (!(top > 0.0)) throw DegenerateError("whitening: source block covariance is zero");
  const double floor = eig_floor * top;
  Vector inv_sqrt(src.eigenvalues.size());
  for (Eigen::Index k = 0; k < inv_sqrt.size(); ++k) {
    double lambda = src.eigenvalues[k];
    if (lambda < floor) {
      lambda = floor;
      floored = true;
    }
    inv_sqrt[k] = 1.0 / std::sqrt(lambda);
  }
  const Matrix whiten = src.eigenvectors * inv_sqrt.asDiagonal() * src.eigenvectors.transpose();
  return sym_sqrt(sigma_target) * whiten;
}

BlockwiseStats estimate_blockwise(const ReferenceFrame& frame, const EmbeddingSet& calib_src,
                                  const EmbeddingSet& calib_tgt, double eig_floor) {
  if (calib_src.empty() || calib_tgt.empty()) throw DataError("empty calibration set");
  check_dims(calib_src.dims(), frame.dims(), "blockwise source calibration");
  check_dims(calib_tgt.dims(), frame.dims(), "blockwise target calibration");
  if (!(eig_floor >= 0.0)) throw UsageError("eigenvalue floor must be non-negative");
  const Eigen::Index r = frame.rank();
  const Eigen::Index d = frame.dims();
  if (r < 1) throw DataError("blockwise: frame has rank 0");

  BlockwiseStats st;
  st.frame = frame;
  st.basis_v = complement_basis(frame);
  st.eig_floor = eig_floor;
  st.mu_src = column_mean(calib_src.data);
  st.mu_tgt = column_mean(calib_tgt.data);
  st.calib_n = static_cast<std::uint64_t>(calib_src.rows());

  // Step 1: anchor the source onto the target mean and project to the sphere.
  RowMatrix anchored(calib_src.rows(), d);
  for (Eigen::Index i = 0; i < calib_src.rows(); ++i) {
    try {
      anchored.row(i) = apply_anchor_only(Vector(calib_src.data.row(i).transpose()), st.mu_src, st.mu_tgt).transpose();
    } catch (const DegenerateError& e) {
      throw DegenerateError("row " + std::to_string(i) + ": " + e.what());
    }
  }

  // Step 2: block covariances in frame coordinates.
  const RowMatrix src_u = anchored * frame.basis_u;
  const RowMatrix tgt_u = calib_tgt.data * frame.basis_u;
  st.t_u = whitening_coloring(sample_covariance(src_u), sample_covariance(tgt_u), eig_floor, st.floored_u);
  if (d > r) {
    const RowMatrix src_v = anchored * st.basis_v;
    const RowMatrix tgt_v = calib_tgt.data * st.basis_v;
    st.t_v = whitening_coloring(sample_covariance(src_v), sample_covariance(tgt_v), eig_floor, st.floored_v);
  } else {
    st.t_v = Matrix(0, 0);
  }
  if (st.floored_u || st.floored_v)
    log::warn("blockwise: source block covariance below eigenvalue floor; inverse square root was floored");

  // Step 3: drift centroid of the normalized geometry-aligned outputs.
  st.mu_drift = Vector::Zero(d);
  const RowMatrix geom = src_u * st.t_u.transpose() * frame.basis_u.transpose() +
                         (d > r ? RowMatrix(anchored * st.basis_v * st.t_v.transpose() * st.basis_v.transpose())
                                : RowMatrix(RowMatrix::Zero(anchored.rows(), d)));
  for (Eigen::Index i = 0; i < geom.rows(); ++i) {
    const double norm = geom.row(i).norm();
    if (!(norm >= kCollapseNorm) || !std::isfinite(norm))
      throw DegenerateError("row " + std::to_string(i) + ": degenerate collapse at geometry step");
    st.mu_drift += geom.row(i).transpose() / norm;
  }
  st.mu_drift /= static_cast<double>(geom.rows());
  return st;
}

BlockwiseStages blockwise_stages(const Eigen::Ref<const Vector>& e, const BlockwiseStats& stats) {
  check_dims(e.size(), stats.dims(), "apply_blockwise");
  const Matrix& b = stats.frame.basis_u;
  BlockwiseStages out;
  out.anchored = apply_anchor_only(e, stats.mu_src, stats.mu_tgt);
  out.geometry = b * (stats.t_u * (b.transpose() * out.anchored));
  if (stats.basis_v.cols() > 0)
    out.geometry += stats.basis_v * (stats.t_v * (stats.basis_v.transpose() * out.anchored));
  out.aligned = normalize_or_throw(out.geometry, "geometry step");
  out.recentered = out.aligned - stats.mu_drift + stats.mu_tgt;
  out.output = normalize_or_throw(out.recentered, "centroid step");
  return out;
}

Vector apply_blockwise(const Eigen::Ref<const Vector>& e, const BlockwiseStats& stats) {
  return blockwise_stages(e, stats).output;
}

EmbeddingSet apply_blockwise(const EmbeddingSet& source, const BlockwiseStats& stats) {
  check_dims(source.dims(), stats.dims(), "apply_blockwise");
  return map_rows(source, [&](const Vector& e, Eigen::Index) { return apply_blockwise(e, stats); });
}

}  // namespace gapkit
