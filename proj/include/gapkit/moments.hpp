#pragma once

#include <cstdint>
#include <optional>

#include "gapkit/io.hpp"
#include "gapkit/types.hpp"

namespace gapkit {

struct ModalityStats {
  Vector mean;
  /// E||e - mean||^2, the global trace of the centered embeddings.
  double trace = 0.0;
  std::optional<Matrix> covariance;
  std::uint64_t n = 0;

  Eigen::Index dims() const { return mean.size(); }
};

/// Streaming first/second raw moments, always accumulated in f64.
///
/// State is O(d^2) with scatter tracking, O(d) without, and never grows with
/// the number of rows. Shards can be accumulated independently and merged.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Eigen::Index dims, bool track_cov = true);

  void accumulate(const EmbeddingSet& batch);
  void accumulate(const Eigen::Ref<const RowMatrix>& rows);
  void accumulate_row(const Eigen::Ref<const Vector>& row);

  /// Sums another shard into this one.
  void merge(const MomentAccumulator& other);

  std::uint64_t n() const { return n_; }
  Eigen::Index dims() const { return dims_; }
  bool tracks_covariance() const { return track_cov_; }
  const Vector& sum() const { return sum_; }
  double sumsq_norm() const { return sumsq_norm_; }
  const Matrix& scatter() const { return scatter_; }

  /// Bytes held by the accumulator, including heap buffers.
  std::size_t state_bytes() const;

 private:
  Eigen::Index dims_;
  bool track_cov_;
  std::uint64_t n_ = 0;
  Vector sum_;
  double sumsq_norm_ = 0.0;
  Matrix scatter_;
};

MomentAccumulator merge(const MomentAccumulator& a, const MomentAccumulator& b);

/// mean = sum/n, trace = sumsq/n - ||mean||^2 (clamped at 0), covariance =
/// scatter/n - mean mean^T (symmetrized, only when tracked and n >= 2).
/// Throws DataError when n == 0.
ModalityStats finalize(const MomentAccumulator& acc);

/// (1 - lambda) S + lambda (tr S / d) I. Trace is preserved.
Matrix shrink(const Matrix& sigma, double lambda);

/// Convenience: one pass over an in-memory set.
ModalityStats compute_stats(const EmbeddingSet& set, bool track_cov = true);

/// Sample covariance (1/n normalization) of the rows.
Matrix sample_covariance(const Eigen::Ref<const RowMatrix>& rows);
Vector column_mean(const Eigen::Ref<const RowMatrix>& rows);

/// Mean computed with single-precision accumulators, used to reproduce the
/// float32 error floor.
Vector mean_f32_accumulated(const Eigen::Ref<const RowMatrix>& rows);

}  // namespace gapkit
