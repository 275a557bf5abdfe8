#include "gapkit/moments.hpp"

#include <cmath>
#include <string>

#include "gapkit/error.hpp"
#include "gapkit/log.hpp"

namespace gapkit {

MomentAccumulator::MomentAccumulator(Eigen::Index dims, bool track_cov)
    : dims_(dims), track_cov_(track_cov), sum_(Vector::Zero(dims)) {
  if (dims < 1) throw DataError("accumulator needs at least one dimension");
  if (track_cov_) scatter_ = Matrix::Zero(dims, dims);
}

void MomentAccumulator::accumulate(const EmbeddingSet& batch) {
  if (batch.dims() != dims_) {
    throw DataError("dimension mismatch: accumulator has d=" + std::to_string(dims_) + ", batch has d=" +
                    std::to_string(batch.dims()));
  }
  accumulate(batch.data);
}

void MomentAccumulator::accumulate(const Eigen::Ref<const RowMatrix>& rows) {
  if (rows.cols() != dims_) {
    throw DataError("dimension mismatch: accumulator has d=" + std::to_string(dims_) + ", batch has d=" +
                    std::to_string(rows.cols()));
  }
  if (rows.rows() == 0) return;
  if (!rows.allFinite()) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      if (!rows.row(i).allFinite()) throw DataError("non-finite value in batch row " + std::to_string(i));
  }
  sum_ += rows.colwise().sum().transpose();
  sumsq_norm_ += rows.squaredNorm();
  if (track_cov_) scatter_.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose());
  n_ += static_cast<std::uint64_t>(rows.rows());
}

void MomentAccumulator::accumulate_row(const Eigen::Ref<const Vector>& row) {
  if (row.size() != dims_) throw DataError("dimension mismatch in accumulate_row");
  if (!row.allFinite()) throw DataError("non-finite value in accumulated row");
  sum_ += row;
  sumsq_norm_ += row.squaredNorm();
  if (track_cov_) scatter_.selfadjointView<Eigen::Lower>().rankUpdate(row);
  ++n_;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.dims_ != dims_) throw DataError("cannot merge accumulators with different dims");
  if (other.track_cov_ != track_cov_) throw DataError("cannot merge accumulators with different covariance tracking");
  n_ += other.n_;
  sum_ += other.sum_;
  sumsq_norm_ += other.sumsq_norm_;
  if (track_cov_) scatter_ += other.scatter_;
}

std::size_t MomentAccumulator::state_bytes() const {
  return sizeof(*this) + static_cast<std::size_t>(sum_.size()) * sizeof(double) +
         static_cast<std::size_t>(scatter_.size()) * sizeof(double);
}

MomentAccumulator merge(const MomentAccumulator& a, const MomentAccumulator& b) {
  MomentAccumulator out = a;
  out.merge(b);
  return out;
}

ModalityStats finalize(const MomentAccumulator& acc) {
  if (acc.n() == 0) throw DataError("insufficient samples: cannot finalize an empty accumulator");
  ModalityStats s;
  const double n = static_cast<double>(acc.n());
  s.n = acc.n();
  s.mean = acc.sum() / n;
  s.trace = acc.sumsq_norm() / n - s.mean.squaredNorm();
  if (s.trace < 0.0) {
    if (s.trace < -1e-12 * std::max(1.0, acc.sumsq_norm() / n))
      log::warn("negative trace " + std::to_string(s.trace) + " from round-off clamped to 0");
    s.trace = 0.0;
  }
  if (acc.tracks_covariance()) {
    if (acc.n() < 2) {
      log::warn("covariance needs at least 2 samples; omitted");
    } else {
      Matrix scatter = acc.scatter().selfadjointView<Eigen::Lower>();
      Matrix cov = scatter / n - s.mean * s.mean.transpose();
      s.covariance = 0.5 * (cov + cov.transpose());
    }
  }
  return s;
}

Matrix shrink(const Matrix& sigma, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("shrinkage intensity must lie in [0, 1]");
  if (sigma.rows() != sigma.cols()) throw DataError("shrink: matrix is not square");
  const double d = static_cast<double>(sigma.rows());
  const double target = sigma.trace() / d;
  Matrix out = (1.0 - lambda) * sigma;
  out.diagonal().array() += lambda * target;
  return out;
}

ModalityStats compute_stats(const EmbeddingSet& set, bool track_cov) {
  MomentAccumulator acc(set.dims(), track_cov);
  acc.accumulate(set);
  return finalize(acc);
}

Vector column_mean(const Eigen::Ref<const RowMatrix>& rows) {
  if (rows.rows() == 0) throw DataError("mean of an empty set");
  return rows.colwise().mean().transpose();
}

Matrix sample_covariance(const Eigen::Ref<const RowMatrix>& rows) {
  if (rows.rows() == 0) throw DataError("covariance of an empty set");
  const Vector mu = column_mean(rows);
  const RowMatrix centered = rows.rowwise() - mu.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(rows.rows());
  return 0.5 * (cov + cov.transpose());
}

Vector mean_f32_accumulated(const Eigen::Ref<const RowMatrix>& rows) {
  if (rows.rows() == 0) throw DataError("mean of an empty set");
  Eigen::VectorXf acc = Eigen::VectorXf::Zero(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j) acc[j] += static_cast<float>(rows(i, j));
  return (acc / static_cast<float>(rows.rows())).cast<double>();
}

}  // namespace gapkit
