#include "gapkit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "gapkit/error.hpp"
#include "gapkit/random.hpp"
#include "gapkit/util.hpp"

namespace gapkit {

double modality_gap(const Vector& mu_a, const Vector& mu_b) {
  if (mu_a.size() != mu_b.size()) throw DataError("modality_gap: dimension mismatch");
  return (mu_a - mu_b).norm();
}

namespace {

int cosine_bin(double c, int bins) {
  const int b = static_cast<int>(std::floor((c + 1.0) * 0.5 * bins));
  return std::clamp(b, 0, bins - 1);
}

void smooth_triangular(std::vector<double>& masses, int half_width) {
  const int bins = static_cast<int>(masses.size());
  std::vector<double> out(masses.size(), 0.0);
  for (int b = 0; b < bins; ++b) {
    if (masses[b] == 0.0) continue;
    double norm = 0.0;
    for (int k = -half_width; k <= half_width; ++k)
      if (b + k >= 0 && b + k < bins) norm += half_width + 1 - std::abs(k);
    for (int k = -half_width; k <= half_width; ++k)
      if (b + k >= 0 && b + k < bins) out[b + k] += masses[b] * (half_width + 1 - std::abs(k)) / norm;
  }
  masses = std::move(out);
}

}  // namespace

CosineHistogram cosine_histogram(const EmbeddingSet& set, std::uint64_t num_pairs, int bins, bool smoothing,
                                 std::uint64_t seed) {
  const auto n = static_cast<std::uint64_t>(set.rows());
  if (n < 2) throw DataError("cosine_histogram: need at least 2 rows");
  if (bins < 8) throw UsageError("cosine_histogram: need at least 8 bins");
  if (num_pairs == 0) throw UsageError("cosine_histogram: need at least one pair");

  Vector inv_norm(set.rows());
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    const double norm = set.data.row(i).norm();
    if (!(norm > 0.0)) throw DegenerateError("cosine_histogram: zero-norm row " + std::to_string(i));
    inv_norm[i] = 1.0 / norm;
  }

  CosineHistogram h;
  h.sampling_seed = seed;
  h.smoothed = smoothing;
  h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.bin_edges[b] = -1.0 + 2.0 * b / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);

  auto add_pair = [&](Eigen::Index i, Eigen::Index j) {
    const double c = set.data.row(i).dot(set.data.row(j)) * inv_norm[i] * inv_norm[j];
    counts[cosine_bin(c, bins)] += 1.0;
  };

  const std::uint64_t all_pairs = n * (n - 1) / 2;
  if (num_pairs >= all_pairs) {
    for (Eigen::Index i = 0; i < set.rows(); ++i)
      for (Eigen::Index j = i + 1; j < set.rows(); ++j) add_pair(i, j);
    h.pair_count = all_pairs;
  } else {
    Rng rng(seed);
    for (std::uint64_t p = 0; p < num_pairs; ++p) {
      const auto i = rng.index(n);
      auto j = rng.index(n - 1);
      if (j >= i) ++j;
      add_pair(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    h.pair_count = num_pairs;
  }

  h.masses = std::move(counts);
  for (double& m : h.masses) m /= static_cast<double>(h.pair_count);
  if (smoothing) smooth_triangular(h.masses, kSmoothingHalfWidth);
  return h;
}

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DataError("js_divergence: histograms have different grids");
  double js = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const double lo = std::min(p[b], q[b]), hi = std::max(p[b], q[b]);
    const double m = 0.5 * (lo + hi);
    double term = 0.0;
    if (lo > 0.0) term += lo * std::log(lo / m);
    if (hi > 0.0) term += hi * std::log(hi / m);
    js += 0.5 * term;
  }
  return std::clamp(js, 0.0, std::numbers::ln2);
}

double js_divergence(const CosineHistogram& p, const CosineHistogram& q) {
  if (p.bin_edges != q.bin_edges) throw DataError("js_divergence: histograms have different grids");
  return js_divergence(p.masses, q.masses);
}

namespace {

struct KnnResult {
  std::vector<std::vector<std::uint32_t>> neighbours;
  bool duplicates = false;
};

KnnResult knn_bruteforce(const RowMatrix& points, int k) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw UsageError("k must be at least 1");
  if (k >= n) throw DataError("k = " + std::to_string(k) + " must be smaller than the point count " + std::to_string(n));
  KnnResult out;
  out.neighbours.resize(static_cast<std::size_t>(n));
  std::vector<char> dup(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), default_threads(), [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::uint32_t>> dist(static_cast<std::size_t>(n - 1));
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t at = 0;
      const auto qi = static_cast<Eigen::Index>(i);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == qi) continue;
        const double d2 = (points.row(qi) - points.row(j)).squaredNorm();
        if (d2 == 0.0) dup[i] = 1;
        dist[at++] = {d2, static_cast<std::uint32_t>(j)};
      }
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      auto& nb = out.neighbours[i];
      nb.resize(static_cast<std::size_t>(k));
      for (int t = 0; t < k; ++t) nb[t] = dist[t].second;
    }
  });
  out.duplicates = std::any_of(dup.begin(), dup.end(), [](char c) { return c != 0; });
  return out;
}

}  // namespace

std::vector<std::vector<std::uint32_t>> knn_indices(const RowMatrix& points, int k) {
  return knn_bruteforce(points, k).neighbours;
}

double knn_mixing_rate(const EmbeddingSet& a, const EmbeddingSet& b, int k) {
  if (a.dims() != b.dims()) throw DataError("knn_mixing_rate: dimension mismatch");
  const Eigen::Index na = a.rows();
  RowMatrix pooled(na + b.rows(), a.dims());
  pooled.topRows(na) = a.data;
  pooled.bottomRows(b.rows()) = b.data;
  const auto nb = knn_indices(pooled, k);
  double total = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    const bool from_a = static_cast<Eigen::Index>(i) < na;
    int other = 0;
    for (auto j : nb[i]) other += (static_cast<Eigen::Index>(j) < na) != from_a;
    total += static_cast<double>(other) / k;
  }
  return total / static_cast<double>(nb.size());
}

OverlapResult knn_overlap(const EmbeddingSet& before, const EmbeddingSet& after, int k) {
  if (before.rows() != after.rows()) throw DataError("knn_overlap: sets must be index-aligned");
  if (before.rows() <= k) throw DataError("knn_overlap: need more than k points");
  const KnnResult nb_before = knn_bruteforce(before.data, k);
  const KnnResult nb_after = knn_bruteforce(after.data, k);
  OverlapResult out;
  out.duplicates = nb_before.duplicates || nb_after.duplicates;
  double total = 0.0;
  for (std::size_t i = 0; i < nb_before.neighbours.size(); ++i) {
    auto x = nb_before.neighbours[i];
    auto y = nb_after.neighbours[i];
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::vector<std::uint32_t> common;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
    total += static_cast<double>(common.size()) / k;
  }
  out.overlap = total / static_cast<double>(nb_before.neighbours.size());
  return out;
}

Vector mean_direction(const RowMatrix& samples) {
  if (samples.rows() == 0) throw DataError("mean_direction: empty sample set");
  Vector acc = Vector::Zero(samples.cols());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const double norm = samples.row(i).norm();
    if (!(norm > 0.0)) throw DegenerateError("zero-norm sample at row " + std::to_string(i));
    acc += samples.row(i).transpose() / norm;
  }
  return acc / static_cast<double>(samples.rows());
}

DriftReport phantom_drift(const Vector& m, const RowMatrix& zeta_samples) {
  const Eigen::Index d = m.size();
  if (zeta_samples.cols() != d) throw DataError("phantom_drift: dimension mismatch");
  if (zeta_samples.rows() == 0) throw DataError("phantom_drift: no samples");
  const double mnorm = m.norm();
  if (!(mnorm > 0.0)) throw DegenerateError("phantom_drift: m must be nonzero");

  DriftReport out;
  out.expected = m / mnorm;
  out.mixing_matrix = Matrix::Zero(d, d);
  RowMatrix shifted(zeta_samples.rows(), d);
  for (Eigen::Index i = 0; i < zeta_samples.rows(); ++i) {
    const Vector z = zeta_samples.row(i).transpose();
    const double zn = z.norm();
    if (!(zn > 0.0)) throw DegenerateError("phantom_drift: zero-norm zeta sample at row " + std::to_string(i));
    out.mixing_matrix.noalias() -= (z / (zn * zn * zn)) * z.transpose();
    out.mixing_matrix.diagonal().array() += 1.0 / zn;
    shifted.row(i) = (m + z).transpose();
  }
  out.mixing_matrix /= static_cast<double>(zeta_samples.rows());
  out.mean_projection = mean_direction(shifted);
  out.drift_norm = (out.mean_projection - out.expected).norm();
  const double along = out.mean_projection.dot(out.expected);
  const double across = (out.mean_projection - along * out.expected).norm();
  out.drift_angle_deg = std::atan2(across, along) * 180.0 / std::numbers::pi;
  return out;
}

}  // namespace gapkit
