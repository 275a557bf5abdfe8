#pragma once

#include <cstdint>
#include <vector>

#include "gapkit/io.hpp"
#include "gapkit/types.hpp"

namespace gapkit {

/// Euclidean distance between two centroids.
double modality_gap(const Vector& mu_a, const Vector& mu_b);

inline constexpr int kDefaultCosineBins = 201;
inline constexpr std::uint64_t kDefaultCosinePairs = 200000;
inline constexpr int kSmoothingHalfWidth = 2;

/// Fixed-grid density of pairwise cosine similarities on [-1, 1].
struct CosineHistogram {
  std::vector<double> bin_edges;  // bins + 1 edges
  std::vector<double> masses;     // sums to 1
  std::uint64_t pair_count = 0;
  std::uint64_t sampling_seed = 0;
  bool smoothed = false;

  int bins() const { return static_cast<int>(masses.size()); }
};

/// Samples num_pairs index pairs (i != j) uniformly with a seeded generator;
/// when num_pairs covers every unordered pair, all pairs are used exactly
/// once instead. Optional triangular smoothing spreads each bin's mass over
/// +-2 neighbours, conserving total mass.
CosineHistogram cosine_histogram(const EmbeddingSet& set, std::uint64_t num_pairs = kDefaultCosinePairs,
                                 int bins = kDefaultCosineBins, bool smoothing = false, std::uint64_t seed = 0);

/// Jensen-Shannon divergence with natural log, in [0, ln 2].
double js_divergence(const CosineHistogram& p, const CosineHistogram& q);
double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

/// k nearest neighbours of every row (Euclidean, self excluded, ties to the
/// lower index), by exact brute force.
std::vector<std::vector<std::uint32_t>> knn_indices(const RowMatrix& points, int k);

/// Pools both sets and returns the mean fraction of each point's k nearest
/// neighbours that come from the other set.
double knn_mixing_rate(const EmbeddingSet& a, const EmbeddingSet& b, int k);

struct OverlapResult {
  double overlap = 0.0;
  bool duplicates = false;  // duplicate rows make neighbour sets ambiguous
};

/// Mean |NN_k(before) & NN_k(after)| / k over index-aligned rows.
OverlapResult knn_overlap(const EmbeddingSet& before, const EmbeddingSet& after, int k);

/// Spherical-projection drift of a shifted noise cloud.
struct DriftReport {
  Vector mean_projection;  // E[pi(m + zeta)]
  Vector expected;         // pi(m)
  double drift_norm = 0.0;
  double drift_angle_deg = 0.0;
  Matrix mixing_matrix;  // E[(1/||zeta||)(I - zeta zeta^T / ||zeta||^2)]
};

/// Monte Carlo estimate over the given zeta samples (rows). Rejects zero-norm
/// samples and a zero m.
DriftReport phantom_drift(const Vector& m, const RowMatrix& zeta_samples);

/// ||E[pi(zeta)]||: the centroid of the projected samples.
Vector mean_direction(const RowMatrix& samples);

struct CurvePoint {
  std::int64_t n = 0;
  double gap_mean = 0.0;
  double gap_std = 0.0;
  std::vector<double> gaps;
};

struct CurveOptions {
  std::vector<std::int64_t> sizes;
  int trials = 5;
  std::int64_t holdout = 10000;
  std::uint64_t seed = 0;
  double eps = 1e-8;
};

/// For each calibration size N and trial: draw N source and N target rows
/// (without replacement) from the non-held-out pools, calibrate ReAlign,
/// apply it to the held-out source rows, and record the distance between the
/// aligned centroid and the held-out target centroid. A size equal to the
/// whole pool uses the pool directly.
std::vector<CurvePoint> sample_complexity_curve(const EmbeddingSet& src, const EmbeddingSet& tgt,
                                                const CurveOptions& options);

}  // namespace gapkit
