#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gapkit/diagnostics.hpp"
#include "gapkit/error.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/random.hpp"
#include "gapkit/realign.hpp"

namespace gapkit {

namespace {

std::vector<Eigen::Index> draw_without_replacement(Rng& rng, Eigen::Index pool, Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(pool - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(n));
  return idx;
}

}  // namespace

std::vector<CurvePoint> sample_complexity_curve(const EmbeddingSet& src, const EmbeddingSet& tgt,
                                                const CurveOptions& options) {
  if (src.dims() != tgt.dims()) throw DataError("sample curve: dimension mismatch");
  if (options.trials < 1) throw UsageError("sample curve: trials must be at least 1");
  if (options.holdout < 1) throw UsageError("sample curve: holdout must be at least 1");
  if (!std::is_sorted(options.sizes.begin(), options.sizes.end()))
    throw UsageError("sample curve: sizes must be ascending");
  const Eigen::Index pool_src = src.rows() - options.holdout;
  const Eigen::Index pool_tgt = tgt.rows() - options.holdout;
  if (pool_src < 1 || pool_tgt < 1) throw DataError("sample curve: insufficient data for the held-out split");
  if (!options.sizes.empty() && options.sizes.back() > std::min(pool_src, pool_tgt))
    throw DataError("sample curve: insufficient data for N=" + std::to_string(options.sizes.back()));

  const EmbeddingSet eval_src(src.data.bottomRows(options.holdout), src.dtype);
  const Vector eval_tgt_mean = column_mean(tgt.data.bottomRows(options.holdout));
  const EmbeddingSet pool_s(src.data.topRows(pool_src), src.dtype);
  const EmbeddingSet pool_t(tgt.data.topRows(pool_tgt), tgt.dtype);

  Rng rng(options.seed);
  std::vector<CurvePoint> curve;
  for (const auto n : options.sizes) {
    if (n < 2) throw UsageError("sample curve: sizes must be at least 2");
    CurvePoint point;
    point.n = n;
    for (int t = 0; t < options.trials; ++t) {
      const bool whole = n == pool_src && n == pool_tgt;
      const EmbeddingSet cal_s = whole ? pool_s : select_rows(pool_s, draw_without_replacement(rng, pool_src, n));
      const EmbeddingSet cal_t = whole ? pool_t : select_rows(pool_t, draw_without_replacement(rng, pool_tgt, n));
      const AlignmentStats st =
          estimate_realign(compute_stats(cal_s, false), compute_stats(cal_t, false), cal_s, options.eps);
      const EmbeddingSet aligned = substitution_operator(eval_src, st);
      point.gaps.push_back(modality_gap(column_mean(aligned.data), eval_tgt_mean));
    }
    const double k = static_cast<double>(point.gaps.size());
    point.gap_mean = std::accumulate(point.gaps.begin(), point.gaps.end(), 0.0) / k;
    double ss = 0.0;
    for (double g : point.gaps) ss += (g - point.gap_mean) * (g - point.gap_mean);
    point.gap_std = point.gaps.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
    curve.push_back(std::move(point));
  }
  return curve;
}

}  // namespace gapkit
