#include "gapkit/bench.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "gapkit/error.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/random.hpp"
#include "gapkit/util.hpp"

namespace gapkit {

namespace {

RowMatrix synthetic_block(Rng& rng, Eigen::Index rows, Eigen::Index dims) {
  // Offset rows like real embeddings; values rounded to f32 so that both
  // precisions replay identical inputs.
  const Vector offset = rng.normal_vector(dims);
  RowMatrix block = rng.normal_matrix(rows, dims) * 0.1;
  block.rowwise() += offset.transpose();
  return block.cast<float>().cast<double>();
}

double time_accumulation(const RowMatrix& block, std::uint64_t n, bool track_cov, std::size_t& state_bytes) {
  MomentAccumulator acc(block.cols(), track_cov);
  const auto start = std::chrono::steady_clock::now();
  std::uint64_t done = 0;
  const auto block_rows = static_cast<std::uint64_t>(block.rows());
  while (done < n) {
    const auto take = static_cast<Eigen::Index>(std::min(block_rows, n - done));
    acc.accumulate(block.topRows(take));
    done += static_cast<std::uint64_t>(take);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  state_bytes = acc.state_bytes();
  if (acc.n() != n) throw DegenerateError("bench: accumulator row count mismatch");
  return secs;
}

}  // namespace

std::vector<double> compensated_mean(const double* data, std::uint64_t rows, int dims) {
  std::vector<double> sum(static_cast<std::size_t>(dims), 0.0), comp(static_cast<std::size_t>(dims), 0.0);
  for (std::uint64_t i = 0; i < rows; ++i) {
    const double* row = data + i * static_cast<std::uint64_t>(dims);
    for (int j = 0; j < dims; ++j) {
      const double t = sum[j] + row[j];
      if (std::abs(sum[j]) >= std::abs(row[j])) comp[j] += (sum[j] - t) + row[j];
      else comp[j] += (row[j] - t) + sum[j];
      sum[j] = t;
    }
  }
  std::vector<double> mean(static_cast<std::size_t>(dims));
  for (int j = 0; j < dims; ++j) mean[j] = (sum[j] + comp[j]) / static_cast<double>(rows);
  return mean;
}

BenchReport run_bench(const BenchOptions& o) {
  if (o.dims < 1 || o.block_rows < 1 || o.repeats < 1) throw UsageError("bench: dims, block rows and repeats must be positive");
  if (o.sizes.empty()) throw UsageError("bench: no sizes given");
  for (auto n : o.sizes)
    if (n == 0) throw UsageError("bench: sizes must be positive");

  BenchReport report;
  report.dims = o.dims;
  Rng rng(o.seed);
  const RowMatrix block = synthetic_block(rng, o.block_rows, o.dims);

  std::size_t bytes = 0;
  time_accumulation(block, static_cast<std::uint64_t>(o.block_rows), o.track_cov, bytes);  // warm-up
  for (auto n : o.sizes) {
    BenchRow row;
    row.n = n;
    row.seconds = std::numeric_limits<double>::infinity();
    for (int r = 0; r < o.repeats; ++r) row.seconds = std::min(row.seconds, time_accumulation(block, n, o.track_cov, bytes));
    row.state_bytes = bytes;
    row.ns_per_row = row.seconds * 1e9 / static_cast<double>(n);
    report.rows.push_back(row);
  }

  if (o.precision_n > 0) {
    const RowMatrix data = synthetic_block(rng, static_cast<Eigen::Index>(o.precision_n), o.dims);
    const std::vector<double> oracle = compensated_mean(data.data(), o.precision_n, o.dims);
    MomentAccumulator acc(o.dims, false);
    acc.accumulate(data);
    const Vector f64 = finalize(acc).mean;
    const Vector f32 = mean_f32_accumulated(data);
    PrecisionReplay& p = report.precision;
    p.n = o.precision_n;
    for (int j = 0; j < o.dims; ++j) {
      p.f32_error = std::max(p.f32_error, std::abs(f32[j] - oracle[static_cast<std::size_t>(j)]));
      p.f64_error = std::max(p.f64_error, std::abs(f64[j] - oracle[static_cast<std::size_t>(j)]));
    }
    p.ratio = p.f64_error > 0 ? p.f32_error / p.f64_error : std::numeric_limits<double>::infinity();
  }
  return report;
}

void write_bench_csv(const BenchReport& report, std::ostream& out) {
  out << "n,dims,seconds,ns_per_row,state_bytes\n";
  for (const auto& r : report.rows)
    out << r.n << ',' << report.dims << ',' << format_double(r.seconds) << ',' << format_double(r.ns_per_row) << ','
        << r.state_bytes << '\n';
}

}  // namespace gapkit
