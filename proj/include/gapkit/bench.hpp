#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

namespace gapkit {

struct BenchOptions {
  std::vector<std::uint64_t> sizes{100000, 500000, 1000000};
  int dims = 64;
  int block_rows = 8192;  // pre-generated rows, cycled to reach each N
  int repeats = 3;        // best-of timing per N
  bool track_cov = true;
  std::uint64_t precision_n = 500000;
  std::uint64_t seed = 11;
};

struct BenchRow {
  std::uint64_t n = 0;
  double seconds = 0.0;
  double ns_per_row = 0.0;
  std::size_t state_bytes = 0;
};

struct PrecisionReplay {
  std::uint64_t n = 0;
  double f32_error = 0.0;  // max |mean_f32 - oracle|
  double f64_error = 0.0;  // max |mean_f64 - oracle|
  double ratio = 0.0;      // f32_error / f64_error (infinite when f64 is exact)
};

struct BenchReport {
  int dims = 0;
  std::vector<BenchRow> rows;
  PrecisionReplay precision;
};

/// Times streaming moment accumulation for each N (generation excluded) and
/// replays one f32-valued stream through f32 and f64 accumulators against a
/// compensated-summation oracle.
BenchReport run_bench(const BenchOptions& options);

/// Mean by Neumaier-compensated summation.
std::vector<double> compensated_mean(const double* data, std::uint64_t rows, int dims);

void write_bench_csv(const BenchReport& report, std::ostream& out);

}  // namespace gapkit
