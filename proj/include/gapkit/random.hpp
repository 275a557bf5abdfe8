#pragma once

#include <cstdint>
#include <random>

#include "gapkit/types.hpp"

namespace gapkit {

/// Seeded generator with platform-independent output.
///
/// std::normal_distribution and std::uniform_int_distribution are
/// implementation-defined, so sampling is done here on top of the raw
/// mt19937_64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Unbiased integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  double normal();

  Vector normal_vector(Eigen::Index d);
  RowMatrix normal_matrix(Eigen::Index rows, Eigen::Index cols);
  /// Haar-random orthogonal d x d matrix.
  Matrix orthogonal(Eigen::Index d);
  /// Random d x r matrix with orthonormal columns.
  Matrix orthonormal_basis(Eigen::Index d, Eigen::Index r);
  Vector unit_vector(Eigen::Index d);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stateless counter-based generator: the same (seed, stream, counter)
/// triple always yields the same value. Used by the isotropic-noise baseline
/// so that each row's noise is independent of batch order.
///
/// u64 = splitmix64(seed ^ splitmix64(stream ^ splitmix64(counter)))
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
/// Standard normal from two counter draws (Box-Muller, cosine branch).
double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

}  // namespace gapkit
