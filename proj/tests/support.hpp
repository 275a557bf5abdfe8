#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "gapkit/io.hpp"
#include "gapkit/random.hpp"
#include "gapkit/types.hpp"

namespace testing {

using namespace gapkit;

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("gapkit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

// Random rotation times geometric spectrum from 1 down to 1/kappa.
inline Matrix planted_covariance(Eigen::Index d, double kappa, Rng& rng) {
  Vector lambda(d);
  for (Eigen::Index k = 0; k < d; ++k)
    lambda[k] = d == 1 ? 1.0 : std::pow(kappa, -static_cast<double>(k) / static_cast<double>(d - 1));
  const Matrix q = rng.orthogonal(d);
  return q * lambda.asDiagonal() * q.transpose();
}

// n samples of N(mean, sigma).
inline RowMatrix gaussian_rows(Eigen::Index n, const Matrix& sigma, const Vector& mean, Rng& rng) {
  const Eigen::LLT<Matrix> llt(sigma);
  const Matrix l = llt.matrixL();
  RowMatrix z = rng.normal_matrix(n, sigma.rows());
  RowMatrix out = z * l.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

inline double rel_frob(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace testing
