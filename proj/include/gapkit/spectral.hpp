#pragma once

#include <limits>
#include <vector>

#include "gapkit/types.hpp"

namespace gapkit {

struct EigenDecomposition {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // columns, orthonormal
};

/// Symmetric eigendecomposition, eigenvalues descending. Each eigenvector is
/// signed so that its largest-magnitude coordinate is positive, which makes
/// the result reproducible across runs.
///
/// Throws DataError for non-finite or non-symmetric (relative 1e-8) input.
EigenDecomposition sym_eig(const Matrix& sigma);

/// Forces the largest-magnitude entry of each column to be positive.
void canonicalize_signs(Matrix& columns);

inline constexpr double kEigenFloor = 1e-12;

/// lambda_1 / max(lambda_min, floor * lambda_1); an all-zero spectrum has
/// condition number 1.
double condition_number(const Vector& eigenvalues_desc, double floor = kEigenFloor);

/// exp(Shannon entropy) of the normalized spectrum, in [1, len].
double effective_rank(const Vector& eigenvalues);

/// Negative OLS slope of log(lambda_k) against log(k) for 1-based
/// k in [k_min, k_max].
double power_law_alpha(const Vector& eigenvalues_desc, int k_min, int k_max);

/// Default fit range: k from 2 to min(128, len).
double power_law_alpha(const Vector& eigenvalues_desc);

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases of equal shape.
std::vector<double> principal_angles(const Matrix& basis_a, const Matrix& basis_b);

/// Sine of the largest principal angle, computed as ||(I - A A^T) B||_2 so it
/// stays accurate for small angles.
double largest_angle_sine(const Matrix& basis_a, const Matrix& basis_b);

/// Throws DataError if ||Q^T Q - I||_F exceeds tol.
void check_orthonormal(const Matrix& basis, double tol = 1e-8);

struct ShapeEstimate {
  Matrix sigma_hat;  // trace == d
  int iterations = 0;
  bool converged = false;
  bool regularized = false;
};

struct TylerOptions {
  double tol = 1e-8;
  int max_iter = 500;
};

/// Tyler's M-estimator of scatter shape (the ACG maximum-likelihood shape).
///
/// Rows are direction-normalized before iterating, so the estimate depends
/// only on sample directions. Starts from the identity and renormalizes to
/// trace d every iteration; stops when the relative Frobenius change drops
/// below tol.
ShapeEstimate tyler_shape(const RowMatrix& samples, const TylerOptions& options = {});

/// Symmetric PSD square root and floored inverse square root.
Matrix sym_sqrt(const Matrix& sigma);

}  // namespace gapkit
