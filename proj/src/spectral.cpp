#include "gapkit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gapkit/error.hpp"
#include "gapkit/log.hpp"

namespace gapkit {

void canonicalize_signs(Matrix& columns) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Eigen::Index at = 0;
    columns.col(j).cwiseAbs().maxCoeff(&at);
    if (columns(at, j) < 0) columns.col(j) = -columns.col(j);
  }
}

EigenDecomposition sym_eig(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw DataError("sym_eig: matrix is not square");
  if (!sigma.allFinite()) throw DataError("sym_eig: non-finite entries");
  const double scale = sigma.norm();
  if ((sigma - sigma.transpose()).norm() > 1e-8 * std::max(scale, 1e-300))
    throw DataError("sym_eig: matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma);
  if (solver.info() != Eigen::Success) throw DegenerateError("sym_eig: eigensolver did not converge");
  EigenDecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  canonicalize_signs(out.eigenvectors);
  return out;
}

double condition_number(const Vector& eigenvalues_desc, double floor) {
  if (eigenvalues_desc.size() == 0) throw DataError("condition number of an empty spectrum");
  const double top = eigenvalues_desc.maxCoeff();
  if (top <= 0.0) return 1.0;
  const double bottom = std::max(eigenvalues_desc.minCoeff(), floor * top);
  return top / bottom;
}

double effective_rank(const Vector& eigenvalues) {
  if (eigenvalues.size() == 0) throw DataError("effective rank of an empty spectrum");
  const double total = eigenvalues.cwiseMax(0.0).sum();
  if (!(total > 0.0)) throw DataError("effective rank of an all-zero spectrum");
  double entropy = 0.0;
  for (double lambda : eigenvalues) {
    const double p = std::max(lambda, 0.0) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

double power_law_alpha(const Vector& eigenvalues_desc, int k_min, int k_max) {
  if (k_min < 1 || k_max > eigenvalues_desc.size() || k_max - k_min + 1 < 3)
    throw DataError("power-law fit needs at least 3 eigenvalues in range");
  const int m = k_max - k_min + 1;
  double sx = 0, sy = 0;
  std::vector<double> xs(m), ys(m);
  const double ref = eigenvalues_desc[k_min - 1];
  for (int k = k_min; k <= k_max; ++k) {
    const double lambda = eigenvalues_desc[k - 1];
    if (!(lambda > 0.0)) throw DataError("power-law fit: non-positive eigenvalue at k=" + std::to_string(k));
    xs[k - k_min] = std::log(static_cast<double>(k));
    ys[k - k_min] = std::log(lambda / ref);
    sx += xs[k - k_min];
    sy += ys[k - k_min];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return -sxy / sxx;
}

double power_law_alpha(const Vector& eigenvalues_desc) {
  const int len = static_cast<int>(eigenvalues_desc.size());
  return power_law_alpha(eigenvalues_desc, 2, std::min(128, len));
}

void check_orthonormal(const Matrix& basis, double tol) {
  const Matrix gram = basis.transpose() * basis;
  if ((gram - Matrix::Identity(basis.cols(), basis.cols())).norm() > tol)
    throw DataError("basis columns are not orthonormal");
}

namespace {

void check_pair(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DataError("principal angles: ambient dimensions differ");
  if (a.cols() != b.cols()) throw DataError("principal angles: subspace ranks differ");
  if (a.cols() == 0) throw DataError("principal angles: empty basis");
  check_orthonormal(a);
  check_orthonormal(b);
}

}  // namespace

std::vector<double> principal_angles(const Matrix& basis_a, const Matrix& basis_b) {
  check_pair(basis_a, basis_b);
  Eigen::JacobiSVD<Matrix> svd(basis_a.transpose() * basis_b);
  const Vector sv = svd.singularValues();  // descending
  std::vector<double> angles(static_cast<std::size_t>(sv.size()));
  for (Eigen::Index i = 0; i < sv.size(); ++i) angles[i] = std::acos(std::clamp(sv[i], 0.0, 1.0));
  return angles;
}

double largest_angle_sine(const Matrix& basis_a, const Matrix& basis_b) {
  check_pair(basis_a, basis_b);
  const Matrix residual = basis_b - basis_a * (basis_a.transpose() * basis_b);
  Eigen::JacobiSVD<Matrix> svd(residual);
  return std::min(1.0, svd.singularValues()[0]);
}

ShapeEstimate tyler_shape(const RowMatrix& samples, const TylerOptions& options) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (n == 0 || d == 0) throw DataError("tyler_shape: empty sample set");
  if (n <= d) log::warn("tyler_shape: n <= d, shape estimate may be singular");

  RowMatrix dirs(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = samples.row(i).norm();
    if (!(norm > 0.0)) throw DataError("tyler_shape: zero-norm sample at row " + std::to_string(i));
    dirs.row(i) = samples.row(i) / norm;
  }

  const double dd = static_cast<double>(d);
  ShapeEstimate est;
  est.sigma_hat = Matrix::Identity(d, d);
  for (int it = 1; it <= options.max_iter; ++it) {
    Eigen::LLT<Matrix> llt(est.sigma_hat);
    // w_i = 1 / (v_i^T S^{-1} v_i) via the Cholesky factor: ||L^{-1} v_i||^2.
    RowMatrix solved = llt.matrixL().solve(dirs.transpose()).transpose();
    Vector w = solved.rowwise().squaredNorm().cwiseInverse();
    RowMatrix weighted = dirs.array().colwise() * w.array().sqrt();
    Matrix next = (dd / static_cast<double>(n)) * (weighted.transpose() * weighted);
    next = 0.5 * (next + next.transpose());
    next *= dd / next.trace();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(next, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues()[0];
    if (min_eig < 1e-12 * next.trace() / dd) {
      next.diagonal().array() += 1e-12 * next.trace() / dd - std::min(min_eig, 0.0);
      next *= dd / next.trace();
      est.regularized = true;
    }

    const double change = (next - est.sigma_hat).norm() / est.sigma_hat.norm();
    est.sigma_hat = std::move(next);
    est.iterations = it;
    if (change < options.tol) {
      est.converged = true;
      break;
    }
  }
  return est;
}

Matrix sym_sqrt(const Matrix& sigma) {
  const EigenDecomposition eig = sym_eig(sigma);
  const Vector root = eig.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors * root.asDiagonal() * eig.eigenvectors.transpose();
}

}  // namespace gapkit
