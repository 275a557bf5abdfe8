#include "gapkit/frame.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gapkit/error.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/spectral.hpp"

namespace gapkit {

namespace {

void check_dims(Eigen::Index got, const ReferenceFrame& frame) {
  if (got != frame.dims())
    throw DataError("dimension mismatch: frame has d=" + std::to_string(frame.dims()) + ", vector has d=" +
                    std::to_string(got));
}

}  // namespace

ReferenceFrame build_frame(const Matrix& sigma_sum, double energy, std::int64_t step) {
  if (!(energy > 0.0 && energy <= 1.0)) throw UsageError("energy threshold must lie in (0, 1]");
  const EigenDecomposition eig = sym_eig(sigma_sum);
  const Vector lambda = eig.eigenvalues.cwiseMax(0.0);
  const double total = lambda.sum();
  if (!(total > 0.0)) throw DegenerateError("build_frame: zero total variance");

  // Relative slack so that exact ties land on the smaller rank.
  const double target = energy * total * (1.0 - 1e-12);
  Eigen::Index r = lambda.size();
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    cumulative += lambda[k];
    if (cumulative >= target) {
      r = k + 1;
      break;
    }
  }
  ReferenceFrame frame;
  frame.basis_u = eig.eigenvectors.leftCols(r);
  frame.energy_threshold = energy;
  frame.created_at_step = step;
  return frame;
}

ReferenceFrame build_frame(const Matrix& sigma_x, const Matrix& sigma_y, double energy, std::int64_t step) {
  if (sigma_x.rows() != sigma_y.rows() || sigma_x.cols() != sigma_y.cols())
    throw DataError("build_frame: covariance dimensions differ");
  return build_frame(Matrix(sigma_x + sigma_y), energy, step);
}

Matrix top_eigenbasis(const Matrix& sigma, Eigen::Index r) {
  const EigenDecomposition eig = sym_eig(sigma);
  if (r < 1 || r > eig.eigenvectors.cols()) throw DataError("top_eigenbasis: invalid rank");
  return eig.eigenvectors.leftCols(r);
}

Matrix complement_basis(const ReferenceFrame& frame) {
  const Eigen::Index d = frame.dims();
  const Eigen::Index r = frame.rank();
  Eigen::HouseholderQR<Matrix> qr(frame.basis_u);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  Matrix v = q.rightCols(d - r);
  canonicalize_signs(v);
  return v;
}

Vector project_u(const Eigen::Ref<const Vector>& v, const ReferenceFrame& frame) {
  check_dims(v.size(), frame);
  return frame.basis_u.transpose() * v;
}

Vector project_v(const Eigen::Ref<const Vector>& v, const ReferenceFrame& frame) {
  check_dims(v.size(), frame);
  return v - frame.basis_u * (frame.basis_u.transpose() * v);
}

GapDecomposition decompose_gap(const EmbeddingSet& x, const EmbeddingSet& y, const ReferenceFrame& frame) {
  if (x.rows() != y.rows())
    throw DataError("decompose_gap: paired sets have " + std::to_string(x.rows()) + " and " +
                    std::to_string(y.rows()) + " rows");
  if (x.rows() < 2) throw DataError("decompose_gap: need at least 2 pairs");
  if (x.dims() != y.dims()) throw DataError("decompose_gap: embedding dimensions differ");
  check_dims(x.dims(), frame);

  const Matrix& b = frame.basis_u;
  const RowMatrix diff = x.data - y.data;
  GapDecomposition out;
  out.mean_gap = column_mean(diff);
  out.beta = b.transpose() * out.mean_gap;
  out.gamma = out.mean_gap - b * out.beta;
  const RowMatrix centered = diff.rowwise() - out.mean_gap.transpose();
  out.delta = centered * b;
  out.zeta = centered - out.delta * b.transpose();
  return out;
}

double leakage_ratio(const Eigen::Ref<const Vector>& g, const ReferenceFrame& frame) {
  const double norm = g.norm();
  if (!(norm > 0.0)) throw DegenerateError("leakage_ratio: zero gradient");
  return std::min(1.0, project_v(g, frame).norm() / norm);
}

double geometric_baseline(const ReferenceFrame& frame, const Matrix& basis_ut) {
  return largest_angle_sine(frame.basis_u, basis_ut);
}

double cob_drift(const Vector& gamma_t, const Vector& gamma_t0, double eps) {
  if (gamma_t.size() != gamma_t0.size()) throw DataError("cob_drift: dimension mismatch");
  return (gamma_t - gamma_t0).norm() / std::max(gamma_t0.norm(), eps);
}

Flagged cosine_stability(const Vector& gamma_t, const Vector& gamma_prev) {
  if (gamma_t.size() != gamma_prev.size()) throw DataError("cosine_stability: dimension mismatch");
  const double na = gamma_t.norm(), nb = gamma_prev.norm();
  if (!(na > 0.0) || !(nb > 0.0)) return {0.0, true};
  return {std::clamp(gamma_t.dot(gamma_prev) / (na * nb), -1.0, 1.0), false};
}

Flagged rho_align(const Matrix& sigma_u, const Matrix& grad_cov_u) {
  if (sigma_u.rows() != grad_cov_u.rows()) throw DataError("rho_align: matrix sizes differ");
  const Vector a = sym_eig(sigma_u).eigenvalues;
  const Vector b = sym_eig(grad_cov_u).eigenvalues;
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  const double sa = da.norm(), sb = db.norm();
  if (!(sa > 1e-300) || !(sb > 1e-300) || sa <= 1e-14 * a.cwiseAbs().maxCoeff() ||
      sb <= 1e-14 * b.cwiseAbs().maxCoeff())
    return {0.0, true};
  return {std::clamp(da.dot(db) / (sa * sb), -1.0, 1.0), false};
}

double gamma_noise_angle(const Vector& gamma, const Matrix& sigma_v) {
  const double norm = gamma.norm();
  if (!(norm > 0.0)) throw DegenerateError("gamma_noise_angle: zero gamma");
  if (sigma_v.rows() != gamma.size()) throw DataError("gamma_noise_angle: dimension mismatch");
  const Vector top = sym_eig(sigma_v).eigenvectors.col(0);
  const double along = gamma.dot(top);
  const double across = (gamma - along * top).norm();
  return std::atan2(across, std::abs(along)) * 180.0 / std::numbers::pi;
}

}  // namespace gapkit
