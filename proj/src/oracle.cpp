#include "gapkit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gapkit/error.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/spectral.hpp"

namespace gapkit {

namespace {

void check_batch(const ContrastiveBatch& batch, Eigen::Index i) {
  if (!(batch.temperature > 0.0)) throw UsageError("temperature must be positive");
  if (batch.anchors.rows() != batch.candidates.rows() || batch.anchors.cols() != batch.candidates.cols())
    throw DataError("anchor and candidate matrices differ in shape");
  if (i < 0 || i >= batch.size()) throw DataError("anchor index out of range");
}

Vector logits(const ContrastiveBatch& batch, Eigen::Index i) {
  return batch.candidates * batch.anchors.row(i).transpose() / batch.temperature;
}

}  // namespace

void validate(const ContrastiveBatch& batch, double tol) {
  if (!(batch.temperature > 0.0)) throw UsageError("temperature must be positive");
  if (batch.anchors.rows() != batch.candidates.rows() || batch.anchors.cols() != batch.candidates.cols())
    throw DataError("anchor and candidate matrices differ in shape");
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    if (std::abs(batch.anchors.row(i).norm() - 1.0) > tol)
      throw DataError("anchor row " + std::to_string(i) + " is not unit-norm");
    if (std::abs(batch.candidates.row(i).norm() - 1.0) > tol)
      throw DataError("candidate row " + std::to_string(i) + " is not unit-norm");
  }
}

Vector softmax_weights(const ContrastiveBatch& batch, Eigen::Index i) {
  check_batch(batch, i);
  const Vector s = logits(batch, i);
  const Vector w = (s.array() - s.maxCoeff()).exp();
  return w / w.sum();
}

double infonce_loss(const ContrastiveBatch& batch, Eigen::Index i) {
  check_batch(batch, i);
  const Vector s = logits(batch, i);
  const double top = s.maxCoeff();
  const double lse = top + std::log((s.array() - top).exp().sum());
  return lse - s[i];
}

Vector grad_anchor(const ContrastiveBatch& batch, Eigen::Index i) {
  const Vector p = softmax_weights(batch, i);
  return (batch.candidates.transpose() * p - batch.candidates.row(i).transpose()) / batch.temperature;
}

Vector grad_candidate(const ContrastiveBatch& batch, Eigen::Index i, Eigen::Index j) {
  const Vector p = softmax_weights(batch, i);
  if (j < 0 || j >= batch.size()) throw DataError("candidate index out of range");
  const double coeff = (p[j] - (i == j ? 1.0 : 0.0)) / batch.temperature;
  return coeff * batch.anchors.row(i).transpose();
}

CouplingEstimate estimate_coupling(const RowMatrix& delta, const RowMatrix& zeta, double ridge_lambda) {
  if (ridge_lambda < 0.0) throw UsageError("ridge lambda must be non-negative");
  if (delta.rows() != zeta.rows()) throw DataError("coupling: delta and zeta sample counts differ");
  if (delta.rows() < delta.cols()) throw DataError("coupling: need at least r samples");
  CouplingEstimate est;
  est.ridge_lambda = ridge_lambda;

  RowMatrix d = delta;
  RowMatrix z = zeta;
  const Vector md = column_mean(d);
  const Vector mz = column_mean(z);
  const double scale = std::max(d.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff());
  if (md.norm() > 1e-10 * std::max(scale, 1.0) || mz.norm() > 1e-10 * std::max(scale, 1.0)) {
    est.recentered = true;
    d.rowwise() -= md.transpose();
    z.rowwise() -= mz.transpose();
  }

  // With D = d^T and Z = z^T: Z D^T = z^T d and D D^T = d^T d.
  Matrix gram = d.transpose() * d;
  gram.diagonal().array() += ridge_lambda;
  const Matrix cross = z.transpose() * d;  // q x r
  est.l_hat = gram.ldlt().solve(cross.transpose()).transpose();

  if (est.l_hat.size() > 0) {
    Eigen::JacobiSVD<Matrix> svd(est.l_hat);
    est.spectral_norm = svd.singularValues()[0];
  }
  const double total = z.squaredNorm();
  const double resid = (z - d * est.l_hat.transpose()).squaredNorm();
  est.r_squared = total > 0.0 ? 1.0 - resid / total : 0.0;
  return est;
}

LeakageReport leakage_bound_check(const RowMatrix& gradients, const ReferenceFrame& frame, const Matrix& basis_ut,
                                  const Matrix& l_hat, double tolerance) {
  LeakageReport rep;
  rep.sin_theta = geometric_baseline(frame, basis_ut);
  if (l_hat.size() > 0) {
    Eigen::JacobiSVD<Matrix> svd(l_hat);
    rep.coupling_norm = svd.singularValues()[0];
  }
  rep.bound = rep.sin_theta + rep.coupling_norm;
  rep.samples = static_cast<std::size_t>(gradients.rows());
  rep.max_excess = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < gradients.rows(); ++i) {
    const double ratio = leakage_ratio(gradients.row(i).transpose(), frame);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    rep.max_excess = std::max(rep.max_excess, ratio - rep.bound);
    if (ratio > rep.bound + tolerance) ++rep.violations;
  }
  rep.violation_fraction = rep.samples ? static_cast<double>(rep.violations) / static_cast<double>(rep.samples) : 0.0;
  return rep;
}

MomentIdentityResiduals moment_identity_check(const RowMatrix& delta, const RowMatrix& zeta, const Matrix& l,
                                              const std::optional<Matrix>& sigma_v_background) {
  if (delta.rows() != zeta.rows() || delta.rows() < 2) throw DataError("moment check: need matching samples");
  if (l.rows() != zeta.cols() || l.cols() != delta.cols()) throw DataError("moment check: L has the wrong shape");
  const double n = static_cast<double>(delta.rows());
  const RowMatrix d = delta.rowwise() - column_mean(delta).transpose();
  const RowMatrix z = zeta.rowwise() - column_mean(zeta).transpose();

  const Matrix sigma_u = d.transpose() * d / n;
  const Matrix cross = d.transpose() * z / n;  // E[delta zeta^T], r x q
  const Matrix cov_z = z.transpose() * z / n;
  Matrix sigma_v;
  if (sigma_v_background) {
    sigma_v = *sigma_v_background;
  } else {
    const RowMatrix background = z - d * l.transpose();
    sigma_v = background.transpose() * background / n;
  }

  MomentIdentityResiduals out;
  const Matrix cross_model = sigma_u * l.transpose();
  out.cross_abs = (cross - cross_model).norm();
  out.cross_rel = out.cross_abs / std::max(cross_model.norm(), 1e-300);
  const Matrix cov_model = sigma_v + l * sigma_u * l.transpose();
  out.cov_abs = (cov_z - cov_model).norm();
  out.cov_rel = out.cov_abs / std::max(cov_model.norm(), 1e-300);
  return out;
}

}  // namespace gapkit
