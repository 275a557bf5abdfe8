#include "gapkit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "gapkit/error.hpp"
#include "gapkit/frame.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/oracle.hpp"
#include "gapkit/random.hpp"
#include "gapkit/spectral.hpp"

namespace gapkit {

namespace {

constexpr double kTemperatures[] = {0.05, 0.5, 1.0};
constexpr int kBatches = 100;
constexpr Eigen::Index kBatch = 8;
constexpr Eigen::Index kDims = 16;
constexpr double kStep = 1e-5;

VerifyCheck make(const std::string& suite, const std::string& name, double value, const std::string& rel,
                 double threshold, std::string detail = {}) {
  VerifyCheck c{suite, name, value, rel, threshold, false, std::move(detail)};
  if (rel == "<=") c.passed = value <= threshold;
  else if (rel == ">=") c.passed = value >= threshold;
  else if (rel == ">") c.passed = value > threshold;
  else c.passed = value == threshold;
  if (!std::isfinite(value)) c.passed = false;
  return c;
}

RowMatrix unit_rows(Rng& rng, Eigen::Index n, Eigen::Index d) {
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i) = rng.unit_vector(d).transpose();
  return m;
}

ContrastiveBatch random_batch(Rng& rng, double tau) {
  return {unit_rows(rng, kBatch, kDims), unit_rows(rng, kBatch, kDims), tau};
}

// Plain evaluation of L_i with no unit-norm requirement, for differencing.
double raw_loss(const RowMatrix& x, const RowMatrix& y, double tau, Eigen::Index i) {
  const Vector s = y * x.row(i).transpose() / tau;
  const double top = s.maxCoeff();
  return top + std::log((s.array() - top).exp().sum()) - s[i];
}

double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

std::vector<VerifyCheck> gradients_suite(std::uint64_t seed) {
  const std::string suite = "gradients";
  Rng rng(seed);
  double worst_anchor = 0.0, worst_candidate = 0.0, worst_simplex = 0.0;
  for (int b = 0; b < kBatches; ++b) {
    const double tau = kTemperatures[b % 3];
    ContrastiveBatch batch = random_batch(rng, tau);
    for (Eigen::Index i = 0; i < kBatch; ++i) {
      worst_simplex = std::max(worst_simplex, std::abs(softmax_weights(batch, i).sum() - 1.0));

      Vector fd(kDims);
      for (Eigen::Index k = 0; k < kDims; ++k) {
        RowMatrix plus = batch.anchors, minus = batch.anchors;
        plus(i, k) += kStep;
        minus(i, k) -= kStep;
        fd[k] = (raw_loss(plus, batch.candidates, tau, i) - raw_loss(minus, batch.candidates, tau, i)) / (2 * kStep);
      }
      worst_anchor = std::max(worst_anchor, relative_error(grad_anchor(batch, i), fd));

      // Whole dL_i/dY at once: single entries with p_ij near 0 carry no signal.
      Matrix analytic(kBatch, kDims), fdc(kBatch, kDims);
      for (Eigen::Index j = 0; j < kBatch; ++j) {
        analytic.row(j) = grad_candidate(batch, i, j).transpose();
        for (Eigen::Index k = 0; k < kDims; ++k) {
          RowMatrix plus = batch.candidates, minus = batch.candidates;
          plus(j, k) += kStep;
          minus(j, k) -= kStep;
          fdc(j, k) = (raw_loss(batch.anchors, plus, tau, i) - raw_loss(batch.anchors, minus, tau, i)) / (2 * kStep);
        }
      }
      worst_candidate = std::max(worst_candidate, (analytic - fdc).norm() / std::max(fdc.norm(), 1e-300));
    }
  }

  std::vector<VerifyCheck> out;
  out.push_back(make(suite, "anchor_vs_central_difference", worst_anchor, "<=", 1e-6,
                     "max relative error, 100 batches B=8 d=16, tau in {0.05,0.5,1}, h=1e-5"));
  out.push_back(make(suite, "candidate_vs_central_difference", worst_candidate, "<=", 1e-6,
                     "max relative Frobenius error of dL_i/dY over all i"));
  out.push_back(make(suite, "softmax_simplex", worst_simplex, "<=", 1e-12, "max |sum_j p_ij - 1|"));

  ContrastiveBatch single{unit_rows(rng, 1, 4), unit_rows(rng, 1, 4), 0.3};
  out.push_back(make(suite, "singleton_loss_is_zero", std::abs(infonce_loss(single, 0)), "==", 0.0));
  out.push_back(make(suite, "singleton_gradient_is_zero", grad_anchor(single, 0).norm(), "==", 0.0));

  ContrastiveBatch twin{unit_rows(rng, 2, 4), RowMatrix(2, 4), 0.7};
  twin.candidates.row(0) = rng.unit_vector(4).transpose();
  twin.candidates.row(1) = twin.candidates.row(0);
  out.push_back(make(suite, "duplicate_candidates_log2", std::abs(infonce_loss(twin, 0) - std::log(2.0)), "<=",
                     1e-15));

  ContrastiveBatch ref{RowMatrix::Identity(2, 2), RowMatrix::Identity(2, 2), 1.0};
  out.push_back(make(suite, "reference_two_candidate_loss",
                     std::abs(infonce_loss(ref, 0) - std::log1p(std::exp(-1.0))), "<=", 1e-15,
                     "-log(e / (e + 1))"));
  return out;
}

std::vector<VerifyCheck> span_suite(std::uint64_t seed) {
  const std::string suite = "span";
  Rng rng(seed + 1);
  double worst_span = 0.0, worst_collinear = 0.0;
  for (int b = 0; b < kBatches; ++b) {
    ContrastiveBatch batch = random_batch(rng, kTemperatures[b % 3]);
    const Matrix cand_t = batch.candidates.transpose();  // d x B
    const Eigen::ColPivHouseholderQR<Matrix> qr(cand_t);
    for (Eigen::Index i = 0; i < kBatch; ++i) {
      const Vector g = grad_anchor(batch, i);
      const Vector coeffs = qr.solve(g);
      const Vector projected = cand_t * coeffs;
      if (g.norm() > 0) worst_span = std::max(worst_span, (g - projected).norm() / g.norm());

      const Vector e = batch.anchors.row(i).transpose();
      for (Eigen::Index j = 0; j < kBatch; ++j) {
        const Vector gc = grad_candidate(batch, i, j);
        if (gc.norm() == 0) continue;
        const Vector residual = gc - gc.dot(e) * e;
        worst_collinear = std::max(worst_collinear, residual.norm() / gc.norm());
      }
    }
  }
  std::vector<VerifyCheck> out;
  out.push_back(make(suite, "anchor_gradient_in_candidate_span", worst_span, "<=", 1e-10,
                     "max ||g - P_span g|| / ||g||"));
  out.push_back(make(suite, "candidate_gradient_collinear", worst_collinear, "<=", 1e-12,
                     "max ||g - (g.e_x) e_x|| / ||g||"));

  // Correct pairing dominant and a tiny temperature: p_ii saturates at 1.
  ContrastiveBatch sharp{RowMatrix::Identity(4, 6), RowMatrix::Identity(4, 6), 1e-3};
  out.push_back(make(suite, "saturated_candidate_gradient", grad_candidate(sharp, 0, 0).norm(), "<=", 1e-12));
  return out;
}

Matrix perturbed_basis(Rng& rng, const Matrix& u, double scale) {
  Matrix m = u + scale * Matrix(rng.normal_matrix(u.rows(), u.cols()));
  const Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(u.rows(), u.cols());
}

std::vector<VerifyCheck> bounds_suite(std::uint64_t seed) {
  const std::string suite = "bounds";
  Rng rng(seed + 2);
  constexpr int kTriples = 10000;
  int violations = 0;
  double worst_excess = -1.0;
  for (int t = 0; t < kTriples; ++t) {
    const auto d = static_cast<Eigen::Index>(2 + rng.index(63));
    const auto r = static_cast<Eigen::Index>(1 + rng.index(static_cast<std::uint64_t>(d - 1)));
    ReferenceFrame frame;
    frame.basis_u = rng.orthonormal_basis(d, r);
    const Matrix ut = perturbed_basis(rng, frame.basis_u, rng.uniform());
    const Vector g = ut * rng.normal_vector(r);
    const double excess = leakage_ratio(g, frame) - largest_angle_sine(frame.basis_u, ut);
    worst_excess = std::max(worst_excess, excess);
    if (excess > 1e-12) ++violations;
  }
  std::vector<VerifyCheck> out;
  out.push_back(make(suite, "geometric_leakage", violations, "==", 0,
                     "violations of ||P_V g||/||g|| <= sin(theta) + 1e-12 over 1e4 (U, U_t, g in U_t); max excess " +
                         std::to_string(worst_excess)));

  // g = g_U + L (P_U g): leakage comes only from the coupling.
  {
    const Eigen::Index d = 24, r = 5;
    ReferenceFrame frame;
    frame.basis_u = rng.orthonormal_basis(d, r);
    const Matrix c = complement_basis(frame);
    const Matrix l = 0.3 * Matrix(rng.normal_matrix(d - r, r)) / std::sqrt(static_cast<double>(d));
    RowMatrix g(2000, d);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const Vector a = rng.normal_vector(r);
      g.row(i) = (frame.basis_u * a + c * (l * a)).transpose();
    }
    const LeakageReport rep = leakage_bound_check(g, frame, frame.basis_u, l);
    out.push_back(make(suite, "coupled_model_leakage", static_cast<double>(rep.violations), "==", 0,
                       "g = U a + C L a, bound sin(theta) + ||L||"));

    RowMatrix bad(2000, d);
    for (Eigen::Index i = 0; i < bad.rows(); ++i) {
      const Vector a = rng.normal_vector(r);
      bad.row(i) = (frame.basis_u * a + c * (l * a + 3.0 * rng.normal_vector(d - r))).transpose();
    }
    const LeakageReport adv = leakage_bound_check(bad, frame, frame.basis_u, l);
    out.push_back(make(suite, "adversarial_leakage_reported", adv.violation_fraction, ">", 0.0,
                       "extra V noise outside the model must surface as violations"));
  }
  return out;
}

struct Planted {
  RowMatrix delta;
  RowMatrix zeta;
  Matrix l;
  Matrix sigma_v;
};

// delta ~ N(0, diag(s_u)), zeta = L delta + noise with per-entry variance set
// so that E||L delta||^2 / E||noise||^2 = snr (no noise for snr <= 0).
Planted planted_model(Rng& rng, Eigen::Index n, Eigen::Index r, Eigen::Index q, double snr, bool coupled) {
  Planted p;
  Vector s_u(r);
  for (Eigen::Index k = 0; k < r; ++k) s_u[k] = 1.0 / (1.0 + k);
  p.l = coupled ? Matrix(rng.normal_matrix(q, r)) : Matrix::Zero(q, r);
  p.delta = rng.normal_matrix(n, r) * s_u.cwiseSqrt().asDiagonal();
  p.zeta = p.delta * p.l.transpose();
  const double signal = (p.l * s_u.asDiagonal() * p.l.transpose()).trace();
  double noise_var = 0.0;
  if (snr > 0) noise_var = signal / snr / static_cast<double>(q);
  if (!coupled) noise_var = 1.0;
  p.zeta += std::sqrt(noise_var) * rng.normal_matrix(n, q);
  p.sigma_v = noise_var * Matrix::Identity(q, q);
  return p;
}

double rel_fro(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

std::vector<VerifyCheck> coupling_suite(std::uint64_t seed) {
  const std::string suite = "coupling";
  Rng rng(seed + 3);
  const Eigen::Index r = 4, q = 6;
  std::vector<VerifyCheck> out;

  {
    const Planted p = planted_model(rng, 2000, r, q, 0.0, true);
    const CouplingEstimate est = estimate_coupling(p.delta, p.zeta, 1e-10);
    out.push_back(make(suite, "exact_linear_recovery", rel_fro(est.l_hat, p.l), "<=", 1e-6, "lambda = 1e-10"));
    out.push_back(make(suite, "exact_linear_r_squared", est.r_squared, ">=", 1.0 - 1e-9));
    const MomentIdentityResiduals m = moment_identity_check(p.delta, p.zeta, p.l, Matrix::Zero(q, q));
    out.push_back(make(suite, "exact_moment_identities", std::max(m.cross_rel, m.cov_rel), "<=", 1e-10,
                       "deterministic zeta = L delta"));
  }
  {
    const Planted p = planted_model(rng, 10000, r, q, 10.0, true);
    const CouplingEstimate est = estimate_coupling(p.delta, p.zeta, 1e-3);
    out.push_back(make(suite, "snr10_recovery", rel_fro(est.l_hat, p.l), "<=", 0.10, "N = 1e4"));
  }
  {
    const Planted p = planted_model(rng, 100000, r, q, 10.0, true);
    const MomentIdentityResiduals m = moment_identity_check(p.delta, p.zeta, p.l, p.sigma_v);
    out.push_back(make(suite, "cross_moment_identity", m.cross_rel, "<=", 0.02, "E[delta zeta^T] = Sigma_U L^T, N = 1e5"));
    out.push_back(make(suite, "covariance_identity", m.cov_rel, "<=", 0.02, "Cov(zeta) = Sigma_V + L Sigma_U L^T"));
  }
  {
    const Eigen::Index n = 10000;
    const Planted p = planted_model(rng, n, r, q, 0.0, false);
    const CouplingEstimate est = estimate_coupling(p.delta, p.zeta, 1e-3);
    out.push_back(make(suite, "independence_r_squared", est.r_squared, "<=", 0.02));
    out.push_back(make(suite, "independence_coupling_norm", est.spectral_norm, "<=",
                       3.0 / std::sqrt(static_cast<double>(n)) * std::sqrt(static_cast<double>(r * q)),
                       "3/sqrt(N) per entry"));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"gradients", "span", "bounds", "coupling"};
  return names;
}

std::vector<VerifyCheck> run_verify(const std::string& suite, std::uint64_t seed) {
  if (suite == "all") {
    std::vector<VerifyCheck> all;
    for (const auto& name : verify_suites()) {
      auto part = run_verify(name, seed);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  if (suite == "gradients") return gradients_suite(seed);
  if (suite == "span") return span_suite(seed);
  if (suite == "bounds") return bounds_suite(seed);
  if (suite == "coupling") return coupling_suite(seed);
  throw UsageError("unknown verify suite '" + suite + "'");
}

void write_verify_table(const std::vector<VerifyCheck>& checks, std::ostream& out) {
  std::size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.suite.size() + c.name.size() + 1);
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(static_cast<int>(width))
        << (c.suite + "/" + c.name) << "  " << std::setprecision(6) << c.value << ' ' << c.relation << ' '
        << c.threshold;
    if (!c.detail.empty()) out << "  (" << c.detail << ')';
    out << '\n';
  }
}

}  // namespace gapkit
