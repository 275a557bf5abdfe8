#include <doctest.h>

#include <string>

#include "gapkit/error.hpp"
#include "gapkit/frame.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/realign.hpp"
#include "gapkit/spectral.hpp"
#include "support.hpp"

using namespace gapkit;

namespace {

struct Pair {
  EmbeddingSet x, y;
};

// Anisotropic target x and source y with different means and scales.
Pair synthetic_pair(Eigen::Index n, Eigen::Index d, double kappa, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix sx = testing::planted_covariance(d, kappa, rng) * 0.02;
  const Matrix sy = testing::planted_covariance(d, kappa, rng) * 0.07;
  const Vector mx = rng.unit_vector(d) * 0.6, my = rng.unit_vector(d) * 0.4;
  return {EmbeddingSet(testing::gaussian_rows(n, sx, mx, rng)), EmbeddingSet(testing::gaussian_rows(n, sy, my, rng))};
}

std::uint64_t splitmix_ref(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

TEST_SUITE("realign") {

TEST_CASE("trace ratio scale") {
  ModalityStats y, x;
  y.mean = Vector::Zero(2);
  x.mean = Vector::Zero(2);
  y.trace = 1.0;
  x.trace = 4.0;
  CHECK(affine_stats(y, x, 0.0).s == 2.0);
  CHECK(affine_stats(x, x, 0.0).s == 1.0);
  CHECK(affine_stats(y, x).s < 2.0);
  x.mean = Vector::Zero(3);
  CHECK_THROWS_AS(affine_stats(y, x), DataError);
}

TEST_CASE("identical distributions give unit scale and a normalized-mean drift centroid") {
  const auto p = synthetic_pair(5000, 6, 5.0, 1);
  const auto st_y = compute_stats(p.y, false);
  const auto st = estimate_realign(st_y, st_y, p.y, 0.0);
  CHECK(st.s == 1.0);
  Vector expect = Vector::Zero(6);
  for (Eigen::Index i = 0; i < p.y.rows(); ++i) expect += p.y.data.row(i).transpose().normalized();
  expect /= static_cast<double>(p.y.rows());
  CHECK((st.mu_drift - expect).norm() < 1e-12);
}

TEST_CASE("affine step matches target moments on the calibration sample") {
  const auto p = synthetic_pair(20000, 16, 50.0, 2);
  const auto sx = compute_stats(p.x, false), sy = compute_stats(p.y, false);
  const auto st = estimate_realign(sy, sx, p.y);
  RowMatrix affine(p.y.rows(), 16);
  for (Eigen::Index i = 0; i < p.y.rows(); ++i)
    affine.row(i) = realign_stages(p.y.data.row(i).transpose(), st).affine.transpose();
  const auto out = compute_stats(EmbeddingSet(affine), false);
  CHECK((out.mean - sx.mean).norm() < 1e-10);
  const double want = sx.trace * sy.trace / (sy.trace + st.eps);
  CHECK(std::abs(out.trace - want) < 1e-10 * want);
}

TEST_CASE("affine step preserves covariance shape") {
  const auto p = synthetic_pair(20000, 12, 100.0, 3);
  const auto st = estimate_realign(compute_stats(p.y, false), compute_stats(p.x, false), p.y);
  RowMatrix affine(p.y.rows(), 12);
  for (Eigen::Index i = 0; i < p.y.rows(); ++i)
    affine.row(i) = realign_stages(p.y.data.row(i).transpose(), st).affine.transpose();
  const Matrix cy = sample_covariance(p.y.data), ca = sample_covariance(affine);
  CHECK(testing::rel_frob(ca, st.s * st.s * cy) < 1e-10);
  const auto ey = sym_eig(cy), ea = sym_eig(ca);
  CHECK(largest_angle_sine(ey.eigenvectors, ea.eigenvectors) < 1e-8);
  for (Eigen::Index k = 0; k < 12; ++k)
    CHECK(largest_angle_sine(ey.eigenvectors.col(k), ea.eigenvectors.col(k)) < 1e-8);
  const double ky = condition_number(ey.eigenvalues), ka = condition_number(ea.eigenvalues);
  CHECK(std::abs(ka - ky) < 1e-10 * ky);
}

TEST_CASE("recentering restores the target centroid") {
  const auto p = synthetic_pair(10000, 8, 20.0, 4);
  const auto sx = compute_stats(p.x, false);
  const auto st = estimate_realign(compute_stats(p.y, false), sx, p.y);
  Vector mean = Vector::Zero(8);
  for (Eigen::Index i = 0; i < p.y.rows(); ++i) mean += realign_stages(p.y.data.row(i).transpose(), st).recentered;
  mean /= static_cast<double>(p.y.rows());
  CHECK((mean - sx.mean).norm() < 1e-12);
}

TEST_CASE("centered pairwise cosines are unchanged by the affine step") {
  const auto p = synthetic_pair(300, 5, 10.0, 5);
  const auto sy = compute_stats(p.y, false);
  const auto st = estimate_realign(sy, compute_stats(p.x, false), p.y);
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index j = i + 1; j < 40; ++j) {
      const Vector a = realign_stages(p.y.data.row(i).transpose(), st).affine - st.mu_tgt;
      const Vector b = realign_stages(p.y.data.row(j).transpose(), st).affine - st.mu_tgt;
      const Vector u = p.y.data.row(i).transpose() - sy.mean, v = p.y.data.row(j).transpose() - sy.mean;
      CHECK(std::abs(a.dot(b) / (a.norm() * b.norm()) - u.dot(v) / (u.norm() * v.norm())) < 1e-12);
    }
}

TEST_CASE("outputs are unit norm and deterministic") {
  const auto p = synthetic_pair(2000, 8, 20.0, 6);
  const auto st = estimate_realign(compute_stats(p.y, false), compute_stats(p.x, false), p.y);
  const auto a = substitution_operator(p.y, st), b = substitution_operator(p.y, st);
  CHECK(a.data == b.data);
  CHECK((a.data.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-14);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(apply_realign(p.y.data.row(i).transpose(), st) == a.data.row(i).transpose());
}

TEST_CASE("empty batch maps to empty batch") {
  const auto p = synthetic_pair(100, 4, 2.0, 7);
  const auto st = estimate_realign(compute_stats(p.y, false), compute_stats(p.x, false), p.y);
  const auto out = substitution_operator(EmbeddingSet(RowMatrix(0, 4)), st);
  CHECK(out.rows() == 0);
  CHECK(out.dims() == 4);
}

TEST_CASE("collapse and dimension errors") {
  AlignmentStats st;
  st.mu_src = Vector::Zero(2);
  st.mu_tgt = Vector::Zero(2);
  st.mu_drift = Vector::Zero(2);
  st.s = 1.0;
  try {
    apply_realign(Vector::Zero(2), st);
    FAIL("expected a collapse");
  } catch (const DegenerateError& e) {
    CHECK(std::string(e.what()).find("affine") != std::string::npos);
  }
  st.mu_drift = (Vector(2) << 1, 0).finished();
  try {
    apply_realign((Vector(2) << 1, 0).finished(), st);
    FAIL("expected a collapse");
  } catch (const DegenerateError& e) {
    CHECK(std::string(e.what()).find("centroid") != std::string::npos);
  }
  try {
    apply_realign(Vector::Ones(3), st);
    FAIL("expected a dimension error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
  }
}

TEST_CASE("anchor-only shifts and renormalizes") {
  const Vector mu_s = (Vector(2) << 1, 0).finished(), mu_t = (Vector(2) << 0, 1).finished();
  const Vector out = apply_anchor_only((Vector(2) << 1, 1).finished(), mu_s, mu_t);
  CHECK(out.isApprox((Vector(2) << 0, 1).finished()));
}

TEST_CASE("counter generator follows the documented splitmix composition") {
  CHECK(splitmix_ref(0) == 0xe220a8397b1dcdafULL);
  for (std::uint64_t seed : {0ULL, 7ULL, 0xdeadbeefULL})
    for (std::uint64_t stream = 0; stream < 3; ++stream)
      for (std::uint64_t c = 0; c < 5; ++c)
        CHECK(counter_hash(seed, stream, c) == splitmix_ref(seed ^ splitmix_ref(stream ^ splitmix_ref(c))));
}

TEST_CASE("counter normals have unit variance") {
  double s = 0, ss = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = counter_normal(3, 1, static_cast<std::uint64_t>(i));
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(ss / n - 1.0) < 0.01);
}

TEST_CASE("c3 baseline") {
  Rng rng(8);
  const Vector mu = rng.normal_vector(6), e = rng.normal_vector(6);
  CHECK(apply_c3_baseline(e, mu, mu, 0.0, 1).isApprox(e.normalized(), 1e-15));
  const EmbeddingSet set(rng.normal_matrix(20, 6));
  const auto a = apply_c3_baseline(set, mu, mu, 0.0, 1), b = apply_c3_baseline(set, mu, mu, 0.0, 99);
  CHECK(a.data == b.data);
  const auto c = apply_c3_baseline(set, mu, mu, 0.1, 5), d = apply_c3_baseline(set, mu, mu, 0.1, 5);
  CHECK(c.data == d.data);
  CHECK(c.data != a.data);
  CHECK_THROWS_AS(apply_c3_baseline(e, mu, mu, -1.0, 1), UsageError);
}

TEST_CASE("c3 baseline golden output") {
  Vector e(4), mu_s(4), mu_t(4);
  e << 0.5, -0.25, 0.75, 0.125;
  mu_s << 0.1, 0.0, 0.2, 0.0;
  mu_t << 0.0, 0.3, 0.0, -0.1;
  const Vector out = apply_c3_baseline(e, mu_s, mu_t, 0.1, 42, 3);
  // Reference values from an independent script of the splitmix/Box-Muller recipe.
  const double golden[4] = {0.7732249212312002, 0.05627666092232705, 0.6270475847772965, -0.07594395991385278};
  for (int j = 0; j < 4; ++j) CHECK(out[j] == doctest::Approx(golden[j]).epsilon(1e-14));
}

TEST_CASE("whitening-coloring transforms") {
  Rng rng(9);
  const Matrix s = testing::planted_covariance(4, 30, rng);
  bool floored = true;
  CHECK((whitening_coloring(s, s, kDefaultEigFloor, floored) - Matrix::Identity(4, 4)).norm() < 1e-8);
  CHECK_FALSE(floored);
  Matrix a(1, 1), b(1, 1);
  a << 4;
  b << 1;
  CHECK(whitening_coloring(a, b, kDefaultEigFloor, floored)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  const Matrix t = whitening_coloring(s, Matrix::Identity(4, 4) * 2.0, kDefaultEigFloor, floored);
  CHECK(testing::rel_frob(t * s * t.transpose(), Matrix::Identity(4, 4) * 2.0) < 1e-10);

  Matrix sing = Matrix::Zero(3, 3);
  sing(0, 0) = 1;
  sing(1, 1) = 1e-9;
  const Matrix tf = whitening_coloring(sing, Matrix::Identity(3, 3), 1e-6, floored);
  CHECK(floored);
  CHECK(tf.allFinite());
  CHECK(tf.norm() < 2e3);
}

TEST_CASE("blockwise with identity transforms normalizes the input") {
  BlockwiseStats st;
  st.frame.basis_u = Matrix::Identity(5, 3);
  st.basis_v = complement_basis(st.frame);
  st.t_u = Matrix::Identity(3, 3);
  st.t_v = Matrix::Identity(2, 2);
  st.mu_src = st.mu_tgt = st.mu_drift = Vector::Zero(5);
  Rng rng(10);
  const Vector e = rng.normal_vector(5) * 3.0;
  CHECK(apply_blockwise(e, st).isApprox(e.normalized(), 1e-14));

  st.t_u = Vector((Vector(3) << 2, 1, 1).finished()).asDiagonal();
  const Vector pure_u = (Vector(5) << 1, 1, 1, 0, 0).finished();
  const Vector want = (Vector(5) << 2, 1, 1, 0, 0).finished() / std::sqrt(6.0);
  CHECK((apply_blockwise(pure_u, st) - want).norm() < 1e-15);
}

TEST_CASE("blockwise output block covariances match the target") {
  const Eigen::Index d = 8;
  const auto p = synthetic_pair(100000, d, 30.0, 12);
  const auto frame = build_frame(sample_covariance(p.x.data), sample_covariance(p.y.data), 0.7);
  const auto st = estimate_blockwise(frame, p.y, p.x);
  RowMatrix geom(p.y.rows(), d);
  for (Eigen::Index i = 0; i < p.y.rows(); ++i)
    geom.row(i) = blockwise_stages(p.y.data.row(i).transpose(), st).geometry.transpose();
  const Matrix& b = frame.basis_u;
  const Matrix c = st.basis_v;
  CHECK(testing::rel_frob(sample_covariance(geom * b), sample_covariance(p.x.data * b)) < 0.03);
  CHECK(testing::rel_frob(sample_covariance(geom * c), sample_covariance(p.x.data * c)) < 0.03);
  CHECK_FALSE(st.floored_u);
  CHECK_FALSE(st.floored_v);
}

}  // TEST_SUITE
