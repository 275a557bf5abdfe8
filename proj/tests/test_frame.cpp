#include <doctest.h>

#include <numbers>

#include "gapkit/error.hpp"
#include "gapkit/frame.hpp"
#include "gapkit/moments.hpp"
#include "gapkit/spectral.hpp"
#include "support.hpp"

using namespace gapkit;

namespace {

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d[i++] = x;
  return d.asDiagonal();
}

ReferenceFrame frame_of(const Matrix& basis) {
  ReferenceFrame f;
  f.basis_u = basis;
  return f;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_SUITE("frame") {

TEST_CASE("rank from cumulative energy") {
  auto f = build_frame(diag({1, 0}), diag({1, 0}), 0.9);
  CHECK(f.rank() == 1);
  CHECK(std::abs(f.basis_u(0, 0)) == 1.0);

  CHECK(build_frame(Matrix::Identity(4, 4), 0.5).rank() == 2);
  CHECK(build_frame(diag({8, 1, 1}), 0.85).rank() == 2);
  CHECK(build_frame(diag({8, 1, 1}), 0.8).rank() == 1);
  CHECK(build_frame(diag({8, 1, 1}), 1.0).rank() == 3);
  CHECK_THROWS_AS(build_frame(diag({1, 1}), 0.0), UsageError);
  CHECK_THROWS_AS(build_frame(Matrix::Zero(3, 3), 0.9), DegenerateError);
}

TEST_CASE("complement is orthonormal and orthogonal to U") {
  Rng rng(1);
  const auto f = frame_of(rng.orthonormal_basis(10, 4));
  const Matrix c = complement_basis(f);
  CHECK(c.cols() == 6);
  CHECK_NOTHROW(check_orthonormal(c, 1e-12));
  CHECK((f.basis_u.transpose() * c).norm() < 1e-12);
}

TEST_CASE("projections") {
  const auto f = frame_of(Matrix::Identity(2, 1));
  const Vector v = vec({3, 4});
  CHECK(project_u(v, f) == vec({3}));
  CHECK(project_v(v, f) == vec({0, 4}));
  CHECK(project_v(vec({2, 0}), f).norm() == 0.0);
  CHECK_THROWS_AS(project_u(vec({1, 2, 3}), f), DataError);
}

TEST_CASE("Pythagoras and idempotence") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto f = frame_of(rng.orthonormal_basis(12, 1 + static_cast<Eigen::Index>(rng.index(11))));
    const Vector v = rng.normal_vector(12);
    const double lhs = v.squaredNorm();
    const double rhs = project_u(v, f).squaredNorm() + project_v(v, f).squaredNorm();
    CHECK(std::abs(lhs - rhs) < 1e-10 * lhs);
    const Vector pv = project_v(v, f);
    CHECK((project_v(pv, f) - pv).norm() < 1e-12 * std::max(1.0, pv.norm()));
  }
}

TEST_CASE("identical sets have no gap") {
  Rng rng(3);
  const EmbeddingSet x(rng.normal_matrix(50, 5));
  const auto g = decompose_gap(x, x, frame_of(rng.orthonormal_basis(5, 2)));
  CHECK(g.beta.norm() == 0.0);
  CHECK(g.gamma.norm() == 0.0);
  CHECK(g.delta.norm() == 0.0);
  CHECK(g.zeta.norm() == 0.0);
}

TEST_CASE("constant gap in V") {
  Rng rng(4);
  const auto f = frame_of(Matrix::Identity(4, 2));
  const RowMatrix y = rng.normal_matrix(30, 4);
  const Vector c = vec({0, 0, 0.5, -1});
  const RowMatrix x = y.rowwise() + c.transpose();
  const auto g = decompose_gap(EmbeddingSet(x), EmbeddingSet(y), f);
  CHECK(g.beta.norm() < 1e-14);
  CHECK((g.gamma - c).norm() < 1e-14);
  CHECK(g.delta.norm() < 1e-13);
  CHECK(g.zeta.norm() < 1e-13);
}

TEST_CASE("per-sample reconstruction of the gap") {
  Rng rng(5);
  const auto f = frame_of(rng.orthonormal_basis(8, 3));
  const RowMatrix x = rng.normal_matrix(200, 8), y = rng.normal_matrix(200, 8);
  const auto g = decompose_gap(EmbeddingSet(x), EmbeddingSet(y), f);
  const Matrix c = complement_basis(f);
  for (Eigen::Index i = 0; i < 200; ++i) {
    const Vector u_part = f.basis_u * (g.beta + g.delta.row(i).transpose());
    const Vector v_part = g.gamma + g.zeta.row(i).transpose();
    CHECK(project_v(u_part, f).norm() < 1e-12);
    CHECK((f.basis_u.transpose() * v_part).norm() < 1e-12);
    const Vector delta_i = (x.row(i) - y.row(i)).transpose();
    CHECK((u_part + v_part - delta_i).norm() < 1e-10);
  }
  CHECK(column_mean(g.delta).norm() < 1e-12);
  CHECK(column_mean(g.zeta).norm() < 1e-12);
  CHECK((g.zeta * c * c.transpose() - g.zeta).norm() < 1e-10);
}

TEST_CASE("decompose_gap preconditions") {
  const auto f = frame_of(Matrix::Identity(3, 1));
  CHECK_THROWS_AS(decompose_gap(EmbeddingSet(RowMatrix::Ones(3, 3)), EmbeddingSet(RowMatrix::Ones(4, 3)), f),
                  DataError);
  CHECK_THROWS_AS(decompose_gap(EmbeddingSet(RowMatrix::Ones(3, 2)), EmbeddingSet(RowMatrix::Ones(3, 2)), f),
                  DataError);
}

TEST_CASE("leakage ratio") {
  const auto f = frame_of(Matrix::Identity(2, 1));
  CHECK(leakage_ratio(vec({2, 0}), f) == 0.0);
  CHECK(leakage_ratio(vec({0, -3}), f) == 1.0);
  CHECK(leakage_ratio(vec({1, 1}), f) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK_THROWS_AS(leakage_ratio(vec({0, 0}), f), DegenerateError);
}

TEST_CASE("geometric baseline") {
  const auto f = frame_of(Matrix::Identity(2, 1));
  CHECK(geometric_baseline(f, f.basis_u) == doctest::Approx(0.0));
  Matrix rotated(2, 1);
  rotated << std::cos(std::numbers::pi / 6), std::sin(std::numbers::pi / 6);
  CHECK(geometric_baseline(f, rotated) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("leakage never exceeds the geometric baseline for g in U_t") {
  Rng rng(6);
  for (int t = 0; t < 2000; ++t) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(30));
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(d - 1)));
    const auto f = frame_of(rng.orthonormal_basis(d, r));
    const Matrix ut = rng.orthonormal_basis(d, r);
    const Vector g = ut * rng.normal_vector(r);
    CHECK(leakage_ratio(g, f) <= geometric_baseline(f, ut) + 1e-12);
  }
}

TEST_CASE("frame rebuild is identical") {
  Rng rng(7);
  const Matrix a = testing::planted_covariance(9, 30, rng), b = testing::planted_covariance(9, 5, rng);
  const auto f1 = build_frame(a, b, 0.9), f2 = build_frame(a, b, 0.9);
  CHECK(f1.basis_u == f2.basis_u);
}

TEST_CASE("change-of-basis drift") {
  const Vector g = vec({1, 0});
  CHECK(cob_drift(g, g) == 0.0);
  CHECK(cob_drift(vec({1e-8, 0}), vec({0, 0})) == doctest::Approx(1.0));
  CHECK(cob_drift(vec({1, 0.1}), g) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("cosine stability") {
  CHECK(cosine_stability(vec({1, 2}), vec({1, 2})).value == doctest::Approx(1.0));
  CHECK(cosine_stability(vec({1, 2}), vec({-1, -2})).value == doctest::Approx(-1.0));
  CHECK(cosine_stability(vec({1, 0}), vec({0, 3})).value == 0.0);
  const auto z = cosine_stability(vec({0, 0}), vec({1, 0}));
  CHECK(z.degenerate);
  CHECK(z.value == 0.0);
}

TEST_CASE("spectral alignment score") {
  const Matrix s = diag({4, 2, 1});
  CHECK(rho_align(s, s).value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rho_align(diag({3, 2, 1}), diag({1, 2, 3})).value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rho_align(diag({4, 2, 1}), diag({9, 3, 1})).value == doctest::Approx(0.995871).epsilon(1e-6));
  const auto flat = rho_align(Matrix::Identity(3, 3), diag({3, 2, 1}));
  CHECK(flat.degenerate);
  CHECK(flat.value == 0.0);
}

TEST_CASE("gamma noise angle") {
  const Matrix s = diag({5, 1});
  CHECK(gamma_noise_angle(vec({2, 0}), s) == doctest::Approx(0.0));
  CHECK(gamma_noise_angle(vec({0, 1}), s) == doctest::Approx(90.0));
  CHECK(gamma_noise_angle(vec({1, 1}), s) == doctest::Approx(45.0).epsilon(1e-12));
  CHECK(gamma_noise_angle(vec({-1, 1}), s) == doctest::Approx(45.0).epsilon(1e-12));
}

}  // TEST_SUITE
