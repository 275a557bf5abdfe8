#include <doctest.h>

#include <numbers>

#include "gapkit/error.hpp"
#include "gapkit/spectral.hpp"
#include "support.hpp"

using namespace gapkit;

namespace {

constexpr double kPi = std::numbers::pi;

Vector power_spectrum(int n, double alpha, double c = 1.0) {
  Vector v(n);
  for (int k = 1; k <= n; ++k) v[k - 1] = c * std::pow(static_cast<double>(k), -alpha);
  return v;
}

Matrix span_of(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("sym_eig on a diagonal matrix") {
  Matrix s = Matrix::Zero(2, 2);
  s(0, 0) = 1;
  s(1, 1) = 3;
  const auto e = sym_eig(s);
  CHECK(e.eigenvalues[0] == 3.0);
  CHECK(e.eigenvalues[1] == 1.0);
  CHECK(std::abs(e.eigenvectors(1, 0)) == 1.0);
  CHECK(e.eigenvectors(1, 0) > 0);
  CHECK(sym_eig(Matrix::Identity(5, 5)).eigenvalues.isApprox(Vector::Ones(5)));
}

TEST_CASE("sym_eig rejects asymmetric or non-finite input") {
  Matrix s = Matrix::Identity(2, 2);
  s(0, 1) = 1;
  CHECK_THROWS_AS(sym_eig(s), DataError);
  s(0, 1) = std::nan("");
  CHECK_THROWS_AS(sym_eig(s), DataError);
}

TEST_CASE("eigenvector signs are canonical") {
  Rng rng(1);
  const Matrix s = testing::planted_covariance(6, 10.0, rng);
  const auto a = sym_eig(s);
  const auto b = sym_eig(Matrix(s * 1.0));
  CHECK(a.eigenvectors == b.eigenvectors);
  for (Eigen::Index j = 0; j < 6; ++j) {
    Eigen::Index at;
    a.eigenvectors.col(j).cwiseAbs().maxCoeff(&at);
    CHECK(a.eigenvectors(at, j) > 0);
  }
}

TEST_CASE("condition number") {
  CHECK(condition_number(Vector::Ones(3)) == 1.0);
  CHECK(condition_number((Vector(2) << 100, 1).finished()) == 100.0);
  CHECK(condition_number((Vector(2) << 1, 0).finished()) == doctest::Approx(1e12));
  CHECK(condition_number(Vector::Zero(3)) == 1.0);
}

TEST_CASE("effective rank") {
  CHECK(effective_rank(Vector::Ones(32)) == doctest::Approx(32.0).epsilon(1e-12));
  Vector e1 = Vector::Zero(10);
  e1[0] = 1;
  CHECK(effective_rank(e1) == 1.0);
  // 2^1.5: entropy of (1/2, 1/4, 1/4) is 1.5 ln 2.
  CHECK(effective_rank((Vector(3) << 2, 1, 1).finished()) == doctest::Approx(2.8284271247461903).epsilon(1e-12));
}

TEST_CASE("effective rank lies in [1, d] and equals d only for a flat spectrum") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const int d = 2 + static_cast<int>(rng.index(30));
    Vector v(d);
    for (int k = 0; k < d; ++k) v[k] = rng.uniform() + 1e-3;
    const double er = effective_rank(v);
    CHECK(er >= 1.0);
    CHECK(er < d);
  }
  CHECK(effective_rank(Vector::Constant(7, 0.3)) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("power-law slope on exact spectra") {
  CHECK(power_law_alpha(power_spectrum(100, 2.0)) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(power_law_alpha(power_spectrum(100, 1.33, 0.37)) - 1.33) < 1e-6);
}

TEST_CASE("power-law slope with multiplicative noise") {
  Rng rng(3);
  Vector v = power_spectrum(100, 1.0);
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] += rng.uniform() * 1e-6 * v[k];
  CHECK(std::abs(power_law_alpha(v) - 1.0) < 1e-3);
}

TEST_CASE("power-law slope ignores global scale") {
  const Vector v = power_spectrum(64, 1.7);
  CHECK(power_law_alpha(Vector(v * 8.0)) == power_law_alpha(v));
  CHECK(power_law_alpha(Vector(v * 0.125)) == power_law_alpha(v));
  CHECK(std::abs(power_law_alpha(Vector(v * 3.7)) - power_law_alpha(v)) < 1e-12);
  CHECK_THROWS_AS(power_law_alpha(power_spectrum(3, 1.0)), DataError);
}

TEST_CASE("principal angles") {
  const Matrix a = span_of({1, 0});
  CHECK(principal_angles(a, a)[0] == doctest::Approx(0.0));
  CHECK(principal_angles(a, span_of({0, 1}))[0] == doctest::Approx(kPi / 2));
  const double c = std::cos(kPi / 6), s = std::sin(kPi / 6);
  CHECK(std::abs(principal_angles(a, span_of({c, s}))[0] - kPi / 6) < 1e-10);
  CHECK(largest_angle_sine(a, span_of({c, s})) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("principal angles are symmetric") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const Matrix a = rng.orthonormal_basis(9, 3), b = rng.orthonormal_basis(9, 3);
    const auto ab = principal_angles(a, b), ba = principal_angles(b, a);
    REQUIRE(ab.size() == ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i) CHECK(std::abs(ab[i] - ba[i]) < 1e-12);
  }
}

TEST_CASE("Tyler on isotropic Gaussian") {
  Rng rng(5);
  const auto est = tyler_shape(rng.normal_matrix(20000, 4));
  CHECK(est.converged);
  CHECK(testing::rel_frob(est.sigma_hat, Matrix::Identity(4, 4)) < 0.05);
  CHECK(std::abs(est.sigma_hat.trace() - 4.0) < 1e-10);
}

TEST_CASE("Tyler in one dimension") {
  RowMatrix m(5, 1);
  m << 3, -2, 0.1, 7, -1;
  CHECK(tyler_shape(m).sigma_hat(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Tyler recovers an ACG shape") {
  Rng rng(6);
  RowMatrix m = rng.normal_matrix(20000, 2);
  m.col(0) *= 10.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  const auto est = tyler_shape(m);
  Matrix truth = Matrix::Zero(2, 2);
  truth(0, 0) = 100;
  truth(1, 1) = 1;
  truth *= 2.0 / truth.trace();
  CHECK(testing::rel_frob(est.sigma_hat, truth) < 0.05);
}

TEST_CASE("Tyler is scale invariant") {
  Rng rng(7);
  const RowMatrix m = rng.normal_matrix(500, 5);
  const Matrix base = tyler_shape(m).sigma_hat;
  for (double c : {0.25, 2.0, 1024.0}) CHECK(tyler_shape(RowMatrix(m * c)).sigma_hat == base);
  for (double c : {0.3, 7.1}) CHECK(testing::rel_frob(tyler_shape(RowMatrix(m * c)).sigma_hat, base) < 1e-13);
}

TEST_CASE("Tyler is rotation equivariant") {
  Rng rng(8);
  const RowMatrix m = testing::gaussian_rows(3000, testing::planted_covariance(5, 20.0, rng), Vector::Zero(5), rng);
  const Matrix r = rng.orthogonal(5);
  const Matrix a = tyler_shape(RowMatrix(m * r.transpose())).sigma_hat;
  const Matrix b = r * tyler_shape(m).sigma_hat * r.transpose();
  CHECK(testing::rel_frob(a, b) < 1e-8);
}

TEST_CASE("Tyler rejects zero-norm samples") {
  RowMatrix m = RowMatrix::Ones(4, 2);
  m.row(2).setZero();
  CHECK_THROWS_AS(tyler_shape(m), DataError);
}

TEST_CASE("sym_sqrt squares back") {
  Rng rng(9);
  const Matrix s = testing::planted_covariance(7, 50.0, rng);
  const Matrix r = sym_sqrt(s);
  CHECK(testing::rel_frob(r * r, s) < 1e-12);
}

}  // TEST_SUITE
