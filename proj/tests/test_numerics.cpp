#include "isoman/error.hpp"
#include "isoman/integrate.hpp"
#include "isoman/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace isoman;

namespace {

Matrix random_matrix(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = d(gen);
  return a;
}

Matrix hilbert(int n) {
  Matrix h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = 1.0 / (i + j + 1);
  return h;
}

}  // namespace

TEST_CASE("eig returns biorthonormal left and right vectors") {
  for (unsigned seed : {1u, 2u, 3u, 4u}) {
    Matrix a = random_matrix(6, seed);
    EigenSystem e = eig(a);
    CMatrix pairing = e.left.transpose() * e.right;
    CHECK((pairing - CMatrix::Identity(6, 6)).norm() < 1e-10);
    for (int k = 0; k < 6; ++k) {
      CHECK((a.cast<Complex>() * e.right.col(k) - e.values(k) * e.right.col(k)).norm() < 1e-10);
      CHECK((a.transpose().cast<Complex>() * e.left.col(k) - e.values(k) * e.left.col(k)).norm() < 1e-9);
    }
  }
}

TEST_CASE("eig orders by decay rate and pairs conjugates exactly") {
  Matrix a(4, 4);
  a << -0.1, 2.0, 0.0, 0.0,
       -2.0, -0.1, 0.0, 0.0,
        0.0, 0.0, -3.0, 0.0,
        0.0, 0.0, 0.0, -0.05;
  EigenSystem e = eig(a);
  CHECK(e.values(0).real() == doctest::Approx(-0.05));
  CHECK(e.values(1).real() == doctest::Approx(-0.1));
  CHECK(e.values(1).imag() < 0.0);
  CHECK(e.partner[1] == 2);
  CHECK(e.partner[2] == 1);
  CHECK(e.partner[0] == 0);
  CHECK(e.values(2) == std::conj(e.values(1)));
  CHECK((e.right.col(2) - e.right.col(1).conjugate()).norm() == 0.0);
  CHECK((e.left.col(2) - e.left.col(1).conjugate()).norm() == 0.0);
  // phase rule: unit norm, largest entry real and positive
  for (int k = 0; k < 4; ++k) {
    CHECK(e.right.col(k).norm() == doctest::Approx(1.0));
    Eigen::Index idx;
    e.right.col(k).cwiseAbs().maxCoeff(&idx);
    CHECK(std::abs(e.right(idx, k).imag()) < 1e-12);
    CHECK(e.right(idx, k).real() > 0.0);
  }
}

TEST_CASE("eig rejects a defective matrix") {
  Matrix jordan(2, 2);
  jordan << -1.0, 1.0, 0.0, -1.0;
  CHECK_THROWS_AS(eig(jordan), Error);
  try {
    eig(jordan);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonDiagonalizable);
  }
}

TEST_CASE("pinv of a rank-deficient matrix satisfies the Moore-Penrose conditions") {
  Matrix a(3, 3);
  a << 1, 2, 3, 2, 4, 6, 1, 0, 1;
  Matrix p = pinv(a);
  CHECK((a * p * a - a).norm() < 1e-12);
  CHECK((p * a * p - p).norm() < 1e-12);
  CHECK(((a * p).transpose() - a * p).norm() < 1e-12);
  CHECK(((p * a).transpose() - p * a).norm() < 1e-12);
  Matrix outer = Vector::Ones(3) * Vector::Ones(3).transpose();
  CHECK((pinv(outer) - outer / 9.0).norm() < 1e-14);
}

TEST_CASE("solve reports condition and refuses near-singular systems") {
  Matrix a = random_matrix(5, 7);
  Vector x = Vector::LinSpaced(5, 1.0, 5.0);
  SolveResult r = solve(a, a * x);
  CHECK((r.x - x).norm() < 1e-10);
  CHECK(r.condition >= 1.0);
  try {
    solve(hilbert(14), Vector::Ones(14), 1e14);
    FAIL("expected Singular");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Singular);
    CHECK(e.details().contains("condition"));
  }
  CHECK(condition_number(hilbert(4)) == doctest::Approx(15513.73873892924).epsilon(1e-8));
}

TEST_CASE("complement rows are orthonormal and annihilate the span") {
  Matrix a = random_matrix(6, 11).leftCols(2);
  Matrix c = complement_rows(a);
  CHECK(c.rows() == 4);
  CHECK((c * c.transpose() - Matrix::Identity(4, 4)).norm() < 1e-12);
  CHECK((c * a).norm() < 1e-12);
}

TEST_CASE("RK4 converges at fourth order and DOPRI5 meets its tolerance") {
  auto f = [](double t, const Vector& y) -> Vector {
    Vector d(2);
    d << y(1), -y(0) + 0.0 * t;
    return d;
  };
  Vector y0(2);
  y0 << 1.0, 0.0;
  std::vector<double> grid{0.0, 2.0};
  auto err = [&](double h) {
    IntegratorConfig c;
    c.method = IntegratorMethod::RK4;
    c.step = h;
    auto s = integrate(f, y0, grid, c);
    return std::abs(s.states.back()(0) - std::cos(2.0));
  };
  double ratio = err(0.1) / err(0.05);
  CHECK(ratio == doctest::Approx(16.0).epsilon(0.1));

  IntegratorConfig c;
  c.abs_tol = c.rel_tol = 1e-10;
  auto s = integrate(f, y0, std::vector<double>{0.0, 1.0, 10.0}, c);
  CHECK(std::abs(s.states[2](0) - std::cos(10.0)) < 1e-8);
  CHECK(std::abs(s.states[1](1) + std::sin(1.0)) < 1e-9);
}

TEST_CASE("integrators detect blow-up and non-finite states") {
  auto f = [](double, const Vector& y) -> Vector { return y.array().square(); };
  Vector y0 = Vector::Ones(1);
  IntegratorConfig c;
  c.blowup_norm = 1e6;
  try {
    integrate(f, y0, std::vector<double>{0.0, 2.0}, c);
    FAIL("expected blow-up");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::BlowUp || e.code() == ErrorCode::NonFinite ||
           e.code() == ErrorCode::StepLimitExceeded));
  }
}

TEST_CASE("integrate_until stops at the event") {
  auto f = [](double, const Vector& y) -> Vector { return -y; };
  Vector y0 = Vector::Ones(1);
  auto path = integrate_until(f, y0, 0.0, 100.0, IntegratorConfig{},
                              [](double, const Vector& y) { return y(0) < 0.5; });
  CHECK(path.stopped);
  CHECK(path.times.back() == doctest::Approx(std::log(2.0)).epsilon(0.05));
  CHECK(path.states.back()(0) < 0.5);
}
