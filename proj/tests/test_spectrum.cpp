#include "isoman/error.hpp"
#include "isoman/spectrum.hpp"

#include <doctest.h>

#include <cmath>

using namespace isoman;

TEST_CASE("planar fixed point and eigen-data") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  CHECK(s.x0.norm() < 1e-12);
  CHECK(s.lambda(0).real() == doctest::Approx(-0.05));
  CHECK(s.lambda(1).real() == doctest::Approx(-1.0));
  CHECK(s.beta == 1);
  CHECK(s.gap_ratio == doctest::Approx(20.0));
  CHECK(std::abs(s.v(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(s.v(1, 0)) < 1e-14);
  CHECK((s.w.transpose() * s.v - CMatrix::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("goodwin spectrum reproduces the reference values") {
  auto m = builtin("goodwin");
  Spectrum s = analyze(*m);
  CHECK(std::abs(s.x0(0) - 0.12) < 0.005);
  CHECK(std::abs(s.x0(1) - 0.32) < 0.005);
  CHECK(std::abs(s.x0(2) - 1.84) < 0.005);
  CHECK(std::abs(s.lambda(0) - Complex(-0.022, -0.26)) < 0.01);
  CHECK(std::abs(s.lambda(1) - Complex(-0.022, 0.26)) < 0.01);
  CHECK(std::abs(s.lambda(2) - Complex(-0.53, 0.0)) < 0.01);
  CHECK(s.beta == 2);
  CHECK(m->rhs(s.x0).norm() < 1e-12);
}

TEST_CASE("pendulum and coupled spectra") {
  Spectrum p = analyze(*builtin("pendulum"));
  CHECK(std::abs(p.lambda(0) - Complex(-0.05, -1.11)) < 0.02);
  CHECK(std::abs(p.lambda(2) - Complex(-8.0, 0.0)) < 0.02);
  Spectrum c = analyze(*builtin("coupled"));
  CHECK(c.dimension() == 20);
  CHECK(std::abs(c.lambda(0) - Complex(-0.012, -0.369)) < 0.005);
  CHECK(std::abs(c.lambda(2) - Complex(-0.216, -0.383)) < 0.005);
  CHECK(c.beta == 2);
}

TEST_CASE("beta selection never splits a conjugate pair") {
  Spectrum s = analyze(*builtin("goodwin"));
  try {
    select_beta(s, 1);
    FAIL("expected PairSplit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PairSplit);
  }
  try {
    select_beta(s, 3);
    FAIL("expected OutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
  CHECK(select_beta(s, 2) == 2);
}

TEST_CASE("a small spectral gap produces a warning") {
  Matrix a(3, 3);
  a << -1.0, 0.0, 0.0, 0.0, -1.5, 0.0, 0.0, 0.0, -2.0;
  auto m = make_linear(a);
  Spectrum s = analyze(*m, Vector::Zero(3));
  CHECK(!s.warnings.empty());
}

TEST_CASE("an unstable equilibrium is reported") {
  Matrix a(2, 2);
  a << 0.1, 0.0, 0.0, -1.0;
  auto m = make_linear(a);
  try {
    analyze(*m, Vector::Zero(2));
    FAIL("expected UnstableFixedPoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnstableFixedPoint);
  }
}

TEST_CASE("Newton failure is reported as NoConvergence") {
  auto m = builtin("planar");
  Vector far(2);
  far << 1e6, 1e6;
  try {
    find_fixed_point(*m, far, std::nullopt, 2);
    FAIL("expected NoConvergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoConvergence);
  }
}
