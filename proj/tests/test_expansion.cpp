#include "isoman/error.hpp"
#include "isoman/expansion.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace isoman;

TEST_CASE("planar expansion has exactly two nonzero nonlinear terms") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  ExpansionTensors e = solve_expansion(*m, s, 6);
  CHECK(e.modes == 1);
  const CVector& h2 = e.coefficient({0, 0});
  const CVector& h4 = e.coefficient({0, 0, 0, 0});
  CHECK(std::abs(h2(0)) <= 1e-10);
  CHECK(std::abs(h2(1) - Complex(-20.0 / 9.0, 0.0)) <= 1e-10);
  CHECK(std::abs(h4(0)) <= 1e-10);
  CHECK(std::abs(h4(1) - Complex(1.25, 0.0)) <= 1e-10);
  CHECK(e.coefficient({0, 0, 0}).norm() <= 1e-10);
  CHECK(e.coefficient({0, 0, 0, 0, 0}).norm() <= 1e-10);
  CHECK(e.coefficient({0, 0, 0, 0, 0, 0}).norm() <= 1e-10);
}

TEST_CASE("planar g-series and reconstruction match the quartic manifold") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  ExpansionTensors e = solve_expansion(*m, s, 4);
  for (double p : {-1.5, -0.3, 0.2, 1.1}) {
    CVector psi(1);
    psi(0) = p;
    CVector g = g_series(e, psi, 0);
    CHECK(std::abs(g(0) - 1.0) <= 1e-10);
    CHECK(std::abs(g(1) - (5.0 * p * p * p - 40.0 / 9.0 * p)) <= 1e-9);
    Reconstruction r = reconstruct_state(e, psi);
    CHECK(std::abs(r.x(0) - p) <= 1e-10);
    CHECK(std::abs(r.x(1) - (1.25 * std::pow(p, 4) - 20.0 / 9.0 * p * p)) <= 1e-9);
    CHECK(r.imag_residue <= 1e-12);
  }
}

TEST_CASE("linear systems have vanishing nonlinear coefficients") {
  Matrix a(3, 3);
  a << -0.1, 1.0, 0.0, -1.0, -0.1, 0.3, 0.0, 0.0, -2.0;
  auto m = make_linear(a);
  Spectrum s = analyze(*m, Vector::Zero(3));
  ExpansionTensors e = solve_expansion(*m, s, 4);
  int checked = 0;
  for (const auto& [exps, c] : e.coeffs) {
    int total = 0;
    for (int x : exps) total += x;
    if (total >= 2) {
      CHECK(c.norm() <= 1e-12);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("complex pair expansion is conjugate symmetric and real on the slice") {
  auto m = builtin("goodwin");
  Spectrum s = analyze(*m);
  ExpansionTensors e = solve_expansion(*m, s, 3);
  CHECK(e.modes == 2);
  const CVector& a = e.coefficient({0, 0});
  const CVector& b = e.coefficient({1, 1});
  CHECK((a - b.conjugate()).norm() <= 1e-10 * (1.0 + a.norm()));
  CVector psi(2);
  psi(0) = Complex(0.03, 0.02);
  psi(1) = std::conj(psi(0));
  Reconstruction r = reconstruct_state(e, psi);
  CHECK(r.imag_residue <= 1e-12);
  // invariance residual of the truncated series shrinks with the order
  std::vector<double> residual;
  for (int order : {1, 3, 5}) {
    ExpansionTensors ek = solve_expansion(*m, s, order);
    Vector x = reconstruct_state(ek, psi).x;
    CVector lhs = s.lambda(0) * psi(0) * g_series(ek, psi, 0) + s.lambda(1) * psi(1) * g_series(ek, psi, 1);
    Vector f = m->rhs(x);
    residual.push_back((lhs.real() - f).norm() / f.norm());
  }
  CHECK(residual[1] < 0.1 * residual[0]);
  CHECK(residual[2] < 0.1 * residual[1]);
}

TEST_CASE("expansion JSON round trip") {
  auto m = builtin("pendulum");
  Spectrum s = analyze(*m);
  ExpansionTensors e = solve_expansion(*m, s, 3);
  ExpansionTensors back = expansion_from_json(nlohmann::json::parse(to_json(e).dump()));
  CHECK(back.order == e.order);
  CHECK(back.modes == e.modes);
  CHECK(back.coeffs.size() == e.coeffs.size());
  for (const auto& [k, v] : e.coeffs) CHECK((back.coeffs.at(k) - v).norm() == 0.0);
  CHECK_THROWS_AS(expansion_from_json(nlohmann::json{{"order", 2}}), Error);
}

TEST_CASE("order and resonance errors") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  try {
    solve_expansion(*m, s, 9);
    FAIL("expected OrderTooHigh");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OrderTooHigh);
  }
  ExpansionTensors e2 = solve_expansion(*m, s, 2);
  CVector psi(1);
  psi(0) = 0.1;
  CHECK_THROWS_AS(g_series(e2, psi, 0, 3), Error);

  // lambda_2 = 2 lambda_1 with forcing along the second mode is resonant
  Matrix a(2, 2);
  a << -1.0, 0.0, 0.0, -2.0;
  Spectrum rs = analyze(*make_linear(a), Vector::Zero(2));
  Matrix f2 = Matrix::Zero(2, 4);
  f2(1, 0) = 2.0;
  ExpansionOptions opt;
  opt.modes = 2;
  try {
    solve_expansion(rs, {f2}, 2, opt);
    FAIL("expected Resonance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Resonance);
  }
}

TEST_CASE("multi-index and exponent conversions") {
  CHECK(to_exponents({0, 0, 1}, 2) == std::vector<int>{2, 1});
  CHECK(to_multi_index({1, 2}) == MultiIndex{0, 1, 1});
  CHECK_THROWS_AS(to_exponents({3}, 2), Error);
}
