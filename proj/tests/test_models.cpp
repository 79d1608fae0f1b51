#include "isoman/derivatives.hpp"
#include "isoman/error.hpp"
#include "isoman/models.hpp"
#include "isoman/polynomial.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace isoman;

namespace {

std::vector<Vector> box_points(const Model& m, int count, unsigned seed) {
  auto [lo, hi] = m.test_box();
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vector> out;
  for (int k = 0; k < count; ++k) {
    Vector x(m.dimension());
    for (int i = 0; i < m.dimension(); ++i) x(i) = lo(i) + (hi(i) - lo(i)) * u(gen);
    out.push_back(x);
  }
  return out;
}

// Wraps a model and hides its analytic tensors.
class JacobianOnly : public Model {
 public:
  explicit JacobianOnly(ModelPtr m) : m_(std::move(m)) {}
  std::string name() const override { return m_->name() + "-jac"; }
  int dimension() const override { return m_->dimension(); }
  Vector rhs(const Vector& x) const override { return m_->rhs(x); }
  Matrix jacobian(const Vector& x) const override { return m_->jacobian(x); }
  std::pair<Vector, Vector> test_box() const override { return m_->test_box(); }

 private:
  ModelPtr m_;
};

}  // namespace

TEST_CASE("planar right-hand side matches its closed form") {
  auto m = builtin("planar");
  Vector x(2);
  x << 0.7, -0.3;
  Vector f = m->rhs(x);
  CHECK(f(0) == doctest::Approx(-0.05 * 0.7));
  CHECK(f(1) == doctest::Approx(0.3 + std::pow(0.7, 4) - 2.0 * 0.49));
}

TEST_CASE("analytic Jacobians agree with central differences for every builtin") {
  for (std::string name : {"planar", "goodwin", "pendulum", "coupled"}) {
    auto m = builtin(name);
    for (const Vector& x : box_points(*m, 5, 42)) {
      Matrix j = m->jacobian(x);
      Matrix fd = fd_jacobian(*m, x);
      CHECK_MESSAGE((j - fd).norm() <= 1e-6 * (1.0 + j.norm()), name);
    }
  }
}

TEST_CASE("analytic tensors agree with nested differences up to order four") {
  for (std::string name : {"planar", "goodwin", "pendulum", "coupled"}) {
    auto m = builtin(name);
    const Vector x = box_points(*m, 1, 7).front();
    for (int k = 2; k <= 4; ++k) {
      Matrix t = m->derivative_tensor(x, k);
      Matrix fd = fd_tensor(*m, x, k);
      double scale = 1.0 + t.cwiseAbs().maxCoeff();
      double tol = k == 2 ? 1e-6 : (k == 3 ? 1e-4 : 1e-2);
      CHECK_MESSAGE((t - fd).cwiseAbs().maxCoeff() <= tol * scale, name << " order " << k);
    }
  }
}

TEST_CASE("derivative tensors are symmetric in their lower indices") {
  auto m = builtin("goodwin");
  Vector x = m->default_guess();
  Matrix t3 = m->derivative_tensor(x, 3);
  const int n = 3;
  for (int r = 0; r < n; ++r)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double v = t3(r, kron_index({a, b, c}, n));
          CHECK(v == doctest::Approx(t3(r, kron_index({c, a, b}, n))));
          CHECK(v == doctest::Approx(t3(r, kron_index({b, c, a}, n))));
        }
}

TEST_CASE("finite-difference fallback supplies tensors when analytic ones are hidden") {
  auto base = builtin("pendulum");
  JacobianOnly hidden(base);
  Vector x = base->default_guess();
  auto fallback = derivative_tensors(hidden, x, 3);
  auto exact = derivative_tensors(*base, x, 3);
  REQUIRE(fallback.size() == 2);
  CHECK((fallback[0] - exact[0]).cwiseAbs().maxCoeff() < 1e-5 * (1.0 + exact[0].cwiseAbs().maxCoeff()));
  CHECK((fallback[1] - exact[1]).cwiseAbs().maxCoeff() < 1e-3 * (1.0 + exact[1].cwiseAbs().maxCoeff()));

  DerivativeOptions strict;
  strict.allow_fallback = false;
  try {
    derivative_tensors(hidden, x, 2, strict);
    FAIL("expected OrderUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OrderUnavailable);
  }
}

TEST_CASE("polynomial fields differentiate exactly") {
  PolynomialField f(2);
  f.add(0, 3.0, {{0, 2}, {1, 1}});  // 3 x0^2 x1
  f.add(1, -1.0, {{1, 3}});
  Vector x(2);
  x << 2.0, 5.0;
  CHECK(f.eval(x)(0) == doctest::Approx(60.0));
  Matrix j = f.jacobian(x);
  CHECK(j(0, 0) == doctest::Approx(60.0));
  CHECK(j(0, 1) == doctest::Approx(12.0));
  CHECK(j(1, 1) == doctest::Approx(-75.0));
  Matrix t3 = f.tensor(x, 3);
  CHECK(t3(0, kron_index({0, 0, 1}, 2)) == doctest::Approx(6.0));
  CHECK(t3(0, kron_index({1, 0, 0}, 2)) == doctest::Approx(6.0));
  CHECK(t3(1, kron_index({1, 1, 1}, 2)) == doctest::Approx(-6.0));
  CHECK(f.tensor(x, 4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.degree() == 3);
}

TEST_CASE("unknown models and parameters are rejected") {
  try {
    builtin("lorenz");
    FAIL("expected UnknownModel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownModel);
  }
  try {
    builtin("goodwin", {{"h7", 1.0}});
    FAIL("expected UnknownParameter");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownParameter);
  }
  auto m = builtin("planar", {{"rate", 0.1}});
  CHECK(m->parameters().at("rate") == 0.1);
}

TEST_CASE("coupled model interleaves oscillators and exposes the shared channel") {
  auto m = builtin("coupled", {{"N", 4.0}});
  CHECK(m->dimension() == 8);
  Vector b = m->default_channel();
  CHECK(b.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(b(i) == (i % 2 == 0 ? 1.0 : 0.0));
}

TEST_CASE("input signals") {
  InputSignal s = InputSignal::sine(0.5, 4.0);
  CHECK(s(1.0) == doctest::Approx(0.5));
  CHECK(s.omega(3.0) == doctest::Approx(std::numbers::pi / 2.0));
  InputSignal c = InputSignal::chirp(0.0045, 27.0, 0.15);
  CHECK(c.omega(0.0) == doctest::Approx(2.0 * std::numbers::pi / 27.0));
  CHECK(c(10.0) == doctest::Approx(0.0045 * std::sin(2.0 * std::numbers::pi / 25.5 * 10.0)));
  CHECK_NOTHROW(c.validate(0.0, 170.0));
  CHECK_THROWS_AS(c.validate(0.0, 180.0), Error);
  CHECK(InputSignal::zero()(3.0) == 0.0);
}

TEST_CASE("zero forcing leaves the vector field bit-identical") {
  auto m = builtin("goodwin");
  ForcedModel fm(m, m->default_channel(), InputSignal::zero());
  Vector x = m->default_guess();
  Vector a = fm.rhs(1.234, x), b = m->rhs(x);
  CHECK(a == b);
  ForcedModel constant(m, m->default_channel(), InputSignal::constant(0.1));
  CHECK(constant.rhs(0.0, x)(0) == doctest::Approx(b(0) + 0.1));
}
