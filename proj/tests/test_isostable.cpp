#include "isoman/error.hpp"
#include "isoman/isostable.hpp"

#include <doctest.h>

#include <cmath>

using namespace isoman;

namespace {

double planar_fast_isostable(const Vector& x) {
  return x(1) - 1.25 * std::pow(x(0), 4) + (20.0 / 9.0) * x(0) * x(0);
}

// x' = -x + x^3, y' = -3 y: the origin attracts only |x| < 1
class CubicWell final : public Model {
 public:
  std::string name() const override { return "cubic_well"; }
  int dimension() const override { return 2; }
  Vector rhs(const Vector& x) const override {
    return (Vector(2) << -x(0) + x(0) * x(0) * x(0), -3.0 * x(1)).finished();
  }
  Matrix jacobian(const Vector& x) const override {
    return (Matrix(2, 2) << -1.0 + 3.0 * x(0) * x(0), 0.0, 0.0, -3.0).finished();
  }
};

}  // namespace

TEST_CASE("planar slow isostable equals the first coordinate") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  Vector x(2);
  x << 0.4, 0.3;
  CVector psi = evaluate_psi(*m, s, x);
  REQUIRE(psi.size() == 1);
  CHECK(std::abs(psi(0) - 0.4) < 1e-6);
}

TEST_CASE("planar gradients propagate exactly along backward trajectories") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  Vector x(2);
  x << 0.05, 0.02;
  Trajectory back = simulate_backward(*m, x, uniform_grid(0.0, 3.0, 0.1));
  auto I1 = propagate_I_backward(*m, back, s.lambda(0), s.w.col(0));
  for (const auto& v : I1) {
    CHECK(std::abs(v(0) - 1.0) < 1e-12);
    CHECK(std::abs(v(1)) < 1e-12);
  }
  // fast gradient (-5 x1^3 + 40/9 x1, 1) started from its exact value
  CVector init(2);
  init << -5.0 * std::pow(x(0), 3) + (40.0 / 9.0) * x(0), 1.0;
  auto I2 = propagate_I_backward(*m, back, s.lambda(1), init);
  const Vector& end = back.states.back();
  CHECK(std::abs(I2.back()(0).real() - (-5.0 * std::pow(end(0), 3) + (40.0 / 9.0) * end(0))) < 1e-7);
  CHECK(std::abs(I2.back()(1).real() - 1.0) < 1e-9);
  // the fast isostable itself decays like exp(-t) forward in time
  CHECK(planar_fast_isostable(end) == doctest::Approx(planar_fast_isostable(x) * std::exp(3.0)).epsilon(1e-6));
}

TEST_CASE("pairing between gradients and duals is conserved") {
  auto m = builtin("pendulum");
  Spectrum s = analyze(*m);
  Vector x = s.x0 + 0.2 * s.v.col(0).real() + 0.05 * s.v.col(2).real();
  Trajectory fwd = simulate(*m, x, uniform_grid(0.0, 50.0, 0.1));
  Trajectory bwd = reversed(fwd);
  const std::size_t n = fwd.size();
  double worst = 0.0;
  for (int k = 0; k < s.beta; ++k) {
    std::vector<CVector> I = propagate_I_backward(*m, bwd, s.lambda(k), s.w.col(k));
    for (int j = 0; j < s.beta; ++j) {
      std::vector<CVector> g = propagate_g_forward(*m, fwd, s.lambda(j), s.v.col(j));
      // I_k^T g_j evolves like exp((lambda_k - lambda_j) t)
      auto scaled = [&](std::size_t i) {
        return (I[n - 1 - i].transpose() * g[i])(0) * std::exp(-(s.lambda(k) - s.lambda(j)) * fwd.times[i]);
      };
      const Complex end = scaled(n - 1);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(scaled(i) - end));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("shifted state transition matrix propagates duals") {
  auto m = builtin("goodwin");
  Spectrum s = analyze(*m);
  Vector x = s.x0 + 0.05 * s.v.col(0).real();
  Trajectory fwd = simulate(*m, x, uniform_grid(0.0, 20.0, 0.05));
  STM stm = state_transition(*m, fwd);
  CVector g0 = s.v.col(0);
  auto g = propagate_g_forward(*m, fwd, s.lambda(0), g0);
  CVector via_stm = stm.shifted(s.lambda(0)) * g0;
  CHECK((g.back() - via_stm).norm() <= 1e-9 * (1.0 + via_stm.norm()));

  // composition over two halves
  Trajectory a, b;
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    if (fwd.times[i] <= 10.0 + 1e-12) {
      a.times.push_back(fwd.times[i]);
      a.states.push_back(fwd.states[i]);
      a.rates.push_back(fwd.rates[i]);
    }
    if (fwd.times[i] >= 10.0 - 1e-12) {
      b.times.push_back(fwd.times[i]);
      b.states.push_back(fwd.states[i]);
      b.rates.push_back(fwd.rates[i]);
    }
  }
  STM whole = state_transition(*m, b).compose(state_transition(*m, a));
  CHECK((whole.phi - stm.phi).norm() <= 1e-9 * stm.phi.norm());
}

TEST_CASE("flow with variational matrix matches the sampled transition matrix") {
  auto m = builtin("pendulum");
  Spectrum s = analyze(*m);
  Vector x = s.x0 + 0.1 * s.v.col(0).real();
  FlowWithSTM f = flow_with_stm(*m, x, 5.0, IntegratorConfig{});
  CHECK(!f.stopped);
  CHECK(f.t_end == doctest::Approx(5.0));
  Trajectory fwd = simulate(*m, x, uniform_grid(0.0, 5.0, 0.01));
  STM stm = state_transition(*m, fwd);
  CHECK((f.phi - stm.phi).norm() <= 1e-6 * stm.phi.norm());
  FlowWithSTM g = flow_with_stm(*m, x, 500.0, IntegratorConfig{},
                                [&](const Vector& y) { return (y - s.x0).norm() < 1e-3; });
  CHECK(g.stopped);
  CHECK((g.traj.states.back() - s.x0).norm() < 1e-3);
}

TEST_CASE("psi evaluation reports escape and horizon problems") {
  CubicWell well;
  Spectrum ws = analyze(well);
  Vector outside(2);
  outside << 1.5, 0.0;
  try {
    evaluate_psi(well, ws, outside);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::BasinEscape || e.code() == ErrorCode::HorizonExceeded));
  }
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  PsiOptions short_horizon;
  short_horizon.max_horizon = 1.0;
  Vector x(2);
  x << 0.5, 0.0;
  try {
    evaluate_psi(*m, s, x, short_horizon);
    FAIL("expected HorizonExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HorizonExceeded);
  }
}

TEST_CASE("trajectory interpolation and grid validation") {
  Trajectory t;
  t.times = {0.0, 1.0};
  t.states = {Vector::Zero(1), Vector::Ones(1)};
  t.rates = {Vector::Ones(1), Vector::Ones(1)};
  CHECK(t.state_at(0.5)(0) == doctest::Approx(0.5));
  CHECK(t.state_at(2.0)(0) == doctest::Approx(1.0));
  t.times = {0.0, 0.0};
  CHECK_THROWS_AS(t.validate(), Error);
  auto g = uniform_grid(0.0, 1.0, 0.3);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(1.0));
}
