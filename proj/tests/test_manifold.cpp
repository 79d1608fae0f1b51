#include "isoman/error.hpp"
#include "isoman/manifold.hpp"
#include "isoman/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace isoman;

namespace {

double quartic(double x1) { return 1.25 * std::pow(x1, 4) - 20.0 / 9.0 * x1 * x1; }

double max_quartic_deviation(const ManifoldTrajectory& tr, double range) {
  double worst = 0.0;
  for (const auto& smp : tr.samples)
    if (std::abs(smp.x(0)) <= range) worst = std::max(worst, std::abs(smp.x(1) - quartic(smp.x(0))));
  return worst;
}

CVector scalar_psi(double p) {
  CVector v(1);
  v(0) = p;
  return v;
}

}  // namespace

TEST_CASE("method names round trip") {
  for (auto m : {TraceMethod::Asym, TraceMethod::PC, TraceMethod::Naive}) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("spline"), Error);
}

TEST_CASE("backward velocity on the planar manifold is the reversed vector field") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  const double x1 = 0.7;
  Vector x(2);
  x << x1, quartic(x1);
  CVector I1(2), g1(2);
  I1 << 1.0, 0.0;
  g1 << 1.0, 5.0 * x1 * x1 * x1 - 40.0 / 9.0 * x1;
  Matrix comp = complement_rows(realify({g1}, {0}));
  BackwardRhs r = backward_rhs({I1}, comp, scalar_psi(x1), s.lambda.head(1), {0});
  CHECK((r.dx + m->rhs(x)).norm() <= 1e-12);
  CHECK(r.cond >= 1.0);
  // a complement row parallel to the gradient is singular
  Matrix bad(1, 2);
  bad << 1.0, 0.0;
  try {
    backward_rhs({I1}, bad, scalar_psi(x1), s.lambda.head(1), {0});
    FAIL("expected IllConditioned");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IllConditioned);
  }
}

TEST_CASE("realify splits conjugate pairs") {
  CVector a(2);
  a << Complex(1.0, 2.0), Complex(3.0, -1.0);
  Matrix r = realify({a, CVector(a.conjugate())}, {1, 0});
  CHECK(r.cols() == 2);
  CHECK(r(0, 0) == 1.0);
  CHECK(r(0, 1) == 2.0);
  CHECK(r(1, 1) == -1.0);
}

TEST_CASE("seeds are real and follow the slow eigenvectors") {
  Spectrum s = analyze(*builtin("goodwin"));
  CVector psi(2);
  psi(0) = std::polar(0.01, 0.7);
  psi(1) = std::conj(psi(0));
  Vector x = linear_seed(s, psi);
  Vector expect = s.x0 + 2.0 * (psi(0) * s.v.col(0)).real();
  CHECK((x - expect).norm() <= 1e-15);
  CVector half(1);
  half(0) = psi(0);
  CHECK((complete_psi(s, half) - psi).norm() == 0.0);
}

TEST_CASE("asymptotic tracing is exact on the planar quartic") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  ExpansionTensors e4 = solve_expansion(*m, s, 4);
  ExpansionTensors e1 = solve_expansion(*m, s, 1);
  TraceConfig cfg;
  cfg.T = 110.0;
  cfg.psi_cap = 1.6;
  for (double sign : {1.0, -1.0}) {
    ManifoldTrajectory a4 = trace_asym(*m, s, e4, scalar_psi(sign * 0.01), cfg);
    CHECK(a4.ok());
    CHECK(std::abs(a4.samples.back().x(0)) >= 1.5);
    CHECK(max_quartic_deviation(a4, 1.5) <= 1e-9);
    for (const auto& smp : a4.samples) CHECK(std::abs(smp.psi(0).real() - smp.x(0)) <= 1e-9);
    ManifoldTrajectory a1 = trace_asym(*m, s, e1, scalar_psi(sign * 0.01), cfg);
    CHECK(max_quartic_deviation(a1, 1.5) >= 1e-2);
  }
}

TEST_CASE("asymptotic tracing records the requested cadence") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  ExpansionTensors e = solve_expansion(*m, s, 4);
  TraceConfig cfg;
  cfg.T = 10.0;
  cfg.record_interval = 0.5;
  ManifoldTrajectory tr = trace_asym(*m, s, e, scalar_psi(0.01), cfg);
  CHECK(tr.samples.size() == 21);
  CHECK(tr.samples[3].t_back == doctest::Approx(1.5));
  CHECK(tr.duration() == doctest::Approx(10.0));
  nlohmann::json j = trace_summary(tr);
  CHECK(j.at("status") == "completed");
}

TEST_CASE("a single correction removes a fast displacement") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  const double x1 = 0.005;
  Vector x(2);
  x << x1, quartic(x1) + 1e-3;
  FlowWithSTM f = flow_with_stm(*m, x, 100.0, IntegratorConfig{},
                                [&](const Vector& y) { return (y - s.x0).norm() <= linear_radius(s); });
  Correction c = correct(*m, s, f.phi, f.t_end, x, scalar_psi(x1));
  Vector y = x + c.dx;
  CHECK(std::abs(y(1) - quartic(y(0))) <= 1e-5);
  CHECK(std::abs(c.dx(0)) <= 1e-8);
  CHECK(c.slow_leak <= 1e-6);
  CHECK(c.principal_angle <= 1e-3);
}

TEST_CASE("predictor-corrector traces the planar manifold near the equilibrium") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  TraceConfig cfg;
  cfg.T = 20.0;
  cfg.dt = 0.5;
  ManifoldTrajectory tr = trace_pc(*m, s, scalar_psi(0.01), cfg);
  CHECK(tr.ok());
  CHECK(tr.corrections == 40);
  CHECK(tr.samples.back().t_back == doctest::Approx(20.0));
  // the slow coordinate is preserved by construction
  for (const auto& smp : tr.samples) CHECK(std::abs(smp.psi(0).real() - 0.01 * std::exp(0.05 * smp.t_back)) <= 1e-12);
  CHECK(max_quartic_deviation(tr, 1.0) <= 1e-3);
}

TEST_CASE("naive backward integration leaves the planar manifold") {
  auto m = builtin("planar");
  Spectrum s = analyze(*m);
  TraceConfig cfg;
  cfg.T = 40.0;
  ManifoldTrajectory tr = trace_naive(*m, s, scalar_psi(0.01), cfg);
  double worst = 0.0;
  for (const auto& smp : tr.samples) worst = std::max(worst, std::abs(smp.x(1) - quartic(smp.x(0))));
  CHECK((!tr.ok() || worst > 1e-2));
}

TEST_CASE("manifold families, level sets and ray distances") {
  auto m = builtin("goodwin");
  Spectrum s = analyze(*m);
  ExpansionTensors e = solve_expansion(*m, s, 3);
  ManifoldConfig cfg;
  cfg.rays = 8;
  cfg.threads = 1;
  cfg.trace.T = 60.0;
  cfg.trace.record_interval = 0.25;
  SlowManifold fam = build_manifold(*m, s, TraceMethod::Asym, cfg, &e);
  CHECK(fam.rays.size() == 8);
  CHECK(fam.failed.empty());
  CHECK(fam.seed_phase[2] == doctest::Approx(std::numbers::pi / 2.0));
  const double radius = 0.01 * std::exp(-s.lambda(0).real() * 20.0);
  auto pts = fam.level_set(s, radius);
  CHECK(pts.size() == 8);
  CHECK(fam.level_set(s, 1e6).empty());
  // a ray's own samples are at distance zero and offsets are measured
  const auto& ray = fam.rays[0];
  CHECK(distance_to_ray(ray, ray.samples[5].x) == 0.0);
  Vector off = ray.samples[5].x;
  Vector d = ray.samples[6].x - ray.samples[4].x;
  Vector normal = Vector::Zero(3);
  normal(0) = d(1);
  normal(1) = -d(0);
  normal.normalize();
  CHECK(distance_to_ray(ray, off + 1e-6 * normal) == doctest::Approx(1e-6).epsilon(1e-2));
  TubeReport rep = invariance_tube(*m, s, ray);
  CHECK(rep.compared_points > 0);
  CHECK(rep.max_relative < 1e-2);
  CHECK(tube_exit_time(s, ray, ray, 1e-3) == std::numeric_limits<double>::infinity());
}

TEST_CASE("family validation") {
  auto m = builtin("goodwin");
  Spectrum s = analyze(*m);
  ManifoldConfig cfg;
  CHECK_THROWS_AS(build_manifold(*m, s, TraceMethod::Asym, cfg, nullptr), Error);
  auto coupled = builtin("coupled");
  Spectrum s4 = analyze(*coupled);
  select_beta(s4, 4);
  try {
    build_manifold(*coupled, s4, TraceMethod::PC, cfg);
    FAIL("expected OutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
}
