#include "isoman/isostable.hpp"

#include "isoman/error.hpp"

#include <algorithm>
#include <cmath>

namespace isoman {

void Trajectory::validate() const {
  if (times.size() < 1 || states.size() != times.size() || rates.size() != times.size()) {
    throw Error(ErrorCode::GridMismatch, "trajectory samples and grid differ in length",
                {{"times", times.size()}, {"states", states.size()}, {"rates", rates.size()}});
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw Error(ErrorCode::GridMismatch, "trajectory grid must be increasing");
  }
}

Vector Trajectory::state_at(double t) const {
  if (times.empty()) throw Error(ErrorCode::GridMismatch, "empty trajectory");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
  return hermite(times[i], states[i], rates[i], times[i + 1], states[i + 1], rates[i + 1], t);
}

std::vector<double> uniform_grid(double t0, double t1, double dt) {
  if (!(dt > 0.0) || !(t1 >= t0)) throw Error(ErrorCode::InvalidArgument, "bad uniform grid");
  long n = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-9));
  std::vector<double> g;
  g.reserve(n + 1);
  for (long i = 0; i <= n; ++i) g.push_back(std::min(t1, t0 + dt * static_cast<double>(i)));
  if (g.size() > 1 && g[g.size() - 1] <= g[g.size() - 2]) g.pop_back();
  return g;
}

namespace {

Trajectory simulate_signed(const Model& model, const Vector& x0, const std::vector<double>& grid,
                           const IntegratorConfig& cfg, double sign) {
  if (x0.size() != model.dimension()) throw Error(ErrorCode::InvalidArgument, "initial state dimension mismatch");
  auto f = [&](double, const Vector& x) -> Vector { return sign * model.rhs(x); };
  Sampled<Vector> s = integrate(f, x0, grid, cfg);
  Trajectory tr;
  tr.times = std::move(s.times);
  tr.states = std::move(s.states);
  tr.rates.reserve(tr.states.size());
  for (const auto& x : tr.states) tr.rates.push_back(sign * model.rhs(x));
  return tr;
}

template <class Gen>
std::vector<CVector> propagate(const Trajectory& traj, const CVector& init, const AdjointOptions& opt, Gen&& gen) {
  traj.validate();
  if (init.size() != static_cast<Eigen::Index>(traj.states.front().size())) {
    throw Error(ErrorCode::GridMismatch, "initial covector length differs from the state dimension");
  }
  std::vector<CVector> out;
  out.reserve(traj.size());
  out.push_back(init);
  CVector y = init;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double t0 = traj.times[i], t1 = traj.times[i + 1];
    long n = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / opt.max_substep - 1e-9)));
    double h = (t1 - t0) / static_cast<double>(n);
    auto state = [&](double t) {
      return hermite(t0, traj.states[i], traj.rates[i], t1, traj.states[i + 1], traj.rates[i + 1], t);
    };
    for (long s = 0; s < n; ++s) {
      double ta = t0 + h * static_cast<double>(s);
      CMatrix a0 = gen(state(ta));
      CMatrix am = gen(state(ta + 0.5 * h));
      CMatrix a1 = gen(state(ta + h));
      CVector k1 = a0 * y;
      CVector k2 = am * (y + 0.5 * h * k1);
      CVector k3 = am * (y + 0.5 * h * k2);
      CVector k4 = a1 * (y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!y.allFinite()) throw Error(ErrorCode::NonFinite, "adjoint propagation produced non-finite values", {{"t", t1}});
    out.push_back(y);
  }
  return out;
}

}  // namespace

Trajectory simulate(const Model& model, const Vector& x0, const std::vector<double>& grid,
                    const IntegratorConfig& cfg) {
  return simulate_signed(model, x0, grid, cfg, 1.0);
}

Trajectory simulate_backward(const Model& model, const Vector& x0, const std::vector<double>& grid,
                             const IntegratorConfig& cfg) {
  return simulate_signed(model, x0, grid, cfg, -1.0);
}

std::vector<CVector> propagate_I_backward(const Model& model, const Trajectory& traj, Complex lambda,
                                          const CVector& init, const AdjointOptions& opt) {
  return propagate(traj, init, opt, [&](const Vector& x) -> CMatrix {
    CMatrix a = model.jacobian(x).transpose().cast<Complex>();
    a.diagonal().array() -= lambda;
    return a;
  });
}

std::vector<CVector> propagate_I_forward(const Model& model, const Trajectory& traj, Complex lambda,
                                         const CVector& init, const AdjointOptions& opt) {
  return propagate(traj, init, opt, [&](const Vector& x) -> CMatrix {
    CMatrix a = -model.jacobian(x).transpose().cast<Complex>();
    a.diagonal().array() += lambda;
    return a;
  });
}

std::vector<CVector> propagate_g_forward(const Model& model, const Trajectory& traj, Complex lambda,
                                         const CVector& init, const AdjointOptions& opt) {
  return propagate(traj, init, opt, [&](const Vector& x) -> CMatrix {
    CMatrix a = model.jacobian(x).cast<Complex>();
    a.diagonal().array() -= lambda;
    return a;
  });
}

Trajectory reversed(const Trajectory& traj) {
  Trajectory r;
  const std::size_t n = traj.size();
  if (n == 0) return r;
  const double end = traj.times.back();
  for (std::size_t i = n; i-- > 0;) {
    r.times.push_back(end - traj.times[i]);
    r.states.push_back(traj.states[i]);
    r.rates.push_back(-traj.rates[i]);
  }
  return r;
}

double linear_radius(const Spectrum& s) { return 1e-6 * (1.0 + s.x0.norm()); }

CVector evaluate_psi(const Model& model, const Spectrum& s, const Vector& x, const PsiOptions& opt) {
  if (s.beta < 1) throw Error(ErrorCode::InvalidArgument, "spectrum has no slow modes selected");
  if (x.size() != s.x0.size()) throw Error(ErrorCode::InvalidArgument, "state dimension mismatch");
  const double horizon = opt.max_horizon > 0.0 ? opt.max_horizon : 60.0 / std::abs(s.lambda(0).real());
  const double r = opt.entry_radius;
  auto f = [&](double, const Vector& y) -> Vector { return model.rhs(y); };
  auto inside = [&](double, const Vector& y) { return (y - s.x0).norm() <= r; };
  Path<Vector> path;
  try {
    path = integrate_until(f, x, 0.0, horizon, opt.integrator, inside);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BlowUp || e.code() == ErrorCode::NonFinite) {
      throw Error(ErrorCode::BasinEscape, "forward flow left the basin of attraction", e.details());
    }
    throw;
  }
  if (!path.stopped) {
    throw Error(ErrorCode::HorizonExceeded, "forward flow did not reach the linear regime",
                {{"horizon", horizon}, {"entry_radius", r}, {"distance", (path.states.back() - s.x0).norm()}});
  }
  const double t = path.times.back();
  const Vector dx = path.states.back() - s.x0;
  CVector psi(s.beta);
  for (int k = 0; k < s.beta; ++k) {
    psi(k) = s.w.col(k).transpose() * dx.cast<Complex>();
    psi(k) *= std::exp(-s.lambda(k) * t);
  }
  for (int k = 0; k < s.beta; ++k) {
    int p = s.partner[k];
    if (p > k && p < s.beta) psi(p) = std::conj(psi(k));
    if (p == k) psi(k) = Complex(psi(k).real(), 0.0);
  }
  return psi;
}

CMatrix STM::shifted(Complex lambda) const { return phi.cast<Complex>() * std::exp(-lambda * (t2 - t1)); }

STM STM::compose(const STM& earlier) const {
  if (std::abs(earlier.t2 - t1) > 1e-9 * std::max(1.0, std::abs(t1))) {
    throw Error(ErrorCode::GridMismatch, "state transition intervals do not chain",
                {{"earlier_t2", earlier.t2}, {"t1", t1}});
  }
  return STM{earlier.t1, t2, phi * earlier.phi};
}

std::vector<Matrix> state_transition_path(const Model& model, const Trajectory& traj, const AdjointOptions& opt) {
  traj.validate();
  const int n = model.dimension();
  std::vector<Matrix> out;
  out.reserve(traj.size());
  Matrix y = Matrix::Identity(n, n);
  out.push_back(y);
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double t0 = traj.times[i], t1 = traj.times[i + 1];
    long m = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / opt.max_substep - 1e-9)));
    double h = (t1 - t0) / static_cast<double>(m);
    auto jac = [&](double t) {
      return model.jacobian(
          hermite(t0, traj.states[i], traj.rates[i], t1, traj.states[i + 1], traj.rates[i + 1], t));
    };
    for (long s = 0; s < m; ++s) {
      double ta = t0 + h * static_cast<double>(s);
      Matrix a0 = jac(ta), am = jac(ta + 0.5 * h), a1 = jac(ta + h);
      Matrix k1 = a0 * y;
      Matrix k2 = am * (y + 0.5 * h * k1);
      Matrix k3 = am * (y + 0.5 * h * k2);
      Matrix k4 = a1 * (y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!y.allFinite()) throw Error(ErrorCode::NonFinite, "state transition matrix became non-finite", {{"t", t1}});
    out.push_back(y);
  }
  return out;
}

STM state_transition(const Model& model, const Trajectory& traj, const AdjointOptions& opt) {
  auto path = state_transition_path(model, traj, opt);
  return STM{traj.times.front(), traj.times.back(), path.back()};
}

FlowWithSTM flow_with_stm(const Model& model, const Vector& x, double t_max, const IntegratorConfig& cfg,
                          const std::function<bool(const Vector&)>& stop) {
  const int n = model.dimension();
  Vector y0(n + n * n);
  y0.head(n) = x;
  Eigen::Map<Matrix>(y0.data() + n, n, n) = Matrix::Identity(n, n);
  auto f = [&](double, const Vector& y) -> Vector {
    Vector out(n + n * n);
    Vector xs = y.head(n);
    out.head(n) = model.rhs(xs);
    Eigen::Map<Matrix>(out.data() + n, n, n) = model.jacobian(xs) * Eigen::Map<const Matrix>(y.data() + n, n, n);
    return out;
  };
  auto pred = [&](double, const Vector& y) { return stop ? stop(Vector(y.head(n))) : false; };
  IntegratorConfig c = cfg;
  c.blowup_norm = std::numeric_limits<double>::infinity();
  Path<Vector> path = integrate_until(f, y0, 0.0, t_max, c, pred);
  FlowWithSTM out;
  out.stopped = path.stopped;
  out.t_end = path.times.back();
  out.traj.times = path.times;
  out.traj.states.reserve(path.times.size());
  out.traj.rates.reserve(path.times.size());
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    Vector xs = path.states[i].head(n);
    if (xs.lpNorm<Eigen::Infinity>() > cfg.blowup_norm) {
      throw Error(ErrorCode::BlowUp, "state norm exceeded bound", {{"t", path.times[i]}});
    }
    out.traj.states.push_back(xs);
    out.traj.rates.push_back(path.rates[i].head(n));
  }
  out.phi = Eigen::Map<const Matrix>(path.states.back().data() + n, n, n);
  return out;
}

}  // namespace isoman
