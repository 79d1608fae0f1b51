#include "isoman/manifold.hpp"

#include "isoman/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <thread>

namespace isoman {

std::string to_string(TraceMethod m) {
  switch (m) {
    case TraceMethod::Asym: return "asym";
    case TraceMethod::PC: return "pc";
    case TraceMethod::Naive: return "naive";
  }
  return "unknown";
}

TraceMethod parse_method(const std::string& s) {
  if (s == "asym") return TraceMethod::Asym;
  if (s == "pc") return TraceMethod::PC;
  if (s == "naive") return TraceMethod::Naive;
  throw Error(ErrorCode::InvalidArgument, "unknown tracing method '" + s + "'", {{"known", {"asym", "pc", "naive"}}});
}

std::string to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::Completed: return "completed";
    case TraceStatus::PsiCap: return "psi_cap";
    case TraceStatus::IllConditioned: return "ill_conditioned";
    case TraceStatus::BlowUp: return "blow_up";
    case TraceStatus::Diverged: return "diverged";
    case TraceStatus::Failed: return "failed";
  }
  return "unknown";
}

void ManifoldTrajectory::require_ok() const {
  switch (status) {
    case TraceStatus::Completed:
    case TraceStatus::PsiCap: return;
    case TraceStatus::IllConditioned: throw Error(ErrorCode::IllConditioned, message, {{"t_back", duration()}});
    case TraceStatus::BlowUp: throw Error(ErrorCode::BlowUp, message, {{"t_back", duration()}});
    case TraceStatus::Diverged: throw Error(ErrorCode::AbortOnDivergence, message, {{"t_back", duration()}});
    case TraceStatus::Failed: throw Error(ErrorCode::NonFinite, message, {{"t_back", duration()}});
  }
}

Matrix realify(const std::vector<CVector>& vecs, const std::vector<int>& partner) {
  const int beta = static_cast<int>(vecs.size());
  const Eigen::Index n = vecs.empty() ? 0 : vecs.front().size();
  Matrix out(n, beta);
  int col = 0;
  for (int k = 0; k < beta; ++k) {
    if (partner[k] == k) {
      out.col(col++) = vecs[k].real();
    } else if (partner[k] > k) {
      out.col(col++) = vecs[k].real();
      out.col(col++) = vecs[k].imag();
    }
  }
  if (col != beta) throw Error(ErrorCode::PairSplit, "slow vectors are not closed under conjugation");
  return out;
}

BackwardRhs backward_rhs(const std::vector<CVector>& I, const Matrix& complement, const CVector& psi,
                         const CVector& lambda, const std::vector<int>& partner, double max_condition) {
  const int beta = static_cast<int>(I.size());
  const Eigen::Index n = I.front().size();
  if (complement.rows() != n - beta || complement.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "complement basis has the wrong shape",
                {{"rows", complement.rows()}, {"expected", n - beta}});
  }
  Matrix a(n, n);
  Vector b = Vector::Zero(n);
  int row = 0;
  for (int k = 0; k < beta; ++k) {
    Complex target = -lambda(k) * psi(k);
    if (partner[k] == k) {
      a.row(row) = I[k].real().transpose();
      b(row++) = target.real();
    } else if (partner[k] > k) {
      a.row(row) = I[k].real().transpose();
      b(row++) = target.real();
      a.row(row) = I[k].imag().transpose();
      b(row++) = target.imag();
    }
  }
  a.bottomRows(n - beta) = complement;
  try {
    SolveResult r = solve(a, b, max_condition);
    return {r.x, r.condition};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Singular) throw;
    throw Error(ErrorCode::IllConditioned, "backward velocity system is ill-conditioned", e.details());
  }
}

Vector linear_seed(const Spectrum& s, const CVector& psi) {
  CVector full = complete_psi(s, psi);
  CVector acc = CVector::Zero(s.dimension());
  for (int k = 0; k < s.beta; ++k) acc += full(k) * s.v.col(k);
  return s.x0 + acc.real();
}

CVector complete_psi(const Spectrum& s, const CVector& psi) {
  CVector full = CVector::Zero(s.beta);
  for (int k = 0; k < std::min<int>(s.beta, static_cast<int>(psi.size())); ++k) full(k) = psi(k);
  for (int k = 0; k < s.beta; ++k) {
    int p = s.partner[k];
    if (p > k) full(p) = std::conj(full(k));
    if (p == k) full(k) = Complex(full(k).real(), 0.0);
  }
  return full;
}

namespace {

std::vector<int> slow_partner(const Spectrum& s) {
  if (s.beta < 1) throw Error(ErrorCode::InvalidArgument, "spectrum has no slow modes selected");
  return std::vector<int>(s.partner.begin(), s.partner.begin() + s.beta);
}

CVector psi_at(const Spectrum& s, const CVector& seed, double t_back) {
  CVector p(s.beta);
  for (int k = 0; k < s.beta; ++k) p(k) = seed(k) * std::exp(-s.lambda(k) * t_back);
  return p;
}

std::vector<CVector> slow_columns(const CMatrix& m, int beta) {
  std::vector<CVector> out;
  for (int k = 0; k < beta; ++k) out.push_back(m.col(k));
  return out;
}

void enforce_conjugate(std::vector<CVector>& I, const std::vector<int>& partner) {
  for (int k = 0; k < static_cast<int>(I.size()); ++k) {
    if (partner[k] > k) I[partner[k]] = I[k].conjugate();
    if (partner[k] == k) I[k] = I[k].real().cast<Complex>();
  }
}

CVector adjoint_rate(const Matrix& jt, Complex lambda, const CVector& I) {
  CVector out = jt.cast<Complex>() * I;
  out -= lambda * I;
  return out;
}

Matrix orth(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

// Thin sampler honouring record_interval.
struct Recorder {
  double interval;
  double next = 0.0;
  bool due(double t) {
    if (interval <= 0.0) return true;
    if (t + 1e-9 >= next) {
      while (next <= t + 1e-9) next += interval;
      return true;
    }
    return false;
  }
};

TraceStatus status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::IllConditioned:
    case ErrorCode::Singular: return TraceStatus::IllConditioned;
    case ErrorCode::BlowUp: return TraceStatus::BlowUp;
    case ErrorCode::AbortOnDivergence: return TraceStatus::Diverged;
    default: return TraceStatus::Failed;
  }
}

bool stop_checks(const Spectrum& s, const TraceConfig& cfg, const TraceSample& smp, ManifoldTrajectory& tr) {
  if (!smp.x.allFinite()) {
    tr.status = TraceStatus::Failed;
    tr.message = "non-finite state";
    return true;
  }
  if ((smp.x - s.x0).norm() > cfg.blowup_norm) {
    tr.status = TraceStatus::BlowUp;
    tr.message = "state left the configured bound";
    return true;
  }
  if (std::abs(smp.psi(0)) > cfg.psi_cap) {
    tr.status = TraceStatus::PsiCap;
    tr.message = "isostable cap reached";
    return true;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------- asymptotic strategy

ManifoldTrajectory trace_asym(const Model& model, const Spectrum& s, const ExpansionTensors& exp,
                              const CVector& psi_init, const TraceConfig& cfg) {
  const auto partner = slow_partner(s);
  const int beta = s.beta;
  if (exp.modes < beta) throw Error(ErrorCode::InvalidArgument, "expansion does not cover all slow modes");
  const int order = cfg.order < 0 ? exp.order : cfg.order;
  if (order > exp.order) throw Error(ErrorCode::OrderUnavailable, "g-series order exceeds the solved order");
  const CVector seed = complete_psi(s, psi_init);
  const CVector lam = s.lambda.head(beta);

  ManifoldTrajectory tr;
  tr.method = TraceMethod::Asym;
  tr.psi_seed = seed;

  struct State {
    Vector x;
    std::vector<CVector> I;
  };
  auto deriv = [&](double t, const State& st, double& cond) {
    CVector psi = psi_at(s, seed, t);
    std::vector<CVector> g;
    for (int j = 0; j < beta; ++j) g.push_back(g_series(exp, psi, j, order));
    Matrix comp = complement_rows(realify(g, partner));
    BackwardRhs r = backward_rhs(st.I, comp, psi, lam, partner, cfg.max_condition);
    cond = r.cond;
    State d;
    d.x = r.dx;
    Matrix jt = model.jacobian(st.x).transpose();
    for (int k = 0; k < beta; ++k) d.I.push_back(adjoint_rate(jt, lam(k), st.I[k]));
    return d;
  };
  auto axpy = [&](const State& a, double h, const State& d) {
    State o;
    o.x = a.x + h * d.x;
    for (int k = 0; k < beta; ++k) o.I.push_back(a.I[k] + h * d.I[k]);
    return o;
  };

  State st{reconstruct_state(exp, seed, order).x, slow_columns(s.w, beta)};
  Recorder rec{cfg.record_interval};
  double t = 0.0;
  auto push = [&](double cond) {
    TraceSample smp{t, st.x, psi_at(s, seed, t), st.I, cond, 0.0};
    tr.samples.push_back(std::move(smp));
  };
  try {
    double c0 = 0.0;
    deriv(0.0, st, c0);
    rec.due(0.0);
    push(c0);
    const long steps = static_cast<long>(std::ceil(cfg.T / cfg.step - 1e-9));
    for (long i = 0; i < steps; ++i) {
      double h = std::min(cfg.step, cfg.T - t);
      if (h <= 0.0) break;
      double c1, c2, c3, c4;
      State k1 = deriv(t, st, c1);
      State k2 = deriv(t + 0.5 * h, axpy(st, 0.5 * h, k1), c2);
      State k3 = deriv(t + 0.5 * h, axpy(st, 0.5 * h, k2), c3);
      State k4 = deriv(t + h, axpy(st, h, k3), c4);
      st.x += (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
      for (int k = 0; k < beta; ++k) st.I[k] += (h / 6.0) * (k1.I[k] + 2.0 * k2.I[k] + 2.0 * k3.I[k] + k4.I[k]);
      enforce_conjugate(st.I, partner);
      t = (i + 1 == steps) ? cfg.T : t + h;
      TraceSample probe{t, st.x, psi_at(s, seed, t), {}, 0.0, 0.0};
      bool last = i + 1 == steps;
      if (stop_checks(s, cfg, probe, tr)) {
        push(std::max({c1, c2, c3, c4}));
        return tr;
      }
      if (rec.due(t) || last) push(std::max({c1, c2, c3, c4}));
    }
  } catch (const Error& e) {
    tr.status = status_for(e.code());
    tr.message = e.what();
  }
  return tr;
}

// ---------------------------------------------------------------- naive strategy

ManifoldTrajectory trace_naive(const Model& model, const Spectrum& s, const CVector& psi_init, const TraceConfig& cfg) {
  const auto partner = slow_partner(s);
  const int beta = s.beta;
  const CVector seed = complete_psi(s, psi_init);
  const CVector lam = s.lambda.head(beta);
  ManifoldTrajectory tr;
  tr.method = TraceMethod::Naive;
  tr.psi_seed = seed;
  Vector x = linear_seed(s, seed);
  std::vector<CVector> I = slow_columns(s.w, beta);
  Recorder rec{cfg.record_interval};
  double t = 0.0;
  rec.due(0.0);
  tr.samples.push_back({0.0, x, seed, I, 1.0, 0.0});
  const long steps = static_cast<long>(std::ceil(cfg.T / cfg.step - 1e-9));
  auto fx = [&](double, const Vector& y) -> Vector { return -model.rhs(y); };
  try {
    for (long i = 0; i < steps; ++i) {
      double h = std::min(cfg.step, cfg.T - t);
      if (h <= 0.0) break;
      Vector xm = rk4_step<Vector>(fx, t, x, 0.5 * h);
      Vector xn = rk4_step<Vector>(fx, t, x, h);
      Matrix j0 = model.jacobian(x).transpose(), jm = model.jacobian(xm).transpose(), j1 = model.jacobian(xn).transpose();
      for (int k = 0; k < beta; ++k) {
        CVector k1 = adjoint_rate(j0, lam(k), I[k]);
        CVector k2 = adjoint_rate(jm, lam(k), I[k] + 0.5 * h * k1);
        CVector k3 = adjoint_rate(jm, lam(k), I[k] + 0.5 * h * k2);
        CVector k4 = adjoint_rate(j1, lam(k), I[k] + h * k3);
        I[k] += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      enforce_conjugate(I, partner);
      x = xn;
      t = (i + 1 == steps) ? cfg.T : t + h;
      TraceSample smp{t, x, psi_at(s, seed, t), I, 1.0, 0.0};
      if (stop_checks(s, cfg, smp, tr)) {
        tr.samples.push_back(std::move(smp));
        return tr;
      }
      if (rec.due(t) || i + 1 == steps) tr.samples.push_back(std::move(smp));
    }
  } catch (const Error& e) {
    tr.status = status_for(e.code());
    tr.message = e.what();
  }
  return tr;
}

// ---------------------------------------------------------------- predictor-corrector strategy

Prediction predict(const Model& model, const Spectrum& s, const PcState& start, const CVector& psi_seed, double dt,
                   const TraceConfig& cfg) {
  const auto partner = slow_partner(s);
  const int beta = s.beta;
  const CVector lam = s.lambda.head(beta);
  const Matrix comp = complement_rows(realify(slow_columns(s.v, beta), partner));
  const int n = s.dimension();

  struct State {
    Vector x;
    std::vector<CVector> I;
    Matrix a;
  };
  auto deriv = [&](double t, const State& st, double& cond) {
    CVector psi = psi_at(s, psi_seed, t);
    BackwardRhs r = backward_rhs(st.I, comp, psi, lam, partner, cfg.max_condition);
    cond = r.cond;
    Matrix j = model.jacobian(st.x);
    Matrix jt = j.transpose();
    State d;
    d.x = r.dx;
    for (int k = 0; k < beta; ++k) d.I.push_back(adjoint_rate(jt, lam(k), st.I[k]));
    d.a = st.a * j;
    return d;
  };
  auto axpy = [&](const State& a, double h, const State& d) {
    State o;
    o.x = a.x + h * d.x;
    for (int k = 0; k < beta; ++k) o.I.push_back(a.I[k] + h * d.I[k]);
    o.a = a.a + h * d.a;
    return o;
  };

  Prediction out;
  State st{start.x, start.I, start.phi.size() ? start.phi : Matrix(Matrix::Identity(n, n))};
  double t = start.t_back;
  const double t_end = start.t_back + dt;
  const long steps = std::max(1L, static_cast<long>(std::ceil(dt / cfg.step - 1e-9)));
  const double h = dt / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    double c1, c2, c3, c4;
    State k1 = deriv(t, st, c1);
    State k2 = deriv(t + 0.5 * h, axpy(st, 0.5 * h, k1), c2);
    State k3 = deriv(t + 0.5 * h, axpy(st, 0.5 * h, k2), c3);
    State k4 = deriv(t + h, axpy(st, h, k3), c4);
    st.x += (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    for (int k = 0; k < beta; ++k) st.I[k] += (h / 6.0) * (k1.I[k] + 2.0 * k2.I[k] + 2.0 * k3.I[k] + k4.I[k]);
    st.a += (h / 6.0) * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
    enforce_conjugate(st.I, partner);
    t = (i + 1 == steps) ? t_end : t + h;
    double c = std::max({c1, c2, c3, c4});
    out.max_cond = std::max(out.max_cond, c);
    if (!st.x.allFinite()) throw Error(ErrorCode::NonFinite, "prediction produced a non-finite state", {{"t_back", t}});
    out.segment.push_back({t, st.x, psi_at(s, psi_seed, t), st.I, c, 0.0});
  }
  out.state = PcState{st.x, st.I, st.a, start.horizon + dt, t_end};
  return out;
}

Correction correct(const Model& model, const Spectrum& s, const Matrix& phi, double horizon, const Vector& x,
                   const CVector& psi, const TraceConfig& cfg) {
  const auto partner = slow_partner(s);
  const int beta = s.beta;
  const int n = s.dimension();
  if (phi.rows() != n || phi.cols() != n || !phi.allFinite()) {
    throw Error(ErrorCode::NonFinite, "state transition matrix is malformed or non-finite");
  }
  const Matrix vs = realify(slow_columns(s.v, beta), partner);
  const Matrix ws = realify(slow_columns(s.w, beta), partner);

  // dominant right and left invariant subspaces of Phi by orthogonal iteration
  Matrix u = orth(vs);
  Matrix l = orth(ws);
  for (int it = 0; it < 6; ++it) {
    u = orth(phi * u);
    l = orth(phi.transpose() * l);
  }
  if (!u.allFinite() || !l.allFinite()) {
    throw Error(ErrorCode::NonDiagonalizable, "slow invariant subspace of the transition matrix is not resolvable");
  }
  Matrix overlap = l.transpose() * u;
  Eigen::JacobiSVD<Matrix> svd(overlap);
  Correction c;
  c.oblique_sigma = svd.singularValues()(beta - 1);
  if (!(c.oblique_sigma > cfg.degenerate_sigma)) {
    throw Error(ErrorCode::DegenerateFastBasis, "fast eigenvectors of the transition matrix are nearly dependent",
                {{"sigma_min", c.oblique_sigma}, {"threshold", cfg.degenerate_sigma}});
  }
  Eigen::JacobiSVD<Matrix> angle_svd(u.transpose() * orth(vs));
  double cosmin = std::clamp(angle_svd.singularValues()(beta - 1), 0.0, 1.0);
  c.principal_angle = std::acos(cosmin);

  Matrix b = u.transpose() * phi * u;
  // Phi restricted to its slow subspace, inverted: U B^{-1} (L^T U)^{-1} L^T
  Matrix slow_inverse = u * b.fullPivLu().solve(overlap.fullPivLu().solve(l.transpose()));
  if (!slow_inverse.allFinite()) {
    throw Error(ErrorCode::NonDiagonalizable, "slow block of the transition matrix is singular");
  }
  CVector target = CVector::Zero(n);
  for (int j = 0; j < beta; ++j) {
    CVector g = std::exp(s.lambda(j) * horizon) * (slow_inverse.cast<Complex>() * s.v.col(j));
    c.g.push_back(g);
    target += s.lambda(j) * psi(j) * g;
  }
  Vector residual = target.real() - model.rhs(x);
  Matrix j = model.jacobian(x);
  Vector step = pinv(j) * residual;
  // project onto the fast eigenspace of Phi, i.e. the orthogonal complement of the slow left vectors
  c.dx = step - l * (l.transpose() * step);
  double nrm = c.dx.norm();
  c.slow_leak = nrm > 0.0 ? (l.transpose() * c.dx).cwiseAbs().maxCoeff() / nrm : 0.0;
  return c;
}

namespace {

CVector interpolate_I(const ManifoldTrajectory& tr, int k, double t_back) {
  const auto& smp = tr.samples;
  if (smp.empty() || t_back <= smp.front().t_back) return smp.front().I[k];
  if (t_back >= smp.back().t_back) return smp.back().I[k];
  auto it = std::lower_bound(smp.begin(), smp.end(), t_back,
                             [](const TraceSample& a, double t) { return a.t_back < t; });
  const TraceSample& hi = *it;
  const TraceSample& lo = *(it - 1);
  double w = (t_back - lo.t_back) / std::max(hi.t_back - lo.t_back, 1e-300);
  return (1.0 - w) * lo.I[k] + w * hi.I[k];
}

struct Refresh {
  Matrix phi;
  double horizon;
  std::vector<CVector> I;
};

Refresh refresh(const Model& model, const Spectrum& s, const Vector& x, double t_back, const ManifoldTrajectory& tr,
                const TraceConfig& cfg) {
  const int beta = s.beta;
  const double eps_lin = linear_radius(s);
  const double cap = cfg.horizon_factor / std::abs(s.lambda(0).real());
  FlowWithSTM flow = flow_with_stm(model, x, cap, cfg.forward,
                                   [&](const Vector& y) { return (y - s.x0).norm() <= eps_lin; });
  if (!flow.stopped && t_back - flow.t_end <= 0.0) {
    // nothing traced that deep yet: finish the flow into the linear ball
    const Vector y = flow.traj.states.back();
    FlowWithSTM tail = flow_with_stm(model, y, 12.0 * cap, cfg.forward,
                                     [&](const Vector& z) { return (z - s.x0).norm() <= eps_lin; });
    flow.phi = tail.phi * flow.phi;
    flow.t_end += tail.t_end;
    flow.stopped = tail.stopped;
  }
  Refresh r{flow.phi, flow.t_end, {}};
  const double t_end_back = t_back - flow.t_end;
  for (int k = 0; k < beta; ++k) {
    CVector end = (flow.stopped || t_end_back <= 0.0 || tr.samples.empty()) ? CVector(s.w.col(k))
                                                                             : interpolate_I(tr, k, t_end_back);
    r.I.push_back(std::exp(-s.lambda(k) * flow.t_end) * (flow.phi.transpose().cast<Complex>() * end));
  }
  return r;
}

}  // namespace

ManifoldTrajectory trace_pc(const Model& model, const Spectrum& s, const CVector& psi_init, const TraceConfig& cfg) {
  const auto partner = slow_partner(s);
  const int beta = s.beta;
  const CVector seed = complete_psi(s, psi_init);
  ManifoldTrajectory tr;
  tr.method = TraceMethod::PC;
  tr.psi_seed = seed;
  Recorder rec{cfg.record_interval};
  try {
    PcState st;
    st.x = linear_seed(s, seed);
    st.t_back = 0.0;
    Refresh r0 = refresh(model, s, st.x, 0.0, tr, cfg);
    st.phi = r0.phi;
    st.horizon = r0.horizon;
    st.I = slow_columns(s.w, beta);
    rec.due(0.0);
    tr.samples.push_back({0.0, st.x, seed, st.I, 1.0, 0.0});
    double scale = (st.x - s.x0).norm();
    while (st.t_back < cfg.T - 1e-12) {
      double h = std::min(cfg.dt, cfg.T - st.t_back);
      Prediction p = predict(model, s, st, seed, h, cfg);
      for (std::size_t i = 0; i + 1 < p.segment.size(); ++i) {
        if (rec.due(p.segment[i].t_back)) tr.samples.push_back(p.segment[i]);
      }
      TraceSample front = p.segment.back();
      Correction c = correct(model, s, p.state.phi, p.state.horizon, p.state.x, front.psi, cfg);
      ++tr.corrections;
      tr.max_principal_angle = std::max(tr.max_principal_angle, c.principal_angle);
      tr.min_oblique_sigma = std::min(tr.min_oblique_sigma, c.oblique_sigma);
      double dxn = c.dx.norm();
      scale = std::max(scale, (p.state.x - s.x0).norm());
      if (dxn > cfg.divergence_fraction * scale) {
        throw Error(ErrorCode::AbortOnDivergence, "correction exceeds the configured fraction of the trajectory scale",
                    {{"correction", dxn}, {"scale", scale}, {"t_back", front.t_back}});
      }
      st.x = p.state.x + c.dx;
      st.t_back = p.state.t_back;
      Refresh r = refresh(model, s, st.x, st.t_back, tr, cfg);
      st.phi = r.phi;
      st.horizon = r.horizon;
      st.I = r.I;
      enforce_conjugate(st.I, partner);
      front.x = st.x;
      front.I = st.I;
      front.cond = p.max_cond;
      front.corr_norm = dxn;
      rec.due(front.t_back);
      tr.samples.push_back(front);
      if (stop_checks(s, cfg, front, tr)) break;
    }
  } catch (const Error& e) {
    tr.status = status_for(e.code());
    tr.message = e.what();
  }
  if (tr.max_principal_angle > cfg.principal_angle_warn) {
    tr.warnings.push_back("slow subspace of the transition matrix departs from span(v_slow) by " +
                          std::to_string(tr.max_principal_angle) + " rad");
  }
  return tr;
}

// ---------------------------------------------------------------- families

std::vector<Vector> SlowManifold::level_set(const Spectrum& s, double radius) const {
  std::vector<Vector> out;
  const double rate = -s.lambda(0).real();
  const double t = std::log(radius / seed_radius) / rate;
  for (const auto& ray : rays) {
    if (ray.samples.empty() || t < 0.0 || t > ray.samples.back().t_back) continue;
    auto it = std::lower_bound(ray.samples.begin(), ray.samples.end(), t,
                               [](const TraceSample& a, double v) { return a.t_back < v; });
    if (it == ray.samples.begin()) {
      out.push_back(it->x);
      continue;
    }
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    double w = (t - lo.t_back) / std::max(hi.t_back - lo.t_back, 1e-300);
    out.push_back((1.0 - w) * lo.x + w * hi.x);
  }
  return out;
}

SlowManifold build_manifold(const Model& model, const Spectrum& s, TraceMethod method, const ManifoldConfig& cfg,
                            const ExpansionTensors* exp) {
  if (s.beta != 1 && s.beta != 2) {
    throw Error(ErrorCode::OutOfRange, "manifold families are built for one- or two-dimensional slow manifolds",
                {{"beta", s.beta}});
  }
  if (s.beta == 2 && s.partner[0] != 1) {
    throw Error(ErrorCode::InvalidArgument, "two-dimensional families need a complex-conjugate slow pair");
  }
  if (method == TraceMethod::Asym && exp == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "asymptotic tracing needs expansion tensors");
  }
  SlowManifold m;
  m.beta = s.beta;
  m.method = method;
  m.seed_radius = cfg.seed_radius;
  const int k_rays = s.beta == 1 ? 2 : cfg.rays;
  if (k_rays < 1) throw Error(ErrorCode::OutOfRange, "ray count must be positive");
  std::vector<CVector> seeds;
  for (int k = 0; k < k_rays; ++k) {
    CVector psi(s.beta);
    if (s.beta == 1) {
      double sign = k == 0 ? 1.0 : -1.0;
      psi(0) = sign * cfg.seed_radius;
      m.seed_phase.push_back(k == 0 ? 0.0 : std::numbers::pi);
    } else {
      double theta = 2.0 * std::numbers::pi * k / k_rays;
      psi(0) = std::polar(cfg.seed_radius, theta);
      psi(1) = std::conj(psi(0));
      m.seed_phase.push_back(theta);
    }
    seeds.push_back(psi);
  }
  m.rays.resize(k_rays);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int k = next++; k < k_rays; k = next++) {
      try {
        switch (method) {
          case TraceMethod::Asym: m.rays[k] = trace_asym(model, s, *exp, seeds[k], cfg.trace); break;
          case TraceMethod::PC: m.rays[k] = trace_pc(model, s, seeds[k], cfg.trace); break;
          case TraceMethod::Naive: m.rays[k] = trace_naive(model, s, seeds[k], cfg.trace); break;
        }
      } catch (const Error& e) {
        m.rays[k].status = TraceStatus::Failed;
        m.rays[k].message = e.what();
      }
    }
  };
  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, k_rays);
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  for (int k = 0; k < k_rays; ++k) {
    if (!m.rays[k].usable()) {
      m.failed.push_back(k);
      m.failure_messages.push_back(m.rays[k].message);
    } else if (!m.rays[k].ok()) {
      m.truncated.push_back(k);
    }
  }
  if (static_cast<double>(k_rays - static_cast<int>(m.failed.size())) < 0.9 * k_rays) {
    throw Error(ErrorCode::InsufficientCoverage, "fewer than 90% of rays traced successfully",
                {{"rays", k_rays}, {"failed", m.failed.size()},
                 {"first_failure", m.failure_messages.empty() ? "" : m.failure_messages.front()}});
  }
  return m;
}

// ---------------------------------------------------------------- invariance diagnostics

double distance_to_ray(const ManifoldTrajectory& ray, const Vector& y) {
  const auto& smp = ray.samples;
  if (smp.empty()) return std::numeric_limits<double>::infinity();
  double best = (smp.front().x - y).norm();
  for (std::size_t i = 0; i + 1 < smp.size(); ++i) {
    const Vector& a = smp[i].x;
    Vector d = smp[i + 1].x - a;
    double len2 = d.squaredNorm();
    double s = len2 > 0.0 ? std::clamp((y - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + s * d - y).norm());
  }
  return best;
}

TubeReport invariance_tube(const Model& model, const Spectrum& s, const ManifoldTrajectory& ray,
                           const TubeOptions& opt) {
  if (ray.samples.size() < 2) throw Error(ErrorCode::InvalidArgument, "ray has too few samples for a tube check");
  TubeReport rep;
  rep.skip_time = opt.skip_time >= 0.0 ? opt.skip_time : 1.0 / std::abs(s.lambda(s.beta).real());
  const double min_radius = opt.min_radius > 0.0 ? opt.min_radius : 2.0 * (ray.samples.front().x - s.x0).norm();
  const double span = ray.duration();
  Trajectory fwd = simulate(model, ray.samples.back().x, uniform_grid(0.0, span, std::min(0.05, span / 50.0)),
                            opt.integrator);
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    if (fwd.times[i] < rep.skip_time) continue;
    double r = (fwd.states[i] - s.x0).norm();
    if (r < min_radius) continue;
    double d = distance_to_ray(ray, fwd.states[i]);
    rep.max_relative = std::max(rep.max_relative, d / r);
    rep.compared_span = fwd.times[i] - rep.skip_time;
    ++rep.compared_points;
  }
  return rep;
}

double tube_exit_time(const Spectrum& s, const ManifoldTrajectory& path, const ManifoldTrajectory& reference,
                      double tol) {
  for (const auto& smp : path.samples) {
    double r = (smp.x - s.x0).norm();
    if (r == 0.0) continue;
    if (distance_to_ray(reference, smp.x) / r > tol) return smp.t_back;
  }
  return std::numeric_limits<double>::infinity();
}

nlohmann::json trace_summary(const ManifoldTrajectory& tr) {
  double max_cond = 0.0, max_corr = 0.0;
  for (const auto& smp : tr.samples) {
    max_cond = std::max(max_cond, smp.cond);
    max_corr = std::max(max_corr, smp.corr_norm);
  }
  std::vector<double> seed_re, seed_im;
  for (Eigen::Index k = 0; k < tr.psi_seed.size(); ++k) {
    seed_re.push_back(tr.psi_seed(k).real());
    seed_im.push_back(tr.psi_seed(k).imag());
  }
  return {{"method", to_string(tr.method)},
          {"status", to_string(tr.status)},
          {"message", tr.message},
          {"duration", tr.duration()},
          {"samples", tr.samples.size()},
          {"corrections", tr.corrections},
          {"max_cond", max_cond},
          {"max_correction", max_corr},
          {"max_principal_angle", tr.max_principal_angle},
          {"min_oblique_sigma", tr.min_oblique_sigma},
          {"seed_re", seed_re},
          {"seed_im", seed_im},
          {"warnings", tr.warnings}};
}

}  // namespace isoman
