#pragma once

#include "isoman/integrate.hpp"
#include "isoman/models.hpp"
#include "isoman/spectrum.hpp"

#include <functional>
#include <vector>

namespace isoman {

// States on a time grid with their rates (dx/dt in the grid's own time variable).
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> rates;

  std::size_t size() const { return times.size(); }
  // cubic Hermite interpolation; clamps outside the grid
  Vector state_at(double t) const;
  void validate() const;
};

// Forward flow sampled on `grid`.
Trajectory simulate(const Model& model, const Vector& x0, const std::vector<double>& grid,
                    const IntegratorConfig& cfg = {});
// Plain backward-time flow dx/dt~ = -F(x) sampled on `grid` (the naive strategy).
Trajectory simulate_backward(const Model& model, const Vector& x0, const std::vector<double>& grid,
                             const IntegratorConfig& cfg = {});

// Same path in the opposite time direction, t' = t_end - t.
Trajectory reversed(const Trajectory& traj);

std::vector<double> uniform_grid(double t0, double t1, double dt);

struct AdjointOptions {
  double max_substep = 0.01;  // RK4 substep bound between grid samples
};

// dI/dt~ = (J^T - lambda) I along a backward-time trajectory (I at times[0] = init).
std::vector<CVector> propagate_I_backward(const Model& model, const Trajectory& backward_traj, Complex lambda,
                                          const CVector& init, const AdjointOptions& opt = {});
// dg/dt = (J - lambda) g along a forward trajectory.
std::vector<CVector> propagate_g_forward(const Model& model, const Trajectory& forward_traj, Complex lambda,
                                         const CVector& init, const AdjointOptions& opt = {});
// dI/dt = -(J^T - lambda) I along a forward trajectory (the forward-time adjoint).
std::vector<CVector> propagate_I_forward(const Model& model, const Trajectory& forward_traj, Complex lambda,
                                         const CVector& init, const AdjointOptions& opt = {});

struct PsiOptions {
  double entry_radius = 1e-3;
  double max_horizon = 0.0;  // 0: 60 slow time constants
  IntegratorConfig integrator{};
};

// Slow isostable coordinates psi_1..psi_beta of x via the forward flow into the linear regime.
CVector evaluate_psi(const Model& model, const Spectrum& spectrum, const Vector& x, const PsiOptions& opt = {});

double linear_radius(const Spectrum& spectrum);  // 1e-6 (1 + |x0|)

struct STM {
  double t1 = 0.0;
  double t2 = 0.0;
  Matrix phi;  // Phi_J(t2, t1)

  CMatrix shifted(Complex lambda) const;  // Phi_J exp(-lambda (t2 - t1))
  // this * earlier, with earlier.t2 == this.t1
  STM compose(const STM& earlier) const;
};

// Phi_J(t_i, t_0) for every sample of a forward trajectory.
std::vector<Matrix> state_transition_path(const Model& model, const Trajectory& forward_traj,
                                          const AdjointOptions& opt = {});
STM state_transition(const Model& model, const Trajectory& forward_traj, const AdjointOptions& opt = {});

// Forward flow with its variational matrix, integrated jointly until stop(x) or t_max.
struct FlowWithSTM {
  Trajectory traj;
  Matrix phi;  // Phi_J(t_end, 0)
  double t_end = 0.0;
  bool stopped = false;
};
FlowWithSTM flow_with_stm(const Model& model, const Vector& x, double t_max, const IntegratorConfig& cfg,
                          const std::function<bool(const Vector&)>& stop = nullptr);

}  // namespace isoman
