#pragma once

#include "isoman/expansion.hpp"
#include "isoman/integrate.hpp"
#include "isoman/isostable.hpp"
#include "isoman/spectrum.hpp"

#include <json.hpp>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace isoman {

enum class TraceMethod { Asym, PC, Naive };
enum class TraceStatus { Completed, PsiCap, IllConditioned, BlowUp, Diverged, Failed };

std::string to_string(TraceMethod m);
TraceMethod parse_method(const std::string& s);
std::string to_string(TraceStatus s);

struct TraceSample {
  double t_back = 0.0;
  Vector x;
  CVector psi;             // slow isostable values, closed form
  std::vector<CVector> I;  // slow gradients
  double cond = 0.0;
  double corr_norm = 0.0;
};

struct ManifoldTrajectory {
  TraceMethod method = TraceMethod::Asym;
  CVector psi_seed;
  std::vector<TraceSample> samples;
  TraceStatus status = TraceStatus::Completed;
  std::string message;
  int corrections = 0;
  double max_principal_angle = 0.0;   // between Phi's slow subspace and span(v_slow)
  double min_oblique_sigma = 1.0;     // smallest sigma_min of the slow left/right basis overlap
  std::vector<std::string> warnings;

  bool ok() const { return status == TraceStatus::Completed || status == TraceStatus::PsiCap; }
  // ok, or stopped early (divergence rule, ill-conditioned velocity) after accepting at least one step
  bool usable() const {
    return ok() || ((status == TraceStatus::Diverged || status == TraceStatus::IllConditioned) && samples.size() > 1);
  }
  double duration() const { return samples.empty() ? 0.0 : samples.back().t_back; }
  // throws the error matching a failed status
  void require_ok() const;
};

struct TraceConfig {
  double T = 100.0;              // backward time span
  double step = 0.01;            // RK4 step of the backward flow
  double dt = 0.25;              // correction cadence (pc)
  double record_interval = 0.0;  // sample spacing in backward time; 0 records every step
  double psi_cap = std::numeric_limits<double>::infinity();
  double blowup_norm = 1e6;      // on |x - x0|
  double max_condition = 1e10;
  int order = -1;                // asym g-series order (default: solved order)
  double divergence_fraction = 0.5;
  double horizon_factor = 5.0;   // refresh horizon cap in units of 1/|Re lambda_1|
  double degenerate_sigma = 1e-8;
  double principal_angle_warn = 0.5;  // radians
  IntegratorConfig forward{IntegratorMethod::DOPRI5, 1e-2, 1e-8, 1e-8};  // refresh flow
};

struct BackwardRhs {
  Vector dx;
  double cond = 0.0;
};

// Solves [I_1..I_beta (realified); complement] dx = (-lambda psi ..., 0...) for the backward velocity.
BackwardRhs backward_rhs(const std::vector<CVector>& I_slow, const Matrix& complement, const CVector& psi,
                         const CVector& lambda, const std::vector<int>& partner, double max_condition = 1e10);

// Real N x beta basis of the span of conjugate-closed vectors (Re/Im split for pairs).
Matrix realify(const std::vector<CVector>& vecs, const std::vector<int>& partner);

// Seed state x0 + sum psi_k v_k (real for conjugate inputs).
Vector linear_seed(const Spectrum& spectrum, const CVector& psi);
// Full slow vector from the leading entries (fills conjugate partners).
CVector complete_psi(const Spectrum& spectrum, const CVector& psi);

ManifoldTrajectory trace_asym(const Model& model, const Spectrum& spectrum, const ExpansionTensors& exp,
                              const CVector& psi_init, const TraceConfig& cfg);
ManifoldTrajectory trace_pc(const Model& model, const Spectrum& spectrum, const CVector& psi_init,
                            const TraceConfig& cfg);
ManifoldTrajectory trace_naive(const Model& model, const Spectrum& spectrum, const CVector& psi_init,
                               const TraceConfig& cfg);

// Predictor state carried between corrections.
struct PcState {
  Vector x;
  std::vector<CVector> I;  // slow gradients
  Matrix phi;              // Phi_J(t_end, t_front)
  double horizon = 0.0;    // t_end - t_front
  double t_back = 0.0;
};

struct Prediction {
  PcState state;
  std::vector<TraceSample> segment;  // excludes the starting sample
  double max_cond = 0.0;
};

Prediction predict(const Model& model, const Spectrum& spectrum, const PcState& start, const CVector& psi_seed,
                   double dt, const TraceConfig& cfg);

struct Correction {
  Vector dx;
  std::vector<CVector> g;      // approximated slow g-vectors at the front
  double principal_angle = 0.0;
  double oblique_sigma = 1.0;
  double slow_leak = 0.0;      // max_k |w_hat_k^T dx| / |dx|
};

Correction correct(const Model& model, const Spectrum& spectrum, const Matrix& phi, double horizon, const Vector& x,
                   const CVector& psi, const TraceConfig& cfg = {});

struct SlowManifold {
  int beta = 0;
  TraceMethod method = TraceMethod::PC;
  double seed_radius = 0.0;
  std::vector<double> seed_phase;         // per ray
  std::vector<ManifoldTrajectory> rays;
  std::vector<int> failed;                // indices of failed rays
  std::vector<int> truncated;             // rays stopped early but kept (divergence, ill-conditioning)
  std::vector<std::string> failure_messages;

  // points of every ray at |psi_1| = radius (rays that reach it)
  std::vector<Vector> level_set(const Spectrum& spectrum, double radius) const;
};

struct ManifoldConfig {
  int rays = 200;
  double seed_radius = 0.01;
  TraceConfig trace{};
  int threads = 0;  // 0: hardware concurrency
};

SlowManifold build_manifold(const Model& model, const Spectrum& spectrum, TraceMethod method,
                            const ManifoldConfig& cfg, const ExpansionTensors* exp = nullptr);

// Nearest-point distance from a point to a ray's polyline.
double distance_to_ray(const ManifoldTrajectory& ray, const Vector& y);

struct TubeReport {
  double max_relative = 0.0;  // max over compared samples of distance / |y - x0|
  double skip_time = 0.0;
  double compared_span = 0.0;
  int compared_points = 0;
};

struct TubeOptions {
  double skip_time = -1.0;   // default: one fast time constant 1/|Re lambda_{beta+1}|
  double min_radius = 0.0;   // ignore forward points closer than this to x0 (default: 2x seed distance)
  IntegratorConfig integrator{};
};

// Forward flow from the ray's far endpoint compared with the ray itself.
TubeReport invariance_tube(const Model& model, const Spectrum& spectrum, const ManifoldTrajectory& ray,
                           const TubeOptions& opt = {});

// First backward time at which `path` leaves the relative tube of width tol around `reference`.
double tube_exit_time(const Spectrum& spectrum, const ManifoldTrajectory& path, const ManifoldTrajectory& reference,
                      double tol);

nlohmann::json trace_summary(const ManifoldTrajectory& tr);

}  // namespace isoman
