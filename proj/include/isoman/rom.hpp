#pragma once

#include "isoman/integrate.hpp"
#include "isoman/manifold.hpp"
#include "isoman/models.hpp"
#include "isoman/spectrum.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace isoman {

// Scalar isostable model psi' = lambda psi + i(psi) u(t) with tabulated gain and output maps.
struct ReducedModel {
  int beta = 2;                 // 1: real signed radius, 2: complex psi_1
  Complex lambda;
  Vector x0;
  Vector channel;
  CVector v1;                   // linear output direction
  Complex gain0;                // channel^T w_1
  double seed_radius = 0.0;
  double domain_radius = 0.0;
  double t_step = 0.0;          // table spacing in backward time (uniform in log radius)
  int rays = 0;                 // phase samples (beta = 2) or 2 (beta = 1)
  std::vector<double> seed_phase;
  // [ray][t index]
  std::vector<std::vector<Complex>> gain;
  std::vector<std::vector<Vector>> output;

  int columns() const { return gain.empty() ? 0 : static_cast<int>(gain.front().size()); }
  Complex gain_at(Complex psi) const;
  Vector output_at(Complex psi) const;
};

struct RomOptions {
  double t_step = 0.25;
  double coverage = 0.9;
};

ReducedModel build_rom(const SlowManifold& manifold, const Spectrum& spectrum, const Vector& channel,
                       const RomOptions& opt = {});

nlohmann::json to_json(const ReducedModel& rom);
ReducedModel rom_from_json(const nlohmann::json& j);

struct RomRun {
  std::vector<double> times;
  std::vector<Complex> psi;
  std::vector<Vector> outputs;
};

struct RomSimConfig {
  IntegratorConfig integrator{IntegratorMethod::DOPRI5, 1e-2, 1e-10, 1e-10};
  double sample_dt = 0.05;
};

// Throws DomainExit when |psi_1| leaves the table.
RomRun simulate_rom(const ReducedModel& rom, const InputSignal& signal, Complex psi0, double T,
                    const RomSimConfig& cfg = {});

// Anything that maps a forcing signal to sampled states.
class ForcedSystem {
 public:
  virtual ~ForcedSystem() = default;
  virtual std::string name() const = 0;
  virtual int dimension() const = 0;
  virtual Vector rest_state() const = 0;
  virtual Sampled<Vector> respond(const InputSignal& signal, const std::vector<double>& grid) const = 0;
};

// Full nonlinear model started at the fixed point.
class FullSystem : public ForcedSystem {
 public:
  FullSystem(ModelPtr model, Vector x0, Vector channel, IntegratorConfig cfg = {});
  std::string name() const override { return "full"; }
  int dimension() const override { return static_cast<int>(x0_.size()); }
  Vector rest_state() const override { return x0_; }
  Sampled<Vector> respond(const InputSignal& signal, const std::vector<double>& grid) const override;

 private:
  ModelPtr model_;
  Vector x0_, channel_;
  IntegratorConfig cfg_;
};

// x' = J (x - x0) + b u.
class LinearSystem : public ForcedSystem {
 public:
  LinearSystem(const Spectrum& spectrum, Vector channel, IntegratorConfig cfg = {});
  std::string name() const override { return "linear"; }
  int dimension() const override { return static_cast<int>(x0_.size()); }
  Vector rest_state() const override { return x0_; }
  Sampled<Vector> respond(const InputSignal& signal, const std::vector<double>& grid) const override;

 private:
  Matrix j_;
  Vector x0_, channel_;
  IntegratorConfig cfg_;
};

class RomSystem : public ForcedSystem {
 public:
  explicit RomSystem(std::shared_ptr<const ReducedModel> rom, IntegratorConfig cfg = {});
  std::string name() const override { return "rom"; }
  int dimension() const override { return static_cast<int>(rom_->x0.size()); }
  Vector rest_state() const override { return rom_->x0; }
  Sampled<Vector> respond(const InputSignal& signal, const std::vector<double>& grid) const override;

 private:
  std::shared_ptr<const ReducedModel> rom_;
  IntegratorConfig cfg_;
};

struct MaximaOptions {
  int output = 0;                // state component observed
  int settle_periods = 20;
  int samples_per_period = 400;
  double settle_tol = 1e-2;      // relative mismatch allowed between repeated cycles
};

struct SteadyMaxima {
  double max1 = 0.0;
  double max2 = 0.0;
  std::vector<double> cycle_maxima;  // four cycles after settling
  int period = 1;                     // 1 or 2
  double relative_gap() const;
};

// Throws NotSettled when the four recorded cycles show neither a period-1 nor a period-2 pattern.
SteadyMaxima steady_state_maxima(const ForcedSystem& system, const InputSignal& signal, const MaximaOptions& opt = {});

struct SweepPoint {
  double a = 0.0;
  double max1 = 0.0;
  double max2 = 0.0;
  bool settled = true;
  bool split = false;
  bool valid = true;  // false when the system could not represent this amplitude (DomainExit)
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double a_crit = 0.0;
  bool found = false;
  double gap_threshold = 0.0;
};

struct SweepOptions {
  double period = 24.0;
  double gap_threshold = 1e-2;   // relative split of the two maxima
  MaximaOptions maxima{};
  int threads = 0;
};

// Sinusoidal forcing a sin(2 pi t / period) over a sorted grid; a_crit = first a whose maxima split.
SweepResult sweep_period_doubling(const ForcedSystem& system, const std::vector<double>& a_grid,
                                  const SweepOptions& opt = {});
// Throws NoBifurcationInRange when no grid value splits.
double find_period_doubling(const ForcedSystem& system, const std::vector<double>& a_grid,
                            const SweepOptions& opt = {});

struct ChirpComparison {
  std::vector<double> times;
  std::vector<double> omega;
  std::vector<Vector> full, rom, linear;
  double rom_error = 0.0;     // 2-norm over all states, final half
  double linear_error = 0.0;
  double full_peak_omega = 0.0;
  double rom_peak_omega = 0.0;
  double linear_peak_omega = 0.0;
  double full_peak_amplitude = 0.0;
  double rom_peak_amplitude = 0.0;
  double linear_peak_amplitude = 0.0;
};

// Runs the three systems on one signal. Peaks locate the largest |x_out - x0_out|.
ChirpComparison compare_forced(const ForcedSystem& full, const ForcedSystem& rom, const ForcedSystem& linear,
                               const InputSignal& signal, double T, double dt, int output = 0);

}  // namespace isoman
