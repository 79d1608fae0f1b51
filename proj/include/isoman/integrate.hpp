#pragma once

#include "isoman/error.hpp"
#include "isoman/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace isoman {

enum class IntegratorMethod { RK4, DOPRI5 };

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::DOPRI5;
  double step = 1e-2;  // fixed step (RK4) or initial step (DOPRI5)
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  long max_steps = 20'000'000;
  double max_step = std::numeric_limits<double>::infinity();
  double blowup_norm = 1e8;

  void validate() const {
    if (!(step > 0.0) || !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_steps <= 0 || !(max_step > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "integrator config requires positive step, tolerances and step cap");
    }
  }
};

template <class V>
struct Sampled {
  std::vector<double> times;
  std::vector<V> states;
};

// Accepted-step record; rates are the right-hand side at each sample.
template <class V>
struct Path {
  std::vector<double> times;
  std::vector<V> states;
  std::vector<V> rates;
  bool stopped = false;  // stop predicate fired before t_end
};

namespace detail {

template <class V>
void check_state(const V& x, double t, double bound) {
  if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "integration produced non-finite state", {{"t", t}});
  double n = x.template lpNorm<Eigen::Infinity>();
  if (n > bound) throw Error(ErrorCode::BlowUp, "state norm exceeded bound", {{"t", t}, {"norm", n}, {"bound", bound}});
}

template <class V>
double error_norm(const V& err, const V& y0, const V& y1, double atol, double rtol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    double sk = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    double r = std::abs(err(i)) / sk;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, err.size())));
}

// Dormand-Prince 5(4) stepper with FSAL and PI step-size control.
template <class V, class F>
class Dopri5 {
 public:
  Dopri5(F& f, const IntegratorConfig& cfg) : f_(f), cfg_(cfg) {}

  // Attempts steps from (t, y, k1) until one is accepted; the step never exceeds h_max.
  // On return t, y, k1 are advanced and h holds the proposal for the next step.
  void step(double& t, V& y, V& k1, double& h, double h_max, long& counter) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    for (;;) {
      if (++counter > cfg_.max_steps) {
        throw Error(ErrorCode::StepLimitExceeded, "step limit exceeded", {{"t", t}, {"max_steps", cfg_.max_steps}});
      }
      double hh = std::min({h, h_max, cfg_.max_step});
      V k2 = f_(t + c2 * hh, V(y + hh * a21 * k1));
      V k3 = f_(t + c3 * hh, V(y + hh * (a31 * k1 + a32 * k2)));
      V k4 = f_(t + c4 * hh, V(y + hh * (a41 * k1 + a42 * k2 + a43 * k3)));
      V k5 = f_(t + c5 * hh, V(y + hh * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
      V k6 = f_(t + hh, V(y + hh * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
      V y1 = y + hh * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      V k7 = f_(t + hh, y1);
      V err = hh * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double en = error_norm(err, y, y1, cfg_.abs_tol, cfg_.rel_tol);
      if (!std::isfinite(en)) en = 1e10;
      // PI controller
      constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9, facc1 = 5.0, facc2 = 0.1;
      double fac11 = std::pow(std::max(en, 1e-300), expo1);
      if (en <= 1.0) {
        double fac = fac11 / std::pow(facold_, beta);
        fac = std::clamp(fac / safe, facc2, facc1);
        facold_ = std::max(en, 1e-4);
        t += hh;
        y = std::move(y1);
        k1 = std::move(k7);
        h = hh / fac;
        if (reject_) h = std::min(h, hh);
        reject_ = false;
        check_state(y, t, cfg_.blowup_norm);
        return;
      }
      reject_ = true;
      h = hh / std::min(facc1, fac11 / safe);
      if (!(h > 1e-14 * std::max(1.0, std::abs(t)))) {
        throw Error(ErrorCode::StepLimitExceeded, "step size underflow", {{"t", t}, {"h", h}});
      }
    }
  }

 private:
  F& f_;
  const IntegratorConfig& cfg_;
  double facold_ = 1e-4;
  bool reject_ = false;
};

}  // namespace detail

template <class V, class F>
V rk4_step(F& f, double t, const V& x, double h) {
  V k1 = f(t, x);
  V k2 = f(t + 0.5 * h, V(x + 0.5 * h * k1));
  V k3 = f(t + 0.5 * h, V(x + 0.5 * h * k2));
  V k4 = f(t + h, V(x + h * k3));
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Cubic Hermite interpolation between two samples with known rates.
template <class V>
V hermite(double t0, const V& x0, const V& f0, double t1, const V& x1, const V& f1, double t) {
  double h = t1 - t0;
  double s = (t - t0) / h;
  double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  double h10 = s * (1 - s) * (1 - s);
  double h01 = s * s * (3 - 2 * s);
  double h11 = s * s * (s - 1);
  return h00 * x0 + (h10 * h) * f0 + h01 * x1 + (h11 * h) * f1;
}

// Integrates x' = f(t, x) and returns the states at the (non-decreasing) grid times.
// grid[0] is the initial time. Steps are clipped to land on every grid point.
template <class V, class F>
Sampled<V> integrate(F&& f, const V& x0, const std::vector<double>& grid, const IntegratorConfig& cfg) {
  cfg.validate();
  if (grid.empty()) throw Error(ErrorCode::GridMismatch, "empty output grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] >= grid[i - 1])) throw Error(ErrorCode::GridMismatch, "output grid must be non-decreasing");
  }
  detail::check_state(x0, grid.front(), cfg.blowup_norm);
  Sampled<V> out;
  out.times = grid;
  out.states.reserve(grid.size());
  out.states.push_back(x0);
  V y = x0;
  double t = grid.front();
  long counter = 0;
  if (cfg.method == IntegratorMethod::RK4) {
    for (std::size_t i = 1; i < grid.size(); ++i) {
      double span = grid[i] - t;
      if (span > 0.0) {
        long n = std::max(1L, static_cast<long>(std::ceil(span / cfg.step - 1e-9)));
        double h = span / static_cast<double>(n);
        for (long s = 0; s < n; ++s) {
          if (++counter > cfg.max_steps) throw Error(ErrorCode::StepLimitExceeded, "step limit exceeded", {{"t", t}});
          y = rk4_step<V>(f, t, y, h);
          t = grid[i - 1] + static_cast<double>(s + 1) * h;
          detail::check_state(y, t, cfg.blowup_norm);
        }
      }
      t = grid[i];
      out.states.push_back(y);
    }
    return out;
  }
  detail::Dopri5<V, std::remove_reference_t<F>> stepper(f, cfg);
  V k1 = f(t, y);
  double h = cfg.step;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    while (t < grid[i]) {
      double remaining = grid[i] - t;
      if (remaining <= 1e-13 * std::max(1.0, std::abs(grid[i]))) break;
      double proposal = h;
      bool clipped = proposal >= remaining;
      stepper.step(t, y, k1, h, remaining, counter);
      if (clipped && t >= grid[i] - 1e-13 * std::max(1.0, std::abs(grid[i]))) {
        t = grid[i];
        h = std::max(h, proposal);
      }
    }
    t = grid[i];
    out.states.push_back(y);
  }
  return out;
}

// Integrates from t0 toward t_end, recording every accepted step, until stop(t, x) returns true.
// When the predicate fires the final sample is the first accepted state satisfying it.
template <class V, class F, class S>
Path<V> integrate_until(F&& f, const V& x0, double t0, double t_end, const IntegratorConfig& cfg, S&& stop) {
  cfg.validate();
  detail::check_state(x0, t0, cfg.blowup_norm);
  Path<V> out;
  V y = x0;
  double t = t0;
  V k1 = f(t, y);
  out.times.push_back(t);
  out.states.push_back(y);
  out.rates.push_back(k1);
  if (stop(t, y)) {
    out.stopped = true;
    return out;
  }
  long counter = 0;
  detail::Dopri5<V, std::remove_reference_t<F>> stepper(f, cfg);
  double h = cfg.step;
  while (t < t_end) {
    double remaining = t_end - t;
    if (remaining <= 1e-13 * std::max(1.0, std::abs(t_end))) break;
    if (cfg.method == IntegratorMethod::RK4) {
      if (++counter > cfg.max_steps) throw Error(ErrorCode::StepLimitExceeded, "step limit exceeded", {{"t", t}});
      double hh = std::min(cfg.step, remaining);
      y = rk4_step<V>(f, t, y, hh);
      t = (hh == remaining) ? t_end : t + hh;
      detail::check_state(y, t, cfg.blowup_norm);
      k1 = f(t, y);
    } else {
      stepper.step(t, y, k1, h, remaining, counter);
      if (t_end - t <= 1e-13 * std::max(1.0, std::abs(t_end))) t = t_end;
    }
    out.times.push_back(t);
    out.states.push_back(y);
    out.rates.push_back(k1);
    if (stop(t, y)) {
      out.stopped = true;
      return out;
    }
  }
  return out;
}

}  // namespace isoman
