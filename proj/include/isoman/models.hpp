#pragma once

#include "isoman/numerics.hpp"

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace isoman {

using ParameterSet = std::map<std::string, double>;

class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual int dimension() const = 0;
  virtual Vector rhs(const Vector& x) const = 0;
  virtual Matrix jacobian(const Vector& x) const = 0;

  // Highest order k for which derivative_tensor is exact; 1 means Jacobian only.
  virtual int analytic_order() const { return 1; }
  // k-th derivative tensor (k >= 2), N x N^k in Kronecker layout.
  virtual Matrix derivative_tensor(const Vector& x, int order) const;

  virtual Vector default_guess() const { return Vector::Zero(dimension()); }
  // state components receiving an external input
  virtual Vector default_channel() const;
  // box used by consistency tests: rows (lower, upper)
  virtual std::pair<Vector, Vector> test_box() const;

  const ParameterSet& parameters() const { return params_; }

 protected:
  ParameterSet params_;
};

using ModelPtr = std::shared_ptr<const Model>;

// Model names: planar, goodwin, pendulum, coupled, linear.
// `matrix` is required for linear and ignored otherwise.
ModelPtr builtin(const std::string& name, const ParameterSet& overrides = {},
                 const std::optional<Matrix>& matrix = std::nullopt);

ModelPtr make_linear(const Matrix& a);

// Declared parameters (with defaults) of a builtin.
ParameterSet builtin_defaults(const std::string& name);

struct InputSignal {
  enum class Kind { Zero, Constant, Sine, Chirp };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;
  double period = 1.0;  // sine
  double c0 = 1.0;      // chirp: omega(t) = 2 pi / (c0 - c1 t)
  double c1 = 0.0;

  static InputSignal zero() { return {}; }
  static InputSignal constant(double c) { return {Kind::Constant, c, 1.0, 1.0, 0.0}; }
  static InputSignal sine(double a, double period) { return {Kind::Sine, a, period, 1.0, 0.0}; }
  static InputSignal chirp(double a, double c0, double c1) { return {Kind::Chirp, a, 1.0, c0, c1}; }

  double operator()(double t) const;
  double omega(double t) const;
  // throws InvalidArgument when the chirp denominator is not positive on [t0, t1]
  void validate(double t0, double t1) const;
};

class ForcedModel {
 public:
  ForcedModel(ModelPtr base, Vector channel, InputSignal signal);

  const Model& base() const { return *base_; }
  ModelPtr base_ptr() const { return base_; }
  const Vector& channel() const { return channel_; }
  const InputSignal& signal() const { return signal_; }
  int dimension() const { return base_->dimension(); }
  Vector rhs(double t, const Vector& x) const;

 private:
  ModelPtr base_;
  Vector channel_;
  InputSignal signal_;
};

}  // namespace isoman
