#include "isoman/models.hpp"

#include "isoman/error.hpp"
#include "isoman/polynomial.hpp"

#include <cmath>
#include <numbers>

namespace isoman {

Matrix Model::derivative_tensor(const Vector&, int order) const {
  throw Error(ErrorCode::OrderUnavailable, "model provides no analytic derivative tensor of this order",
              {{"model", name()}, {"order", order}, {"analytic_order", analytic_order()}});
}

Vector Model::default_channel() const {
  Vector b = Vector::Zero(dimension());
  b(0) = 1.0;
  return b;
}

std::pair<Vector, Vector> Model::test_box() const {
  return {Vector::Constant(dimension(), -1.0), Vector::Constant(dimension(), 1.0)};
}

namespace {

constexpr int kUnlimited = std::numeric_limits<int>::max();

long power_of(int n, int k) {
  long p = 1;
  for (int i = 0; i < k; ++i) p *= n;
  return p;
}

long diagonal_index(int i, int n, int k) {
  long idx = 0;
  for (int q = 0; q < k; ++q) idx = idx * n + i;
  return idx;
}

// Models whose nonlinearity is fully polynomial.
class PolynomialModel : public Model {
 public:
  PolynomialModel(std::string name, PolynomialField field) : name_(std::move(name)), field_(std::move(field)) {}
  std::string name() const override { return name_; }
  int dimension() const override { return field_.dimension(); }
  Vector rhs(const Vector& x) const override { return field_.eval(x); }
  Matrix jacobian(const Vector& x) const override { return field_.jacobian(x); }
  int analytic_order() const override { return kUnlimited; }
  Matrix derivative_tensor(const Vector& x, int order) const override { return field_.tensor(x, order); }

 protected:
  std::string name_;
  PolynomialField field_;
};

class PlanarModel final : public PolynomialModel {
 public:
  explicit PlanarModel(const ParameterSet& p) : PolynomialModel("planar", build(p)) { params_ = p; }
  Vector default_guess() const override { return Vector::Constant(2, 0.5); }
  Vector default_channel() const override { return (Vector(2) << 0.0, 1.0).finished(); }
  std::pair<Vector, Vector> test_box() const override {
    return {Vector::Constant(2, -1.5), Vector::Constant(2, 1.5)};
  }

 private:
  static PolynomialField build(const ParameterSet& p) {
    PolynomialField f(2);
    f.add(0, -p.at("rate"), {{0, 1}});
    f.add(1, -1.0, {{1, 1}});
    f.add(1, 1.0, {{0, 4}});
    f.add(1, -2.0, {{0, 2}});
    return f;
  }
};

class LinearModel final : public PolynomialModel {
 public:
  explicit LinearModel(const Matrix& a) : PolynomialModel("linear", build(a)), a_(a) {}
  Matrix jacobian(const Vector&) const override { return a_; }
  Vector rhs(const Vector& x) const override { return a_ * x; }

 private:
  static PolynomialField build(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0 || !a.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "linear model needs a finite square matrix");
    }
    PolynomialField f(static_cast<int>(a.rows()));
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < a.cols(); ++j) {
        if (a(i, j) != 0.0) f.add(i, a(i, j), {{j, 1}});
      }
    }
    return f;
  }
  Matrix a_;
};

class CoupledModel final : public PolynomialModel {
 public:
  explicit CoupledModel(const ParameterSet& p) : PolynomialModel("coupled", build(p)) { params_ = p; }
  Vector default_channel() const override {
    Vector b = Vector::Zero(dimension());
    for (int j = 0; j < dimension(); j += 2) b(j) = 1.0;
    return b;
  }

 private:
  static PolynomialField build(const ParameterSet& p) {
    double nd = p.at("N");
    if (!(nd >= 1.0) || nd != std::floor(nd) || nd > 500) {
      throw Error(ErrorCode::InvalidArgument, "coupled model needs an integer oscillator count N >= 1", {{"N", nd}});
    }
    const int n = static_cast<int>(nd);
    const double k = p.at("K"), mu = p.at("mu"), sig = p.at("sigma");
    PolynomialField f(2 * n);
    for (int j = 0; j < n; ++j) {
      const double rho = p.at("rho0") + p.at("rho_step") * j;
      const int x = 2 * j, y = 2 * j + 1;
      // x_j: sigma x (mu - r^2) - y (1 + rho (r^2 - mu)) + K/N sum_{i != j} x_i
      f.add(x, sig * mu, {{x, 1}});
      f.add(x, -sig, {{x, 3}});
      f.add(x, -sig, {{x, 1}, {y, 2}});
      f.add(x, -(1.0 - rho * mu), {{y, 1}});
      f.add(x, -rho, {{x, 2}, {y, 1}});
      f.add(x, -rho, {{y, 3}});
      for (int i = 0; i < n; ++i) {
        if (i != j) f.add(x, k / n, {{2 * i, 1}});
      }
      // y_j: sigma y (mu - r^2) + x (1 + rho (r^2 - mu))
      f.add(y, sig * mu, {{y, 1}});
      f.add(y, -sig, {{x, 2}, {y, 1}});
      f.add(y, -sig, {{y, 3}});
      f.add(y, 1.0 - rho * mu, {{x, 1}});
      f.add(y, rho, {{x, 3}});
      f.add(y, rho, {{x, 1}, {y, 2}});
    }
    return f;
  }
};

class PendulumModel final : public Model {
 public:
  explicit PendulumModel(const ParameterSet& p) : poly_(3) {
    params_ = p;
    const double a = p.at("alpha"), b = p.at("beta"), g = p.at("gamma"), k = p.at("kappa");
    poly_.add(0, 1.0, {{1, 1}});
    poly_.add(1, -a, {{0, 1}});
    poly_.add(1, -b, {{1, 1}});
    poly_.add(1, -g, {{1, 1}, {2, 1}});
    poly_.add(2, -k, {{2, 1}});
    poly_.add(2, k, {{0, 2}});
    poly_.add(2, k, {{1, 2}});
  }
  std::string name() const override { return "pendulum"; }
  int dimension() const override { return 3; }
  Vector rhs(const Vector& x) const override {
    Vector f = poly_.eval(x);
    f(1) -= std::sin(x(0));
    return f;
  }
  Matrix jacobian(const Vector& x) const override {
    Matrix j = poly_.jacobian(x);
    j(1, 0) -= std::cos(x(0));
    return j;
  }
  int analytic_order() const override { return kUnlimited; }
  Matrix derivative_tensor(const Vector& x, int order) const override {
    Matrix t = poly_.tensor(x, order);
    // d^k/dx^k (-sin x) = -sin(x + k pi/2)
    t(1, diagonal_index(0, 3, order)) -= std::sin(x(0) + order * std::numbers::pi / 2.0);
    return t;
  }
  Vector default_channel() const override { return (Vector(3) << 0.0, 1.0, 0.0).finished(); }

 private:
  PolynomialField poly_;
};

// derivatives 0..order of h K^n / (K^n + D^n) at D via Taylor-series arithmetic
std::vector<double> hill_derivatives(double d, double h, double kk, double n, int order) {
  std::vector<double> num(order + 1, 0.0);
  // (d + s)^n = d^n sum_m binom(n, m) (s/d)^m
  double coef = std::pow(d, n);
  for (int m = 0; m <= order; ++m) {
    num[m] = coef;
    coef *= (n - m) / ((m + 1) * d);
  }
  const double kn = std::pow(kk, n);
  std::vector<double> den = num;
  den[0] += kn;
  std::vector<double> rec(order + 1, 0.0);
  rec[0] = 1.0 / den[0];
  for (int m = 1; m <= order; ++m) {
    double acc = 0.0;
    for (int i = 1; i <= m; ++i) acc += den[i] * rec[m - i];
    rec[m] = -acc / den[0];
  }
  std::vector<double> out(order + 1);
  double fact = 1.0;
  for (int m = 0; m <= order; ++m) {
    if (m > 0) fact *= m;
    out[m] = h * kn * rec[m] * fact;
  }
  return out;
}

// derivatives 0..order of h y / (K + y)
std::vector<double> mm_derivatives(double y, double h, double kk, int order) {
  std::vector<double> out(order + 1);
  out[0] = h * y / (kk + y);
  double fact = 1.0;
  for (int m = 1; m <= order; ++m) {
    fact *= m;
    double sign = (m % 2 == 1) ? 1.0 : -1.0;
    out[m] = h * kk * sign * fact / std::pow(kk + y, m + 1);
  }
  return out;
}

class GoodwinModel final : public Model {
 public:
  explicit GoodwinModel(const ParameterSet& p) { params_ = p; }
  std::string name() const override { return "goodwin"; }
  int dimension() const override { return 3; }
  Vector rhs(const Vector& x) const override {
    const auto& p = params_;
    Vector f(3);
    f(0) = hill_derivatives(x(2), p.at("h1"), p.at("K1"), p.at("n"), 0)[0] -
           mm_derivatives(x(0), p.at("h2"), p.at("K2"), 0)[0] + p.at("alpha");
    f(1) = p.at("h3") * x(0) - mm_derivatives(x(1), p.at("h4"), p.at("K4"), 0)[0];
    f(2) = p.at("h5") * x(1) - mm_derivatives(x(2), p.at("h6"), p.at("K6"), 0)[0];
    return f;
  }
  Matrix jacobian(const Vector& x) const override {
    const auto& p = params_;
    Matrix j = Matrix::Zero(3, 3);
    j(0, 0) = -mm_derivatives(x(0), p.at("h2"), p.at("K2"), 1)[1];
    j(0, 2) = hill_derivatives(x(2), p.at("h1"), p.at("K1"), p.at("n"), 1)[1];
    j(1, 0) = p.at("h3");
    j(1, 1) = -mm_derivatives(x(1), p.at("h4"), p.at("K4"), 1)[1];
    j(2, 1) = p.at("h5");
    j(2, 2) = -mm_derivatives(x(2), p.at("h6"), p.at("K6"), 1)[1];
    return j;
  }
  int analytic_order() const override { return kUnlimited; }
  Matrix derivative_tensor(const Vector& x, int order) const override {
    if (order < 2) return jacobian(x);
    const auto& p = params_;
    Matrix t = Matrix::Zero(3, power_of(3, order));
    t(0, diagonal_index(2, 3, order)) = hill_derivatives(x(2), p.at("h1"), p.at("K1"), p.at("n"), order)[order];
    t(0, diagonal_index(0, 3, order)) = -mm_derivatives(x(0), p.at("h2"), p.at("K2"), order)[order];
    t(1, diagonal_index(1, 3, order)) = -mm_derivatives(x(1), p.at("h4"), p.at("K4"), order)[order];
    t(2, diagonal_index(2, 3, order)) = -mm_derivatives(x(2), p.at("h6"), p.at("K6"), order)[order];
    return t;
  }
  Vector default_guess() const override { return (Vector(3) << 0.1, 0.3, 1.8).finished(); }
  std::pair<Vector, Vector> test_box() const override {
    return {(Vector(3) << 0.05, 0.1, 0.5).finished(), (Vector(3) << 0.6, 1.0, 3.0).finished()};
  }
};

ParameterSet merge(const std::string& name, ParameterSet defaults, const ParameterSet& overrides) {
  for (const auto& [k, v] : overrides) {
    auto it = defaults.find(k);
    if (it == defaults.end()) {
      throw Error(ErrorCode::UnknownParameter, "parameter '" + k + "' is not declared by model '" + name + "'",
                  {{"model", name}, {"parameter", k}});
    }
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "parameter '" + k + "' is not finite");
    it->second = v;
  }
  return defaults;
}

}  // namespace

ParameterSet builtin_defaults(const std::string& name) {
  if (name == "planar") return {{"rate", 0.05}};
  if (name == "goodwin") {
    return {{"n", 6.0},   {"h1", 0.84}, {"h2", 0.42}, {"h3", 0.7}, {"h4", 0.35}, {"h5", 0.7},
            {"h6", 0.35}, {"K1", 1.0},  {"K2", 1.0},  {"K4", 1.0}, {"K6", 1.0},  {"alpha", 0.025}};
  }
  if (name == "pendulum") return {{"alpha", 0.23}, {"beta", 0.1}, {"gamma", 0.01}, {"kappa", 8.0}};
  if (name == "coupled") {
    return {{"N", 10.0}, {"K", 1.54}, {"mu", -4.5}, {"sigma", 0.05}, {"rho0", -0.2}, {"rho_step", 4.0 / 90.0}};
  }
  if (name == "linear") return {};
  throw Error(ErrorCode::UnknownModel, "unknown model '" + name + "'",
              {{"model", name}, {"known", {"planar", "goodwin", "pendulum", "coupled", "linear"}}});
}

ModelPtr make_linear(const Matrix& a) { return std::make_shared<LinearModel>(a); }

ModelPtr builtin(const std::string& name, const ParameterSet& overrides, const std::optional<Matrix>& matrix) {
  ParameterSet p = merge(name, builtin_defaults(name), overrides);
  if (name == "planar") return std::make_shared<PlanarModel>(p);
  if (name == "goodwin") return std::make_shared<GoodwinModel>(p);
  if (name == "pendulum") return std::make_shared<PendulumModel>(p);
  if (name == "coupled") return std::make_shared<CoupledModel>(p);
  if (!matrix) throw Error(ErrorCode::InvalidArgument, "linear model requires a matrix");
  return make_linear(*matrix);
}

double InputSignal::omega(double t) const {
  switch (kind) {
    case Kind::Sine: return 2.0 * std::numbers::pi / period;
    case Kind::Chirp: return 2.0 * std::numbers::pi / (c0 - c1 * t);
    default: return 0.0;
  }
}

double InputSignal::operator()(double t) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return amplitude;
    case Kind::Sine:
    case Kind::Chirp: return amplitude * std::sin(omega(t) * t);
  }
  return 0.0;
}

void InputSignal::validate(double t0, double t1) const {
  if (kind == Kind::Sine && !(period > 0.0)) throw Error(ErrorCode::InvalidArgument, "sine period must be positive");
  if (kind == Kind::Chirp) {
    double lo = std::min(c0 - c1 * t0, c0 - c1 * t1);
    if (!(lo > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "chirp denominator must stay positive over the span",
                  {{"c0", c0}, {"c1", c1}, {"t0", t0}, {"t1", t1}});
    }
  }
}

ForcedModel::ForcedModel(ModelPtr base, Vector channel, InputSignal signal)
    : base_(std::move(base)), channel_(std::move(channel)), signal_(signal) {
  if (!base_) throw Error(ErrorCode::InvalidArgument, "forced model needs a base model");
  if (channel_.size() != base_->dimension()) {
    throw Error(ErrorCode::InvalidArgument, "input channel length must match the model dimension",
                {{"channel", channel_.size()}, {"dimension", base_->dimension()}});
  }
}

Vector ForcedModel::rhs(double t, const Vector& x) const {
  Vector f = base_->rhs(x);
  double u = signal_(t);
  if (u != 0.0) f += u * channel_;
  return f;
}

}  // namespace isoman
