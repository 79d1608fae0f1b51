#include "isoman/derivatives.hpp"

#include "isoman/error.hpp"

#include <cmath>
#include <limits>

namespace isoman {

namespace {

double fd_step(int order) {
  // eps^{1/3} for one differentiation of the Jacobian, shrinking less aggressively for nested levels
  return std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (order + 1));
}

Matrix nested(const Model& model, const Vector& x, int order, double base) {
  if (order == 1) return model.jacobian(x);
  const int n = model.dimension();
  Matrix lower = nested(model, x, order - 1, base);
  Matrix out(n, lower.cols() * n);
  for (int i = 0; i < n; ++i) {
    double h = base * std::max(1.0, std::abs(x(i)));
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    Matrix d = (nested(model, xp, order - 1, base) - nested(model, xm, order - 1, base)) / (2.0 * h);
    // tuple (i1..i_{k-1}) extended by the new index i as the fastest-varying digit
    for (Eigen::Index c = 0; c < lower.cols(); ++c) out.col(c * n + i) = d.col(c);
  }
  return out;
}

}  // namespace

Matrix fd_tensor(const Model& model, const Vector& x, int order, double step_scale) {
  if (order < 2) throw Error(ErrorCode::InvalidArgument, "finite-difference tensor order must be >= 2");
  return nested(model, x, order, fd_step(order) * step_scale);
}

Matrix fd_jacobian(const Model& model, const Vector& x, double step) {
  const int n = model.dimension();
  Matrix j(n, n);
  double base = step > 0.0 ? step : std::cbrt(std::numeric_limits<double>::epsilon());
  for (int i = 0; i < n; ++i) {
    double h = base * std::max(1.0, std::abs(x(i)));
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    j.col(i) = (model.rhs(xp) - model.rhs(xm)) / (2.0 * h);
  }
  return j;
}

std::vector<Matrix> derivative_tensors(const Model& model, const Vector& x, int order, const DerivativeOptions& opt) {
  if (x.size() != model.dimension()) throw Error(ErrorCode::InvalidArgument, "state dimension mismatch");
  std::vector<Matrix> out;
  for (int k = 2; k <= order; ++k) {
    if (k <= model.analytic_order()) {
      out.push_back(model.derivative_tensor(x, k));
      continue;
    }
    if (!opt.allow_fallback) {
      throw Error(ErrorCode::OrderUnavailable, "analytic derivative tensor unavailable and fallback disabled",
                  {{"model", model.name()}, {"order", k}, {"analytic_order", model.analytic_order()}});
    }
    Matrix fine = fd_tensor(model, x, k, 1.0);
    Matrix coarse = fd_tensor(model, x, k, 2.0);
    double scale = std::max(fine.cwiseAbs().maxCoeff(), 1e-300);
    double diff = (fine - coarse).cwiseAbs().maxCoeff();
    if (diff > opt.fd_tolerance * scale && diff > opt.fd_floor * std::max(1.0, scale)) {
      throw Error(ErrorCode::FDUnreliable, "finite-difference tensor disagrees between step sizes",
                  {{"order", k}, {"difference", diff}, {"scale", scale}, {"tolerance", opt.fd_tolerance}});
    }
    out.push_back(fine);
  }
  return out;
}

}  // namespace isoman
