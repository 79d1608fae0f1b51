#include "isoman/spectrum.hpp"

#include "isoman/error.hpp"

#include <cmath>

namespace isoman {

Vector find_fixed_point(const Model& model, const Vector& guess, std::optional<double> newton_tol,
                        int max_iterations) {
  if (guess.size() != model.dimension()) throw Error(ErrorCode::InvalidArgument, "guess dimension mismatch");
  if (!guess.allFinite()) throw Error(ErrorCode::NonFinite, "guess has non-finite entries");
  Vector x = guess;
  Vector f = model.rhs(x);
  auto tol_at = [&](const Vector& y) { return newton_tol ? *newton_tol : 1e-12 * (1.0 + y.norm()); };
  int it = 0;
  while (f.lpNorm<Eigen::Infinity>() > tol_at(x)) {
    if (it++ >= max_iterations) {
      throw Error(ErrorCode::NoConvergence, "Newton iteration cap reached",
                  {{"iterations", max_iterations}, {"residual", f.lpNorm<Eigen::Infinity>()}});
    }
    Matrix j = model.jacobian(x);
    Vector dx = j.fullPivLu().solve(-f);
    if (!dx.allFinite()) throw Error(ErrorCode::NoConvergence, "singular Jacobian during Newton iteration");
    double step = 1.0;
    double fn = f.norm();
    Vector xn = x + dx;
    Vector fnew = model.rhs(xn);
    for (int h = 0; h < 30 && !(fnew.allFinite() && fnew.norm() < fn); ++h) {
      step *= 0.5;
      xn = x + step * dx;
      fnew = model.rhs(xn);
    }
    if (!fnew.allFinite()) throw Error(ErrorCode::NonFinite, "Newton iterate left the model's domain");
    x = xn;
    f = fnew;
  }
  Spectrum s = linearize(model, x);
  for (Eigen::Index k = 0; k < s.lambda.size(); ++k) {
    if (!(s.lambda(k).real() < 0.0)) {
      throw Error(ErrorCode::UnstableFixedPoint, "fixed point is not linearly stable",
                  {{"eigenvalue", {s.lambda(k).real(), s.lambda(k).imag()}}});
    }
  }
  return x;
}

Spectrum linearize(const Model& model, const Vector& x0) {
  Spectrum s;
  s.x0 = x0;
  s.jacobian = model.jacobian(x0);
  EigenSystem es = eig(s.jacobian);
  s.lambda = es.values;
  s.v = es.right;
  s.w = es.left;
  s.partner = es.partner;
  return s;
}

int select_beta(Spectrum& s, std::optional<int> requested) {
  const int n = static_cast<int>(s.lambda.size());
  auto admissible = [&](int b) {
    // the last slow mode must not have its partner on the fast side
    for (int k = 0; k < b; ++k) {
      if (s.partner[k] >= b) return false;
    }
    return true;
  };
  auto ratio = [&](int b) { return std::abs(s.lambda(b).real()) / std::abs(s.lambda(b - 1).real()); };
  if (requested) {
    int b = *requested;
    if (b < 1 || b >= n) throw Error(ErrorCode::OutOfRange, "beta must satisfy 1 <= beta < N", {{"beta", b}, {"N", n}});
    if (!admissible(b)) throw Error(ErrorCode::PairSplit, "beta splits a conjugate pair", {{"beta", b}});
    s.beta = b;
  } else {
    int best = 0;
    double best_ratio = -1.0;
    for (int b = 1; b < n; ++b) {
      if (!admissible(b)) continue;
      double r = ratio(b);
      if (r > best_ratio * (1.0 + 1e-12)) {
        best_ratio = r;
        best = b;
      }
    }
    if (best == 0) throw Error(ErrorCode::OutOfRange, "no admissible slow-mode count");
    s.beta = best;
  }
  s.gap_ratio = ratio(s.beta);
  if (s.gap_ratio < 2.0) {
    s.warnings.push_back("spectral gap ratio " + std::to_string(s.gap_ratio) + " is below 2");
  }
  return s.beta;
}

Spectrum analyze(const Model& model, std::optional<Vector> guess, std::optional<int> beta) {
  Vector x0 = find_fixed_point(model, guess ? *guess : model.default_guess());
  Spectrum s = linearize(model, x0);
  select_beta(s, beta);
  return s;
}

}  // namespace isoman
