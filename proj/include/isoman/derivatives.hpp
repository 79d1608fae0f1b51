#pragma once

#include "isoman/models.hpp"

#include <vector>

namespace isoman {

struct DerivativeOptions {
  bool allow_fallback = true;
  // relative disagreement allowed between the two finite-difference step sizes
  double fd_tolerance = 1e-3;
  // absolute floor (relative to the largest entry) below which differences are ignored
  double fd_floor = 1e-8;
};

// Tensors f^{(k)} for k = 2..order at x; element k-2 is N x N^k in Kronecker layout.
std::vector<Matrix> derivative_tensors(const Model& model, const Vector& x, int order,
                                       const DerivativeOptions& opt = {});

// Nested central differences of the analytic Jacobian; order >= 2.
Matrix fd_tensor(const Model& model, const Vector& x, int order, double step_scale = 1.0);

// Central-difference Jacobian of the right-hand side.
Matrix fd_jacobian(const Model& model, const Vector& x, double step = 0.0);

}  // namespace isoman
