#pragma once

#include "isoman/derivatives.hpp"
#include "isoman/spectrum.hpp"

#include <json.hpp>

#include <limits>
#include <map>
#include <vector>

namespace isoman {

// Sorted ascending mode indices (0-based), e.g. {0, 0} for the second-order self term of mode 0.
using MultiIndex = std::vector<int>;

struct ExpansionOptions {
  int modes = 0;                  // number of leading modes in the series; 0 selects beta
  double resonance_cond = 1e12;   // shifted-matrix condition that counts as resonant
  int max_order = 8;
  double memory_cap_bytes = 4e9;
  double validity_radius = std::numeric_limits<double>::infinity();
};

struct ExpansionTensors {
  int order = 0;
  int modes = 0;
  Vector x0;
  CVector lambda;            // eigenvalues of the expansion modes
  std::vector<int> partner;  // conjugate partner within the expansion modes
  double validity_radius = std::numeric_limits<double>::infinity();
  // keyed by exponent vector (length `modes`); includes order-1 entries v_k
  std::map<std::vector<int>, CVector> coeffs;

  int dimension() const { return static_cast<int>(x0.size()); }
  const CVector& coefficient(const MultiIndex& idx) const;
  std::vector<int> exponents(const MultiIndex& idx) const;
};

std::vector<int> to_exponents(const MultiIndex& idx, int modes);
MultiIndex to_multi_index(const std::vector<int>& exponents);

// Solves (J - sum(lambda) Id) h = -q order by order from tensors f^{(2)}..f^{(M)} at x0.
ExpansionTensors solve_expansion(const Spectrum& spectrum, const std::vector<Matrix>& tensors, int order,
                                 const ExpansionOptions& opt = {});
ExpansionTensors solve_expansion(const Model& model, const Spectrum& spectrum, int order,
                                 const ExpansionOptions& opt = {}, const DerivativeOptions& dopt = {});

struct Reconstruction {
  Vector x;
  double imag_residue = 0.0;
  bool outside_validity = false;
};

// x0 + sum psi^alpha h^alpha up to `order` (default: all); psi may list only the first beta modes.
Reconstruction reconstruct_state(const ExpansionTensors& exp, const CVector& psi, int order = -1);

// Complex series sum without taking the real part.
CVector series_sum(const ExpansionTensors& exp, const CVector& psi, int order = -1);

// dx/dpsi_j of the series up to `order`.
CVector g_series(const ExpansionTensors& exp, const CVector& psi, int j, int order = -1);

nlohmann::json to_json(const ExpansionTensors& exp);
ExpansionTensors expansion_from_json(const nlohmann::json& j);

}  // namespace isoman
