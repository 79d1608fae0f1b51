#pragma once

#include "isoman/models.hpp"
#include "isoman/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace isoman {

struct Spectrum {
  Vector x0;
  Matrix jacobian;
  CVector lambda;          // ascending |Re|
  CMatrix v;               // right eigenvectors (columns)
  CMatrix w;               // left eigenvectors (columns), w_j^T v_k = delta
  std::vector<int> partner;
  int beta = 0;            // 0 until selected
  double gap_ratio = 0.0;
  std::vector<std::string> warnings;

  int dimension() const { return static_cast<int>(x0.size()); }
  bool is_paired_leader(int k) const { return partner[k] > k; }
  bool is_real_mode(int k) const { return partner[k] == k; }
};


// Newton with halving line search; tolerance defaults to 1e-12 (1 + |x|).
Vector find_fixed_point(const Model& model, const Vector& guess, std::optional<double> newton_tol = std::nullopt,
                        int max_iterations = 30);

Spectrum linearize(const Model& model, const Vector& x0);

// Sets beta (auto: largest decay-rate ratio without splitting a conjugate pair) and gap_ratio.
int select_beta(Spectrum& spectrum, std::optional<int> requested = std::nullopt);

// Convenience: fixed point from the model's default guess, linearization and automatic beta.
Spectrum analyze(const Model& model, std::optional<Vector> guess = std::nullopt, std::optional<int> beta = std::nullopt);

}  // namespace isoman
