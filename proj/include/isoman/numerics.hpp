#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace isoman {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

// Eigen-decomposition with biorthonormal left/right vectors.
// right.col(k) = v_k, left.col(k) = w_k with w_j^T v_k = delta_jk (plain transpose, no conjugation).
struct EigenSystem {
  CVector values;
  CMatrix right;
  CMatrix left;
  // partner[k] = index of the conjugate partner, or k for real eigenvalues
  std::vector<int> partner;
  // smallest singular value of the unit-column right eigenvector matrix
  double min_singular = 0.0;
};

struct EigOptions {
  double min_singular = 1e-10;
  // averaging pass that makes conjugate pairs exact; applied to real input only
  bool pair_conjugates = true;
};

EigenSystem eig(const Matrix& a, const EigOptions& opt = {});
EigenSystem eig(const CMatrix& a, const EigOptions& opt = {});

// Moore-Penrose pseudoinverse; singular values below rank_tol * sigma_max are dropped.
Matrix pinv(const Matrix& a, double rank_tol = 1e-12);
CMatrix pinv(const CMatrix& a, double rank_tol = 1e-12);

struct SolveResult {
  Vector x;
  double condition = 1.0;
};
struct CSolveResult {
  CVector x;
  double condition = 1.0;
};

// 2-norm condition number via singular values.
double condition_number(const Matrix& a);
double condition_number(const CMatrix& a);

// Dense LU solve reporting the estimated 1-norm condition; throws Singular above max_condition.
SolveResult solve(const Matrix& a, const Vector& b, double max_condition = 1e14);
CSolveResult solve(const CMatrix& a, const CVector& b, double max_condition = 1e14);

// Orthonormal basis of the orthogonal complement of the column span of a (N x k, full column rank),
// returned as rows: (N-k) x N.
Matrix complement_rows(const Matrix& a);

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace isoman
