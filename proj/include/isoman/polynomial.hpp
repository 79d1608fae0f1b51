#pragma once

#include "isoman/numerics.hpp"

#include <utility>
#include <vector>

namespace isoman {

// Vector field whose components are finite sums of monomials; exact derivatives of every order.
class PolynomialField {
 public:
  struct Monomial {
    double coef = 0.0;
    std::vector<std::pair<int, int>> powers;  // (variable, exponent), exponent >= 1
  };

  explicit PolynomialField(int dimension);

  void add(int component, double coef, std::vector<std::pair<int, int>> powers = {});

  int dimension() const { return n_; }
  Vector eval(const Vector& x) const;
  Matrix jacobian(const Vector& x) const;
  // N x N^order in Kronecker layout; order >= 1.
  Matrix tensor(const Vector& x, int order) const;
  // adds the tensor contribution into out (N x N^order)
  void accumulate_tensor(const Vector& x, int order, Matrix& out) const;
  int degree() const;

 private:
  int n_;
  std::vector<std::vector<Monomial>> terms_;
};

// Column index of the ordered index tuple (i1, ..., ik) in an N^k Kronecker layout.
long kron_index(const std::vector<int>& tuple, int n);

// Adds value at every distinct permutation of the (sorted) index tuple in row `row`.
void scatter_symmetric(Matrix& out, int row, std::vector<int> sorted_tuple, int n, double value);

}  // namespace isoman
