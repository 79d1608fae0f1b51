#include "isoman/polynomial.hpp"

#include "isoman/error.hpp"

#include <algorithm>
#include <cmath>

namespace isoman {

long kron_index(const std::vector<int>& tuple, int n) {
  long idx = 0;
  for (int i : tuple) idx = idx * n + i;
  return idx;
}

void scatter_symmetric(Matrix& out, int row, std::vector<int> tuple, int n, double value) {
  std::sort(tuple.begin(), tuple.end());
  do {
    out(row, kron_index(tuple, n)) += value;
  } while (std::next_permutation(tuple.begin(), tuple.end()));
}

PolynomialField::PolynomialField(int dimension) : n_(dimension), terms_(dimension) {}

void PolynomialField::add(int component, double coef, std::vector<std::pair<int, int>> powers) {
  if (component < 0 || component >= n_) throw Error(ErrorCode::InvalidArgument, "monomial component out of range");
  for (auto& [v, p] : powers) {
    if (v < 0 || v >= n_ || p < 1) throw Error(ErrorCode::InvalidArgument, "bad monomial factor");
  }
  terms_[component].push_back({coef, std::move(powers)});
}

int PolynomialField::degree() const {
  int d = 0;
  for (const auto& comp : terms_) {
    for (const auto& m : comp) {
      int s = 0;
      for (const auto& f : m.powers) s += f.second;
      d = std::max(d, s);
    }
  }
  return d;
}

Vector PolynomialField::eval(const Vector& x) const {
  Vector out = Vector::Zero(n_);
  for (int j = 0; j < n_; ++j) {
    for (const auto& m : terms_[j]) {
      double v = m.coef;
      for (const auto& [var, p] : m.powers) v *= std::pow(x(var), p);
      out(j) += v;
    }
  }
  return out;
}

Matrix PolynomialField::jacobian(const Vector& x) const { return tensor(x, 1); }

Matrix PolynomialField::tensor(const Vector& x, int order) const {
  long cols = 1;
  for (int k = 0; k < order; ++k) cols *= n_;
  Matrix out = Matrix::Zero(n_, cols);
  accumulate_tensor(x, order, out);
  return out;
}

void PolynomialField::accumulate_tensor(const Vector& x, int order, Matrix& out) const {
  if (order < 1) throw Error(ErrorCode::InvalidArgument, "tensor order must be >= 1");
  for (int j = 0; j < n_; ++j) {
    for (const auto& m : terms_[j]) {
      const int r = static_cast<int>(m.powers.size());
      if (r == 0) continue;
      // enumerate derivative multiplicities d_i <= p_i with sum = order
      std::vector<int> d(r, 0);
      auto emit = [&]() {
        double v = m.coef;
        std::vector<int> tuple;
        for (int i = 0; i < r; ++i) {
          const int p = m.powers[i].second;
          const int var = m.powers[i].first;
          double fall = 1.0;
          for (int q = 0; q < d[i]; ++q) fall *= static_cast<double>(p - q);
          v *= fall * std::pow(x(var), p - d[i]);
          for (int q = 0; q < d[i]; ++q) tuple.push_back(var);
        }
        if (v != 0.0) scatter_symmetric(out, j, tuple, n_, v);
      };
      auto rec = [&](auto&& self, int i, int left) -> void {
        if (i == r - 1) {
          if (left <= m.powers[i].second) {
            d[i] = left;
            emit();
          }
          return;
        }
        for (int c = 0; c <= std::min(left, m.powers[i].second); ++c) {
          d[i] = c;
          self(self, i + 1, left - c);
        }
      };
      rec(rec, 0, order);
    }
  }
}

}  // namespace isoman
