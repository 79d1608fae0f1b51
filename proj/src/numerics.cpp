#include "isoman/numerics.hpp"

#include "isoman/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace isoman {

namespace {

void require_square_finite(const CMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " requires a square matrix",
                {{"rows", a.rows()}, {"cols", a.cols()}});
  }
  if (!a.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + " input has non-finite entries");
}

// unit 2-norm, largest-magnitude component real positive
void normalize_phase(Eigen::Ref<CVector> v) {
  double n = v.norm();
  if (n == 0.0) return;
  v /= n;
  double best = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) best = std::max(best, std::abs(v(i)));
  // first index within roundoff of the maximum keeps conjugate vectors on the same pivot
  Eigen::Index pivot = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) >= best * (1.0 - 1e-10)) {
      pivot = i;
      break;
    }
  }
  Complex phase = std::conj(v(pivot)) / std::abs(v(pivot));
  v *= phase;
  v(pivot) = Complex(v(pivot).real(), 0.0);
}

bool key_less(const Complex& a, const Complex& b) {
  double ra = std::abs(a.real());
  double rb = std::abs(b.real());
  double tol = 1e-10 * (1.0 + std::max(ra, rb));
  if (std::abs(ra - rb) > tol) return ra < rb;
  return a.imag() < b.imag();
}

EigenSystem finish(CVector values, CMatrix vecs, bool real_input, const EigOptions& opt) {
  const Eigen::Index n = values.size();
  for (Eigen::Index k = 0; k < n; ++k) normalize_phase(vecs.col(k));

  std::vector<int> partner(n);
  std::iota(partner.begin(), partner.end(), 0);
  if (real_input && opt.pair_conjugates) {
    std::vector<bool> done(n, false);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (done[k]) continue;
      double tol = 1e-9 * (1.0 + std::abs(values(k)));
      if (std::abs(values(k).imag()) <= tol) {
        values(k) = Complex(values(k).real(), 0.0);
        CVector re = vecs.col(k).real().cast<Complex>();
        vecs.col(k) = re;
        normalize_phase(vecs.col(k));
        done[k] = true;
        continue;
      }
      Eigen::Index best = -1;
      double best_dist = 0.0;
      for (Eigen::Index p = 0; p < n; ++p) {
        if (p == k || done[p]) continue;
        double d = std::abs(values(p) - std::conj(values(k)));
        if (best < 0 || d < best_dist) {
          best = p;
          best_dist = d;
        }
      }
      done[k] = true;
      if (best < 0 || best_dist > 1e-6 * (1.0 + std::abs(values(k)))) continue;
      done[best] = true;
      Complex lam = 0.5 * (values(k) + std::conj(values(best)));
      CVector v = 0.5 * (vecs.col(k) + vecs.col(best).conjugate());
      normalize_phase(v);
      values(k) = lam;
      values(best) = std::conj(lam);
      vecs.col(k) = v;
      vecs.col(best) = v.conjugate();
    }
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return key_less(values(a), values(b)); });

  EigenSystem es;
  es.values.resize(n);
  es.right.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    es.values(k) = values(order[k]);
    es.right.col(k) = vecs.col(order[k]);
  }

  Eigen::JacobiSVD<CMatrix> svd(es.right);
  es.min_singular = svd.singularValues()(n - 1);
  if (!(es.min_singular > opt.min_singular)) {
    throw Error(ErrorCode::NonDiagonalizable, "eigenvector matrix is numerically singular",
                {{"min_singular", es.min_singular}, {"threshold", opt.min_singular}});
  }
  es.left = es.right.partialPivLu().inverse().transpose();

  es.partner.assign(n, 0);
  for (Eigen::Index k = 0; k < n; ++k) es.partner[k] = static_cast<int>(k);
  if (real_input && opt.pair_conjugates) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (es.values(k).imag() == 0.0) continue;
      for (Eigen::Index p = 0; p < n; ++p) {
        if (p != k && es.values(p) == std::conj(es.values(k))) {
          es.partner[k] = static_cast<int>(p);
          break;
        }
      }
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      int p = es.partner[k];
      if (p > k) {
        CVector w = 0.5 * (es.left.col(k) + es.left.col(p).conjugate());
        es.left.col(k) = w;
        es.left.col(p) = w.conjugate();
      } else if (p == k) {
        CVector re = es.left.col(k).real().cast<Complex>();
        es.left.col(k) = re;
      }
    }
  }
  return es;
}

}  // namespace

EigenSystem eig(const Matrix& a, const EigOptions& opt) {
  require_square_finite(a.cast<Complex>(), "eig");
  Eigen::EigenSolver<Matrix> solver(a, true);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::NonDiagonalizable, "eigen solver failed");
  return finish(solver.eigenvalues(), solver.eigenvectors(), true, opt);
}

EigenSystem eig(const CMatrix& a, const EigOptions& opt) {
  require_square_finite(a, "eig");
  Eigen::ComplexEigenSolver<CMatrix> solver(a, true);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::NonDiagonalizable, "eigen solver failed");
  return finish(solver.eigenvalues(), solver.eigenvectors(), false, opt);
}

namespace {
template <class M>
M pinv_impl(const M& a, double rank_tol) {
  if (!a.allFinite()) throw Error(ErrorCode::NonFinite, "pinv input has non-finite entries");
  if (a.size() == 0) return M::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<M> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  double cut = rank_tol * (s.size() > 0 ? s(0) : 0.0);
  M out = M::Zero(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut && s(i) > 0.0) out += svd.matrixV().col(i) * (1.0 / s(i)) * svd.matrixU().col(i).adjoint();
  }
  return out;
}

template <class M>
double cond_impl(const M& a) {
  if (a.size() == 0) return 1.0;
  Eigen::JacobiSVD<M> svd(a);
  const auto& s = svd.singularValues();
  double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

template <class M, class V>
V solve_impl(const M& a, const V& b, double max_condition, double& cond) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    throw Error(ErrorCode::InvalidArgument, "solve dimension mismatch", {{"rows", a.rows()}, {"rhs", b.size()}});
  }
  if (!a.allFinite() || !b.allFinite()) throw Error(ErrorCode::NonFinite, "solve input has non-finite entries");
  auto lu = a.partialPivLu();
  const double rc = lu.rcond();
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  cond = (rc > 0.0 && min_pivot > 0.0) ? 1.0 / rc : std::numeric_limits<double>::infinity();
  V x;
  if (cond <= max_condition) {
    x = lu.solve(b);
    if (!x.allFinite()) cond = std::numeric_limits<double>::infinity();
  }
  if (!(cond <= max_condition)) {
    throw Error(ErrorCode::Singular, "matrix is singular to working precision",
                {{"condition", std::isfinite(cond) ? cond : 1e308}, {"threshold", max_condition}});
  }
  return x;
}
}  // namespace

Matrix pinv(const Matrix& a, double rank_tol) { return pinv_impl(a, rank_tol); }
CMatrix pinv(const CMatrix& a, double rank_tol) { return pinv_impl(a, rank_tol); }

double condition_number(const Matrix& a) { return cond_impl(a); }
double condition_number(const CMatrix& a) { return cond_impl(a); }

SolveResult solve(const Matrix& a, const Vector& b, double max_condition) {
  SolveResult r;
  r.x = solve_impl(a, b, max_condition, r.condition);
  return r;
}

CSolveResult solve(const CMatrix& a, const CVector& b, double max_condition) {
  CSolveResult r;
  r.x = solve_impl(a, b, max_condition, r.condition);
  return r;
}

Matrix complement_rows(const Matrix& a) {
  const Eigen::Index n = a.rows();
  const Eigen::Index k = a.cols();
  if (k == 0) return Matrix::Identity(n, n);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - k).transpose();
}

}  // namespace isoman
