#include "isoman/expansion.hpp"

#include "isoman/error.hpp"

#include <cmath>
#include <functional>

namespace isoman {

std::vector<int> to_exponents(const MultiIndex& idx, int modes) {
  std::vector<int> e(modes, 0);
  for (int i : idx) {
    if (i < 0 || i >= modes) throw Error(ErrorCode::OutOfRange, "multi-index entry outside the expansion modes");
    ++e[i];
  }
  return e;
}

MultiIndex to_multi_index(const std::vector<int>& e) {
  MultiIndex idx;
  for (int i = 0; i < static_cast<int>(e.size()); ++i) {
    for (int c = 0; c < e[i]; ++c) idx.push_back(i);
  }
  return idx;
}

std::vector<int> ExpansionTensors::exponents(const MultiIndex& idx) const { return to_exponents(idx, modes); }

const CVector& ExpansionTensors::coefficient(const MultiIndex& idx) const {
  auto it = coeffs.find(exponents(idx));
  if (it == coeffs.end()) {
    throw Error(ErrorCode::OrderUnavailable, "expansion coefficient not available", {{"idx", idx}, {"order", order}});
  }
  return it->second;
}

namespace {

using Exps = std::vector<int>;

int degree(const Exps& e) {
  int d = 0;
  for (int c : e) d += c;
  return d;
}

void for_each_degree(int modes, int deg, const std::function<void(const Exps&)>& fn) {
  Exps e(modes, 0);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == modes - 1) {
      e[i] = left;
      fn(e);
      return;
    }
    for (int c = left; c >= 0; --c) {
      e[i] = c;
      rec(i + 1, left - c);
    }
  };
  if (modes > 0) rec(0, deg);
}

void for_each_sub(const Exps& a, const std::function<void(const Exps&)>& fn) {
  Exps d(a.size(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == a.size()) {
      fn(d);
      return;
    }
    for (int c = 0; c <= a[i]; ++c) {
      d[i] = c;
      rec(i + 1);
    }
  };
  rec(0);
}

Exps conj_exps(const Exps& e, const std::vector<int>& partner) {
  Exps c(e.size(), 0);
  for (std::size_t i = 0; i < e.size(); ++i) c[partner[i]] += e[i];
  return c;
}

long count_monomials(int modes, int deg) {
  // C(deg + modes - 1, modes - 1)
  double c = 1.0;
  for (int i = 1; i < modes; ++i) c = c * (deg + i) / i;
  return static_cast<long>(std::llround(c));
}

CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

Complex monomial(const CVector& psi, const Exps& e) {
  Complex v(1.0, 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] == 0) continue;
    Complex p = i < static_cast<std::size_t>(psi.size()) ? psi(i) : Complex(0.0, 0.0);
    for (int c = 0; c < e[i]; ++c) v *= p;
  }
  return v;
}

}  // namespace

ExpansionTensors solve_expansion(const Spectrum& s, const std::vector<Matrix>& tensors, int order,
                                 const ExpansionOptions& opt) {
  const int n = s.dimension();
  const int modes = opt.modes > 0 ? opt.modes : s.beta;
  if (modes < 1 || modes > n) throw Error(ErrorCode::OutOfRange, "expansion mode count out of range", {{"modes", modes}});
  if (order < 1) throw Error(ErrorCode::OutOfRange, "expansion order must be >= 1");
  if (order > opt.max_order) {
    throw Error(ErrorCode::OrderTooHigh, "expansion order exceeds the cap", {{"order", order}, {"cap", opt.max_order}});
  }
  if (static_cast<int>(tensors.size()) < order - 1) {
    throw Error(ErrorCode::OrderUnavailable, "derivative tensors missing for the requested order",
                {{"order", order}, {"tensors", tensors.size()}});
  }
  double bytes = 0.0;
  for (int k = 2; k <= order; ++k) {
    double nk = std::pow(static_cast<double>(n), k);
    bytes += nk * n * 8.0;
    for (int m = k; m <= order; ++m) bytes += static_cast<double>(count_monomials(modes, m)) * nk * 16.0;
  }
  if (bytes > opt.memory_cap_bytes) {
    throw Error(ErrorCode::OrderTooHigh, "memory estimate exceeds the cap",
                {{"order", order}, {"bytes", bytes}, {"cap", opt.memory_cap_bytes}});
  }
  for (int k = 2; k <= order; ++k) {
    const Matrix& t = tensors[k - 2];
    if (t.rows() != n || t.cols() != static_cast<Eigen::Index>(std::pow(n, k) + 0.5)) {
      throw Error(ErrorCode::InvalidArgument, "derivative tensor has the wrong shape", {{"order", k}});
    }
  }

  ExpansionTensors ex;
  ex.order = order;
  ex.modes = modes;
  ex.x0 = s.x0;
  ex.lambda = s.lambda.head(modes);
  ex.partner.assign(s.partner.begin(), s.partner.begin() + modes);
  ex.validity_radius = opt.validity_radius;
  for (int k = 0; k < modes; ++k) {
    if (ex.partner[k] >= modes) {
      throw Error(ErrorCode::PairSplit, "expansion modes split a conjugate pair", {{"modes", modes}});
    }
  }

  // kron_sums[k][alpha] = sum over ordered k-part compositions of alpha of h^{b1} (x) ... (x) h^{bk}
  std::vector<std::map<Exps, CVector>> kron_sums(order + 1);
  for (int k = 0; k < modes; ++k) {
    Exps e(modes, 0);
    e[k] = 1;
    kron_sums[1][e] = s.v.col(k);
  }
  const CMatrix jc = s.jacobian.cast<Complex>();
  double fact = 1.0;
  std::vector<double> inv_fact(order + 1, 1.0);
  for (int k = 1; k <= order; ++k) {
    fact *= k;
    inv_fact[k] = 1.0 / fact;
  }

  for (int m = 2; m <= order; ++m) {
    std::vector<Exps> level;
    for_each_degree(modes, m, [&](const Exps& a) { level.push_back(a); });
    for (int k = 2; k <= m; ++k) {
      for (const Exps& a : level) {
        CVector acc;
        for_each_sub(a, [&](const Exps& d) {
          int dd = degree(d);
          if (dd < 1 || m - dd < k - 1) return;
          Exps rest(a.size());
          for (std::size_t i = 0; i < a.size(); ++i) rest[i] = a[i] - d[i];
          auto lo = kron_sums[k - 1].find(rest);
          auto hi = kron_sums[1].find(d);
          if (lo == kron_sums[k - 1].end() || hi == kron_sums[1].end()) return;
          CVector term = kron(lo->second, hi->second);
          if (acc.size() == 0) {
            acc = term;
          } else {
            acc += term;
          }
        });
        if (acc.size() > 0) kron_sums[k][a] = std::move(acc);
      }
    }
    std::map<Exps, CVector> solved;
    for (const Exps& a : level) {
      CVector q = CVector::Zero(n);
      for (int k = 2; k <= m; ++k) {
        auto it = kron_sums[k].find(a);
        if (it == kron_sums[k].end()) continue;
        const Matrix& d = tensors[k - 2];
        q += inv_fact[k] * (d * it->second.real() + Complex(0.0, 1.0) * (d * it->second.imag()));
      }
      Complex shift(0.0, 0.0);
      for (int i = 0; i < modes; ++i) shift += static_cast<double>(a[i]) * ex.lambda(i);
      CMatrix a_shift = jc;
      a_shift.diagonal().array() -= shift;
      CSolveResult r;
      try {
        r = solve(a_shift, CVector(-q), opt.resonance_cond);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Singular) throw;
        throw Error(ErrorCode::Resonance, "shifted matrix is resonant for this index tuple",
                    {{"idx", to_multi_index(a)}, {"shift", {shift.real(), shift.imag()}}, {"details", e.details()}});
      }
      solved[a] = r.x;
    }
    for (auto& [a, h] : solved) {
      Exps c = conj_exps(a, ex.partner);
      if (c == a) {
        h = h.real().cast<Complex>();
      } else if (a < c) {
        CVector avg = 0.5 * (h + solved.at(c).conjugate());
        h = avg;
        solved.at(c) = avg.conjugate();
      }
    }
    for (auto& [a, h] : solved) kron_sums[1][a] = h;
  }
  ex.coeffs = kron_sums[1];
  return ex;
}

ExpansionTensors solve_expansion(const Model& model, const Spectrum& s, int order, const ExpansionOptions& opt,
                                 const DerivativeOptions& dopt) {
  if (order > opt.max_order) {
    throw Error(ErrorCode::OrderTooHigh, "expansion order exceeds the cap", {{"order", order}, {"cap", opt.max_order}});
  }
  return solve_expansion(s, derivative_tensors(model, s.x0, order, dopt), order, opt);
}

CVector series_sum(const ExpansionTensors& ex, const CVector& psi, int order) {
  const int m = order < 0 ? ex.order : std::min(order, ex.order);
  CVector acc = CVector::Zero(ex.dimension());
  for (const auto& [e, h] : ex.coeffs) {
    if (degree(e) > m) continue;
    acc += monomial(psi, e) * h;
  }
  return acc;
}

Reconstruction reconstruct_state(const ExpansionTensors& ex, const CVector& psi, int order) {
  if (psi.size() > ex.modes) throw Error(ErrorCode::InvalidArgument, "more isostable values than expansion modes");
  CVector sum = series_sum(ex, psi, order);
  Reconstruction r;
  r.x = ex.x0 + sum.real();
  r.imag_residue = sum.imag().norm();
  r.outside_validity = psi.size() > 0 && psi.cwiseAbs().maxCoeff() > ex.validity_radius;
  return r;
}

CVector g_series(const ExpansionTensors& ex, const CVector& psi, int j, int order) {
  if (j < 0 || j >= ex.modes) throw Error(ErrorCode::OutOfRange, "g-vector index outside the expansion modes");
  const int m = order < 0 ? ex.order : order;
  if (m > ex.order) {
    throw Error(ErrorCode::OrderUnavailable, "requested g-series order exceeds the solved order",
                {{"order", m}, {"solved", ex.order}});
  }
  CVector acc = CVector::Zero(ex.dimension());
  for (const auto& [e, h] : ex.coeffs) {
    if (e[j] == 0 || degree(e) > m) continue;
    Exps lower = e;
    --lower[j];
    acc += (static_cast<double>(e[j]) * monomial(psi, lower)) * h;
  }
  return acc;
}

nlohmann::json to_json(const ExpansionTensors& ex) {
  nlohmann::json tuples = nlohmann::json::array();
  for (const auto& [e, h] : ex.coeffs) {
    std::vector<double> re(h.size()), im(h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      re[i] = h(i).real();
      im[i] = h(i).imag();
    }
    tuples.push_back({{"idx", to_multi_index(e)}, {"re", re}, {"im", im}});
  }
  std::vector<double> x0(ex.x0.data(), ex.x0.data() + ex.x0.size());
  nlohmann::json lam = nlohmann::json::array();
  for (Eigen::Index i = 0; i < ex.lambda.size(); ++i) lam.push_back({ex.lambda(i).real(), ex.lambda(i).imag()});
  return {{"order", ex.order}, {"modes", ex.modes}, {"x0", x0}, {"lambda", lam}, {"partner", ex.partner},
          {"tuples", tuples}};
}

ExpansionTensors expansion_from_json(const nlohmann::json& j) {
  ExpansionTensors ex;
  try {
    ex.order = j.at("order").get<int>();
    ex.modes = j.at("modes").get<int>();
    auto x0 = j.at("x0").get<std::vector<double>>();
    ex.x0 = Eigen::Map<Vector>(x0.data(), static_cast<Eigen::Index>(x0.size()));
    const auto& lam = j.at("lambda");
    ex.lambda.resize(static_cast<Eigen::Index>(lam.size()));
    for (std::size_t i = 0; i < lam.size(); ++i) ex.lambda(i) = Complex(lam[i][0].get<double>(), lam[i][1].get<double>());
    ex.partner = j.at("partner").get<std::vector<int>>();
    for (const auto& t : j.at("tuples")) {
      auto idx = t.at("idx").get<MultiIndex>();
      auto re = t.at("re").get<std::vector<double>>();
      auto im = t.at("im").get<std::vector<double>>();
      if (re.size() != x0.size() || im.size() != x0.size()) throw Error(ErrorCode::InvalidArgument, "tuple length");
      CVector h(static_cast<Eigen::Index>(re.size()));
      for (std::size_t i = 0; i < re.size(); ++i) h(i) = Complex(re[i], im[i]);
      ex.coeffs[to_exponents(idx, ex.modes)] = h;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed expansion JSON: ") + e.what());
  }
  return ex;
}

}  // namespace isoman
