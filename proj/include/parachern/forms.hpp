#pragma once

// Pointwise exterior algebra of (p,q)-forms on C^n.
//
// A monomial is dz^I ∧ dz̄^J with I, J bitmasks over {0..n-1}, always stored in
// canonical order: dz factors ascending, then dz̄ factors ascending. Every sign
// produced by products or conjugation is normalized to this order.

#include "parachern/scalar.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace parachern {

using Mask = std::uint32_t;

inline int popcount(Mask m) { return std::popcount(m); }

/// Sign (+1/-1) of sorting the concatenation a·b of two ascending index lists,
/// 0 if they share an index.
inline int merge_sign(Mask a, Mask b) {
  if (a & b) return 0;
  int inversions = 0;
  for (Mask rest = b; rest; rest &= rest - 1) {
    const int j = std::countr_zero(rest);
    // elements of a greater than j must jump over it
    inversions += popcount(a & ~((Mask(2) << j) - 1));
  }
  return (inversions & 1) ? -1 : 1;
}

inline std::vector<int> mask_indices(Mask m) {
  std::vector<int> out;
  for (; m; m &= m - 1) out.push_back(std::countr_zero(m));
  return out;
}

inline Mask indices_mask(const std::vector<int>& idx) {
  Mask m = 0;
  for (int i : idx) m |= Mask(1) << i;
  return m;
}

template <class S>
class Form {
public:
  using Traits = ScalarTraits<S>;
  using Key = std::pair<Mask, Mask>;

  Form() = default;
  explicit Form(int n) : n_(n) {
    if (n < 0 || n > 16) throw InputError("form dimension out of range");
  }

  static Form constant(int n, S c) {
    Form f(n);
    f.add(0, 0, std::move(c));
    return f;
  }
  static Form one(int n) { return constant(n, Traits::one()); }
  static Form dz(int n, int j) { return monomial(n, Mask(1) << j, 0, Traits::one()); }
  static Form dzbar(int n, int j) { return monomial(n, 0, Mask(1) << j, Traits::one()); }
  static Form monomial(int n, Mask i, Mask j, S c) {
    Form f(n);
    f.check_mask(i);
    f.check_mask(j);
    f.add(i, j, std::move(c));
    return f;
  }
  /// c · dz_j ∧ dz̄_k
  static Form dzdzbar(int n, int j, int k, S c) {
    return monomial(n, Mask(1) << j, Mask(1) << k, std::move(c));
  }

  int dim() const { return n_; }
  const std::map<Key, S>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  S coefficient(Mask i, Mask j) const {
    auto it = terms_.find({i, j});
    return it == terms_.end() ? Traits::zero() : it->second;
  }

  /// Adds c · dz^I ∧ dz̄^J (I, J already in canonical order).
  void add(Mask i, Mask j, S c) {
    if (Traits::is_zero(c)) return;
    auto [it, inserted] = terms_.try_emplace({i, j}, c);
    if (!inserted) {
      it->second += c;
      if (Traits::is_zero(it->second)) terms_.erase(it);
    }
  }

  /// True when every term has bidegree (p,q).
  bool is_pure(int p, int q) const {
    for (const auto& [k, c] : terms_)
      if (popcount(k.first) != p || popcount(k.second) != q) return false;
    return true;
  }

  Form component(int p, int q) const {
    Form f(n_);
    for (const auto& [k, c] : terms_)
      if (popcount(k.first) == p && popcount(k.second) == q) f.terms_.emplace(k, c);
    return f;
  }

  /// Total degree if homogeneous, -1 otherwise (0 for the zero form).
  int degree() const {
    int d = -2;
    for (const auto& [k, c] : terms_) {
      int e = popcount(k.first) + popcount(k.second);
      if (d == -2) d = e;
      else if (d != e) return -1;
    }
    return d == -2 ? 0 : d;
  }

  Form conj() const {
    Form f(n_);
    for (const auto& [k, c] : terms_) {
      const int sign = (popcount(k.first) * popcount(k.second)) % 2 ? -1 : 1;
      S v = Traits::conj(c);
      if (sign < 0) v = -v;
      f.add(k.second, k.first, std::move(v));
    }
    return f;
  }

  Form& operator+=(const Form& o) {
    require_same_dim(o);
    for (const auto& [k, c] : o.terms_) add(k.first, k.second, c);
    return *this;
  }
  Form& operator-=(const Form& o) {
    require_same_dim(o);
    for (const auto& [k, c] : o.terms_) add(k.first, k.second, -c);
    return *this;
  }
  Form& operator*=(const S& s) {
    if (Traits::is_zero(s)) {
      terms_.clear();
      return *this;
    }
    std::map<Key, S> out;
    for (auto& [k, c] : terms_) {
      S v = c * s;
      if (!Traits::is_zero(v)) out.emplace(k, std::move(v));
    }
    terms_ = std::move(out);
    return *this;
  }

  friend Form operator+(Form a, const Form& b) { return a += b; }
  friend Form operator-(Form a, const Form& b) { return a -= b; }
  friend Form operator-(const Form& a) {
    Form f(a.n_);
    return f -= a;
  }
  friend Form operator*(Form a, const S& s) { return a *= s; }
  friend Form operator*(const S& s, Form a) { return a *= s; }
  friend bool operator==(const Form& a, const Form& b) {
    return a.n_ == b.n_ && a.terms_ == b.terms_;
  }

  void require_same_dim(const Form& o) const {
    if (n_ != o.n_)
      throw InputError("form dimension mismatch: " + std::to_string(n_) + " vs " +
                       std::to_string(o.n_));
  }

private:
  void check_mask(Mask m) const {
    if (m >> n_) throw InputError("form index out of range for dimension " + std::to_string(n_));
  }

  int n_ = 0;
  std::map<Key, S> terms_;
};

/// Exterior product with the canonical-order sign convention.
template <class S>
Form<S> wedge(const Form<S>& a, const Form<S>& b) {
  a.require_same_dim(b);
  Form<S> out(a.dim());
  for (const auto& [ka, ca] : a.terms()) {
    const auto& [ia, ja] = ka;
    for (const auto& [kb, cb] : b.terms()) {
      const auto& [ib, jb] = kb;
      const int s1 = merge_sign(ia, ib);
      if (s1 == 0) continue;
      const int s2 = merge_sign(ja, jb);
      if (s2 == 0) continue;
      // move dz^{ib} left across dz̄^{ja}
      const int s3 = (popcount(ja) * popcount(ib)) % 2 ? -1 : 1;
      S c = ca * cb;
      if (s1 * s2 * s3 < 0) c = -c;
      out.add(ia | ib, ja | jb, std::move(c));
    }
  }
  return out;
}

template <class S>
Form<S> wedge_power(const Form<S>& a, int k) {
  Form<S> out = Form<S>::one(a.dim());
  for (int i = 0; i < k; ++i) out = wedge(out, a);
  return out;
}

/// The form with every coefficient mapped through fn.
template <class T, class S, class Fn>
Form<T> map_coefficients(const Form<S>& f, Fn&& fn) {
  Form<T> out(f.dim());
  for (const auto& [k, c] : f.terms()) out.add(k.first, k.second, fn(c));
  return out;
}

inline Form<Complex> to_complex(const Form<ExactScalar>& f) {
  return map_coefficients<Complex>(f, [](const ExactScalar& c) { return c.evaluate(); });
}
inline Form<Complex> to_complex(const Form<Complex>& f) { return f; }

/// Largest coefficient magnitude.
template <class S>
double max_abs(const Form<S>& f) {
  double m = 0.0;
  for (const auto& [k, c] : f.terms()) m = std::max(m, ScalarTraits<S>::magnitude(c));
  return m;
}

/// Pullback along a linear map: dw_a = Σ_b jac[a][b] dz_b (and its conjugate for dw̄_a).
/// `f` lives in dimension jac.size(), the result in dimension jac[0].size().
template <class S>
Form<S> pullback_linear(const Form<S>& f, const std::vector<std::vector<S>>& jac, int target_dim) {
  using T = ScalarTraits<S>;
  if (static_cast<int>(jac.size()) != f.dim()) throw InputError("jacobian row count mismatch");
  std::vector<Form<S>> dw, dwbar;
  for (int a = 0; a < f.dim(); ++a) {
    if (static_cast<int>(jac[a].size()) != target_dim) throw InputError("jacobian column mismatch");
    Form<S> p(target_dim), q(target_dim);
    for (int b = 0; b < target_dim; ++b) {
      p += Form<S>::monomial(target_dim, Mask(1) << b, 0, jac[a][b]);
      q += Form<S>::monomial(target_dim, 0, Mask(1) << b, T::conj(jac[a][b]));
    }
    dw.push_back(std::move(p));
    dwbar.push_back(std::move(q));
  }
  Form<S> out(target_dim);
  for (const auto& [k, c] : f.terms()) {
    Form<S> term = Form<S>::constant(target_dim, c);
    for (int a : mask_indices(k.first)) term = wedge(term, dw[a]);
    for (int a : mask_indices(k.second)) term = wedge(term, dwbar[a]);
    out += term;
  }
  return out;
}

/// i·Σ g_jk dz_j ∧ dz̄_k; real when g is Hermitian, positive when g > 0.
template <class S>
Form<S> kahler_form(const std::vector<std::vector<S>>& g) {
  const int n = static_cast<int>(g.size());
  Form<S> out(n);
  S i_unit;
  if constexpr (ScalarTraits<S>::exact) i_unit = ExactScalar(GaussRational::i());
  else i_unit = Complex(0.0, 1.0);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) out += Form<S>::dzdzbar(n, j, k, i_unit * g[j][k]);
  return out;
}

/// The volume form Π_j (i dz_j ∧ dz̄_j).
template <class S>
Form<S> volume_form(int n) {
  std::vector<std::vector<S>> id(n, std::vector<S>(n, ScalarTraits<S>::zero()));
  Form<S> out = Form<S>::one(n);
  for (int j = 0; j < n; ++j) {
    std::vector<std::vector<S>> e = id;
    e[j][j] = ScalarTraits<S>::one();
    out = wedge(out, kahler_form(e));
  }
  return out;
}

/// c with η = c · vol for a top-degree form η.
template <class S>
S top_coefficient(const Form<S>& eta) {
  const int n = eta.dim();
  const Mask full = n == 0 ? 0 : ((Mask(1) << n) - 1);
  for (const auto& [k, c] : eta.terms())
    if (k != std::pair<Mask, Mask>{full, full})
      throw InputError("form is not of top bidegree");
  Form<S> vol = volume_form<S>(n);
  const S v = vol.coefficient(full, full);  // ±1 or ±i
  if constexpr (ScalarTraits<S>::exact) {
    // v is a unit in Z[i]; divide by multiplying with its conjugate
    ExactScalar inv = v.conj();
    return eta.coefficient(full, full) * inv;
  } else {
    return eta.coefficient(full, full) / v;
  }
}

// ---------------------------------------------------------------------------
// Curvature matrices and characteristic forms

template <class S>
using FormMatrix = std::vector<std::vector<Form<S>>>;

template <class S>
using CurvatureMatrix = FormMatrix<S>;

template <class S>
using ChernData = std::vector<Form<S>>;

template <class S>
FormMatrix<S> zero_matrix(int r, int n) {
  return FormMatrix<S>(r, std::vector<Form<S>>(r, Form<S>(n)));
}

template <class S>
int matrix_dim(const FormMatrix<S>& m) {
  if (m.empty()) throw InputError("empty curvature matrix");
  return m[0][0].dim();
}

template <class S>
FormMatrix<S> multiply(const FormMatrix<S>& a, const FormMatrix<S>& b) {
  const std::size_t r = a.size();
  const int n = matrix_dim(a);
  FormMatrix<S> out = zero_matrix<S>(static_cast<int>(r), n);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t k = 0; k < r; ++k) out[i][j] += wedge(a[i][k], b[k][j]);
  return out;
}

template <class S>
Form<S> trace(const FormMatrix<S>& a) {
  Form<S> t(matrix_dim(a));
  for (std::size_t i = 0; i < a.size(); ++i) t += a[i][i];
  return t;
}

template <class S>
FormMatrix<S> scale(FormMatrix<S> a, const S& s) {
  for (auto& row : a)
    for (auto& f : row) f *= s;
  return a;
}

/// Curvature from coefficient tensor: Θ_ab = Σ_jk R[a][b][j][k] dz_j ∧ dz̄_k.
template <class S>
CurvatureMatrix<S> curvature_from_coefficients(
    const std::vector<std::vector<std::vector<std::vector<S>>>>& coeffs, int n) {
  const int r = static_cast<int>(coeffs.size());
  CurvatureMatrix<S> theta = zero_matrix<S>(r, n);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          theta[a][b] += Form<S>::dzdzbar(n, j, k, coeffs[a][b][j][k]);
  return theta;
}

/// A Θ A^{-1} for constant matrices A and its inverse (gauge change of frame).
template <class S>
CurvatureMatrix<S> conjugate_curvature(const CurvatureMatrix<S>& theta,
                                       const std::vector<std::vector<S>>& a,
                                       const std::vector<std::vector<S>>& a_inv) {
  const int r = static_cast<int>(theta.size());
  const int n = matrix_dim(theta);
  CurvatureMatrix<S> tmp = zero_matrix<S>(r, n), out = zero_matrix<S>(r, n);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int k = 0; k < r; ++k)
        if (!ScalarTraits<S>::is_zero(a[i][k])) tmp[i][j] += theta[k][j] * a[i][k];
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int k = 0; k < r; ++k)
        if (!ScalarTraits<S>::is_zero(a_inv[k][j])) out[i][j] += tmp[i][k] * a_inv[k][j];
  return out;
}

/// Coefficient R_{ab,jk} of dz_j ∧ dz̄_k in Θ_ab.
template <class S>
S curvature_coefficient(const CurvatureMatrix<S>& theta, int a, int b, int j, int k) {
  return theta[a][b].coefficient(Mask(1) << j, Mask(1) << k);
}

/// Θ = ω ⊗ Id_r for a Hermitian (1,1)-coefficient matrix g, i.e. Θ_aa = Σ g_jk dz_j dz̄_k,
/// so that iΘ is the Kähler form of g on every diagonal slot.
template <class S>
CurvatureMatrix<S> identity_twist(const std::vector<std::vector<S>>& g, int r) {
  const int n = static_cast<int>(g.size());
  CurvatureMatrix<S> theta = zero_matrix<S>(r, n);
  for (int a = 0; a < r; ++a)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) theta[a][a] += Form<S>::dzdzbar(n, j, k, g[j][k]);
  return theta;
}

/// Hermitian symmetry of a curvature matrix: Θ_ba = -conj(Θ_ab), equivalently
/// R_{ba,kj} = conj(R_{ab,jk}). In float mode compared to `tol`.
template <class S>
bool is_hermitian_symmetric(const CurvatureMatrix<S>& theta, double tol = 0.0) {
  const std::size_t r = theta.size();
  for (std::size_t a = 0; a < r; ++a) {
    if (theta[a].size() != r) return false;
    for (std::size_t b = 0; b < r; ++b) {
      if (!theta[a][b].is_pure(1, 1)) return false;
      Form<S> defect = theta[b][a] + theta[a][b].conj();
      if constexpr (ScalarTraits<S>::exact) {
        if (!defect.is_zero()) return false;
      } else {
        if (max_abs(defect) > tol) return false;
      }
    }
  }
  return true;
}

/// Total Chern forms c_k = e_k((i/2π)Θ), k = 0..r, by Newton's identities on the
/// power traces p_k = tr(((i/2π)Θ)^k). Entries have even degree, so they commute.
template <class S>
ChernData<S> chern_forms(const CurvatureMatrix<S>& theta) {
  using T = ScalarTraits<S>;
  const int r = static_cast<int>(theta.size());
  const int n = matrix_dim(theta);
  const FormMatrix<S> k_theta = scale(theta, T::chern_kappa());
  std::vector<Form<S>> p(r + 1, Form<S>(n));
  FormMatrix<S> power = k_theta;
  for (int k = 1; k <= r; ++k) {
    if (k > 1) power = multiply(power, k_theta);
    p[k] = trace(power);
  }
  ChernData<S> c(r + 1, Form<S>(n));
  c[0] = Form<S>::one(n);
  for (int k = 1; k <= r; ++k) {
    Form<S> acc(n);
    for (int i = 1; i <= k; ++i) {
      Form<S> term = wedge(c[k - i], p[i]);
      if (i % 2 == 0) acc -= term;
      else acc += term;
    }
    acc *= T::div_int(T::one(), k);
    c[k] = std::move(acc);
  }
  return c;
}

/// Segre forms s_0..s_maxDegree of the inverse series: s_k = -Σ_{i≥1} c_i ∧ s_{k-i}.
template <class S>
std::vector<Form<S>> segre_forms(const ChernData<S>& c, int max_degree) {
  if (c.empty()) throw InputError("empty Chern data");
  const int n = c[0].dim();
  if (!(c[0] == Form<S>::one(n))) throw InputError("c_0 must be 1");
  std::vector<Form<S>> s(max_degree + 1, Form<S>(n));
  s[0] = Form<S>::one(n);
  for (int k = 1; k <= max_degree; ++k) {
    Form<S> acc(n);
    for (int i = 1; i <= k && i < static_cast<int>(c.size()); ++i) acc -= wedge(c[i], s[k - i]);
    s[k] = std::move(acc);
  }
  return s;
}

/// Determinant of a square matrix of commuting forms by cofactor expansion.
template <class S>
Form<S> commuting_determinant(const FormMatrix<S>& m) {
  const std::size_t k = m.size();
  const int n = m.empty() ? 0 : m[0][0].dim();
  if (k == 0) return Form<S>::one(n);
  if (k == 1) return m[0][0];
  Form<S> acc(n);
  for (std::size_t col = 0; col < k; ++col) {
    if (m[0][col].is_zero()) continue;
    FormMatrix<S> minor;
    for (std::size_t i = 1; i < k; ++i) {
      std::vector<Form<S>> row;
      for (std::size_t j = 0; j < k; ++j)
        if (j != col) row.push_back(m[i][j]);
      minor.push_back(std::move(row));
    }
    Form<S> term = wedge(m[0][col], commuting_determinant(minor));
    if (col % 2) acc -= term;
    else acc += term;
  }
  return acc;
}

/// Schur form S_λ = det(h_{λ_i - i + j}) with h_k = (-1)^k s_k, so S_(1) = c_1,
/// S_(2) = c_1² - c_2 and S_(1,1) = c_2.
template <class S>
Form<S> schur_form(const std::vector<int>& lambda, const ChernData<S>& c) {
  const int rank = static_cast<int>(c.size()) - 1;
  const int n = c.at(0).dim();
  int weight = 0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (lambda[i] <= 0 || (i > 0 && lambda[i] > lambda[i - 1]))
      throw InputError("partition must be positive and nonincreasing");
    weight += lambda[i];
  }
  if (static_cast<int>(lambda.size()) > rank)
    throw InputError("partition has more parts than the rank");
  if (weight > n) throw InputError("partition weight exceeds the dimension");
  std::vector<Form<S>> s = segre_forms(c, weight);
  auto h = [&](int k) {
    if (k < 0) return Form<S>(n);
    Form<S> v = s[k];
    if (k % 2) v = -v;
    return v;
  };
  const std::size_t len = lambda.size();
  FormMatrix<S> m(len, std::vector<Form<S>>(len, Form<S>(n)));
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < len; ++j)
      m[i][j] = h(lambda[i] - static_cast<int>(i) + static_cast<int>(j));
  return commuting_determinant(m);
}

/// (2r c_2 - (r-1) c_1²) / (2r) on a surface.
template <class S>
Form<S> kobayashi_lubke_rhs(const ChernData<S>& c, int r) {
  using T = ScalarTraits<S>;
  const int n = c.at(0).dim();
  if (n != 2) throw InputError("the Kobayashi-Lubke term is defined on surfaces (n = 2)");
  if (r < 1) throw InputError("rank must be positive");
  Form<S> c1 = c.size() > 1 ? c[1] : Form<S>(n);
  Form<S> c2 = c.size() > 2 ? c[2] : Form<S>(n);
  Form<S> out = c2 * T::from_int(2 * r) - wedge(c1, c1) * T::from_int(r - 1);
  out *= T::div_int(T::one(), 2 * r);
  return out;
}

// ---------------------------------------------------------------------------
// dd^c of polynomial potentials

/// A polynomial Σ c_{ab} z^a z̄^b in n complex variables.
template <class S>
struct Polynomial {
  int n = 0;
  std::map<std::pair<std::vector<int>, std::vector<int>>, S> terms;

  void add(std::vector<int> a, std::vector<int> b, S c) {
    if (static_cast<int>(a.size()) != n || static_cast<int>(b.size()) != n)
      throw InputError("polynomial exponent length mismatch");
    auto [it, inserted] = terms.try_emplace({std::move(a), std::move(b)}, c);
    if (!inserted) it->second += c;
  }
};

/// dd^c φ = (i/2π) ∂∂̄φ evaluated at z, as a (1,1)-form.
template <class S>
Form<S> ddc_polynomial(const Polynomial<S>& phi, const std::vector<S>& z) {
  using T = ScalarTraits<S>;
  if (static_cast<int>(z.size()) != phi.n) throw InputError("point dimension mismatch");
  auto power = [](S x, int e) {
    S out = T::one();
    for (int i = 0; i < e; ++i) out = out * x;
    return out;
  };
  Form<S> out(phi.n);
  for (const auto& [exps, c] : phi.terms) {
    const auto& [a, b] = exps;
    for (int j = 0; j < phi.n; ++j) {
      if (a[j] == 0) continue;
      for (int k = 0; k < phi.n; ++k) {
        if (b[k] == 0) continue;
        S v = c * T::from_int(static_cast<long>(a[j]) * b[k]);
        for (int l = 0; l < phi.n; ++l) {
          v = v * power(z[l], a[l] - (l == j ? 1 : 0));
          v = v * power(T::conj(z[l]), b[l] - (l == k ? 1 : 0));
        }
        out += Form<S>::dzdzbar(phi.n, j, k, v * T::chern_kappa());
      }
    }
  }
  return out;
}

}  // namespace parachern
