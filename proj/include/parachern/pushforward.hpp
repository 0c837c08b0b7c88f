#pragma once

// Fiber integrals over the projective bundle P(E*) → X of hyperplanes in E.
//
// At the centre of a normal frame the tautological quotient O(1) on the
// affine chart ξ = (1, w_1, …, w_{r-1}) has
//   c1(O(1)) = ω_FS + κ ξ^† Θ ξ / |ξ|²,   κ = i/2π,
// with no mixed base/fiber terms. Integrating the total Segre form
// 1/(1 + c1(O(1))) over the fiber gives (-1)^{r-1} s(E).

#include "parachern/errors.hpp"
#include "parachern/forms.hpp"
#include "parachern/parallel.hpp"
#include "parachern/positivity.hpp"
#include "parachern/scalar.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

namespace parachern {

template <class S>
S from_rational(const Rational& q) {
  if constexpr (ScalarTraits<S>::exact) return S(q);
  else return S(to_double(q), 0.0);
}

inline Rational factorial(int k) {
  if (k < 0) throw std::domain_error("negative factorial");
  BigInt f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return Rational(f);
}

/// ∫_{C^{r-1}} Π|w_i|^{2a_i} / (1+|w|²)^s Π dA_i/π = Π a_i! · (s-r-Σa)! / (s-1)!,
/// with r - 1 = a.size(). Requires s ≥ r + Σa (absolute convergence).
inline Rational fubini_study_moment(const std::vector<int>& a, int s) {
  const int r = static_cast<int>(a.size()) + 1;
  int total = 0;
  Rational num = 1;
  for (int ai : a) {
    if (ai < 0) throw InputError("negative moment exponent");
    total += ai;
    num *= factorial(ai);
  }
  if (s < r + total) throw InputError("moment integral diverges");
  return num * factorial(s - r - total) / factorial(s - 1);
}

// ---------------------------------------------------------------------------
// Scalar fiber integral on the real positive slice

struct QuadratureConfig {
  double tail_target = 1e-9;  // bound on the mass outside the truncated box
  double first_panel = 1.0 / 16.0;
  unsigned workers = 1;
};

struct FiberQuadrature {
  double value = 0.0;
  double truncation = 0.0;   // T: the box is [0,T]^{r-1}
  double tail_bound = 0.0;   // rigorous bound on the neglected mass
  int nodes_per_axis = 0;
};

namespace detail {

struct Nodes {
  std::vector<double> x, w;
};

// 10-point Gauss-Legendre on [0, first], then dyadic panels up to T.
inline Nodes panel_nodes(double first, double T) {
  using GL = boost::math::quadrature::gauss<double, 10>;
  const auto& abs = GL::abscissa();
  const auto& wts = GL::weights();
  Nodes out;
  auto add_panel = [&](double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t i = 0; i < abs.size(); ++i) {
      for (int sgn : {-1, 1}) {
        if (abs[i] == 0.0 && sgn < 0) continue;
        out.x.push_back(c + sgn * h * abs[i]);
        out.w.push_back(h * wts[i]);
      }
    }
  };
  add_panel(0.0, first);
  for (double a = first; a < T; a *= 2.0) add_panel(a, std::min(2.0 * a, T));
  return out;
}

}  // namespace detail

/// (r-1)! ∫_{C^{r-1}} Π dA_i/π / (c_0 + Σ c_i |w_i|²)^r = (r-1)! ∫_{R+^{r-1}} dt / (c_0 + Σ c_i t_i)^r,
/// which equals 1/(c_0 ⋯ c_{r-1}). Tensor Gauss-Legendre over dyadic panels in t.
inline FiberQuadrature scalar_fiber_integral(const std::vector<double>& c, const QuadratureConfig& cfg = {}) {
  const int r = static_cast<int>(c.size());
  if (r < 1) throw InputError("need at least one coefficient");
  for (double ci : c)
    if (!(ci > 0.0) || !std::isfinite(ci)) throw InputError("fiber coefficients must be positive");
  FiberQuadrature out;
  if (r == 1) {
    out.value = 1.0 / c[0];
    return out;
  }
  const int d = r - 1;
  double prod = 1.0;
  for (int i = 1; i < r; ++i) prod *= c[i];
  // Mass with t_i > T, the other variables integrated out exactly:
  // 1 / (Π_{j≥1} c_j · (c_0 + c_i T)).
  auto tail = [&](double T) {
    double t = 0.0;
    for (int i = 1; i < r; ++i) t += 1.0 / (prod * (c[0] + c[i] * T));
    return t;
  };
  double T = 1.0;
  while (tail(T) > cfg.tail_target) T *= 2.0;
  out.truncation = T;
  out.tail_bound = tail(T);
  const detail::Nodes nodes = detail::panel_nodes(cfg.first_panel, T);
  const std::size_t m = nodes.x.size();
  out.nodes_per_axis = static_cast<int>(m);
  double fact = 1.0;
  for (int i = 2; i < r; ++i) fact *= i;

  // Outer axis in parallel; each slab sums the remaining axes serially.
  std::vector<double> slab(m, 0.0);
  parallel_for(m, cfg.workers, [&](std::size_t i0) {
    const std::size_t inner = d == 1 ? 1 : static_cast<std::size_t>(std::pow(static_cast<double>(m), d - 1));
    std::vector<double> acc;
    acc.reserve(m);
    double row = 0.0;
    for (std::size_t flat = 0; flat < inner; ++flat) {
      std::size_t rem = flat;
      double denom = c[0] + c[1] * nodes.x[i0], weight = nodes.w[i0];
      for (int a = 1; a < d; ++a) {
        const std::size_t k = rem % m;
        rem /= m;
        denom += c[a + 1] * nodes.x[k];
        weight *= nodes.w[k];
      }
      const double inv = 1.0 / denom;
      double p = inv;
      for (int e = 1; e < r; ++e) p *= inv;
      row += weight * p;
      if ((flat + 1) % m == 0 || flat + 1 == inner) {
        acc.push_back(row);
        row = 0.0;
      }
    }
    slab[i0] = pairwise_sum(acc);
  });
  out.value = fact * pairwise_sum(slab);
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

struct MonteCarloConfig {
  std::size_t samples = 100000;
  std::size_t batch = 4096;
  std::uint64_t seed = 20240917;
  unsigned workers = 1;
  double max_stderr = 0.0;  // 0: no requirement
};

namespace detail {

// Draws ξ uniformly on the unit sphere of C^r, i.e. [ξ] from the Fubini-Study
// probability measure, and averages g(ξ) batch by batch.
template <class Fn>
MonteCarloEstimate sphere_average(int r, const MonteCarloConfig& cfg, Fn&& g) {
  if (cfg.samples < 2 || cfg.batch == 0) throw InputError("Monte Carlo budget too small");
  const std::size_t batches = (cfg.samples + cfg.batch - 1) / cfg.batch;
  std::vector<double> sums(batches), squares(batches);
  parallel_for(batches, cfg.workers, [&](std::size_t b) {
    auto rng = sample_rng(cfg.seed, b);
    const std::size_t count = std::min(cfg.batch, cfg.samples - b * cfg.batch);
    std::vector<double> vals(count), sq(count);
    for (std::size_t i = 0; i < count; ++i) {
      VectorXc xi = random_unit_vector(rng, r);
      vals[i] = g(xi);
      sq[i] = vals[i] * vals[i];
    }
    sums[b] = pairwise_sum(vals);
    squares[b] = pairwise_sum(sq);
  });
  const double n = static_cast<double>(cfg.samples);
  MonteCarloEstimate out;
  out.samples = cfg.samples;
  out.value = pairwise_sum(sums) / n;
  const double var = std::max(0.0, (pairwise_sum(squares) / n - out.value * out.value) * n / (n - 1.0));
  out.std_error = std::sqrt(var / n);
  if (cfg.max_stderr > 0.0 && out.std_error > cfg.max_stderr)
    throw NumericalFailure("Monte Carlo standard error " + std::to_string(out.std_error) + " exceeds the requested " +
                           std::to_string(cfg.max_stderr));
  return out;
}

}  // namespace detail

/// E_FS[(|ξ|²/ξ^†Mξ)^r] = 1/det M for Hermitian positive M; with M = diag(c) this
/// is the scalar fiber integral.
inline MonteCarloEstimate monte_carlo_fiber_integral(const MatrixXc& m, const MonteCarloConfig& cfg = {}) {
  require_positive_definite(m, "fiber matrix");
  const int r = static_cast<int>(m.rows());
  return detail::sphere_average(r, cfg, [&](const VectorXc& xi) {
    return std::pow(1.0 / (xi.adjoint() * m * xi)(0, 0).real(), r);
  });
}

inline MonteCarloEstimate monte_carlo_fiber_integral(const std::vector<double>& c, const MonteCarloConfig& cfg = {}) {
  MatrixXc m = MatrixXc::Zero(static_cast<int>(c.size()), static_cast<int>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = c[i];
  return monte_carlo_fiber_integral(m, cfg);
}

/// Monte Carlo estimate of (r-1)!·fubini_study_moment(a, r + Σa).
inline MonteCarloEstimate monte_carlo_moment(const std::vector<int>& a, const MonteCarloConfig& cfg = {}) {
  const int r = static_cast<int>(a.size()) + 1;
  return detail::sphere_average(r, cfg, [&](const VectorXc& xi) {
    double v = 1.0;
    for (int i = 0; i + 1 < r; ++i) v *= std::pow(std::norm(xi[i + 1]), a[i]);
    return v;  // |ξ| = 1
  });
}

// ---------------------------------------------------------------------------
// Nilpotent coefficient ring

/// Truncated polynomial in commuting symbols u_0…u_{m-1}; monomials of total
/// degree above `degree` vanish. Base (1,1)-forms dz_j ∧ dz̄_k become the
/// symbols u_{j·n+k}.
template <class S>
class NilpotentScalar {
public:
  using Traits = ScalarTraits<S>;
  using Monomial = std::vector<std::uint8_t>;

  NilpotentScalar() = default;
  NilpotentScalar(int symbols, int degree) : symbols_(symbols), degree_(degree) {}

  static NilpotentScalar constant(int symbols, int degree, S c) {
    NilpotentScalar x(symbols, degree);
    x.add(Monomial(symbols, 0), std::move(c));
    return x;
  }
  static NilpotentScalar symbol(int symbols, int degree, int index, S c) {
    NilpotentScalar x(symbols, degree);
    Monomial m(symbols, 0);
    m.at(index) = 1;
    x.add(std::move(m), std::move(c));
    return x;
  }

  int symbols() const { return symbols_; }
  int degree() const { return degree_; }
  const std::map<Monomial, S>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add(Monomial m, S c) {
    int total = 0;
    for (auto e : m) total += e;
    if (total > degree_ || Traits::is_zero(c)) return;
    auto [it, inserted] = terms_.try_emplace(std::move(m), c);
    if (!inserted) {
      it->second += c;
      if (Traits::is_zero(it->second)) terms_.erase(it);
    }
  }

  NilpotentScalar& operator+=(const NilpotentScalar& o) {
    check(o);
    for (const auto& [m, c] : o.terms_) add(m, c);
    return *this;
  }
  NilpotentScalar& operator*=(const S& s) {
    NilpotentScalar out(symbols_, degree_);
    for (const auto& [m, c] : terms_) out.add(m, c * s);
    return *this = std::move(out);
  }
  friend NilpotentScalar operator+(NilpotentScalar a, const NilpotentScalar& b) { return a += b; }
  friend NilpotentScalar operator*(NilpotentScalar a, const S& s) { return a *= s; }
  friend NilpotentScalar operator*(const NilpotentScalar& a, const NilpotentScalar& b) {
    a.check(b);
    NilpotentScalar out(a.symbols_, a.degree_);
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) {
        Monomial m(ma);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<std::uint8_t>(m[i] + mb[i]);
        out.add(std::move(m), ca * cb);
      }
    return out;
  }
  friend bool operator==(const NilpotentScalar& a, const NilpotentScalar& b) {
    return a.symbols_ == b.symbols_ && a.degree_ == b.degree_ && a.terms_ == b.terms_;
  }

private:
  void check(const NilpotentScalar& o) const {
    if (o.symbols_ != symbols_ || o.degree_ != degree_) throw InputError("nilpotent ring mismatch");
  }
  int symbols_ = 0, degree_ = 0;
  std::map<Monomial, S> terms_;
};

/// A (1,1)-form Σ R_jk dz_j dz̄_k as a linear element of the nilpotent ring.
template <class S>
NilpotentScalar<S> to_nilpotent(const Form<S>& f, int degree) {
  if (!f.is_pure(1, 1)) throw InputError("expected a (1,1)-form");
  const int n = f.dim();
  NilpotentScalar<S> x(n * n, degree);
  for (const auto& [key, c] : f.terms()) {
    const int j = std::countr_zero(key.first), k = std::countr_zero(key.second);
    x += NilpotentScalar<S>::symbol(n * n, degree, j * n + k, c);
  }
  return x;
}

/// Back to forms: each monomial becomes the wedge of its (1,1) factors.
template <class S>
Form<S> to_form(const NilpotentScalar<S>& x, int n) {
  if (x.symbols() != n * n) throw InputError("symbol count does not match the dimension");
  Form<S> out(n);
  for (const auto& [m, c] : x.terms()) {
    Form<S> term = Form<S>::constant(n, c);
    for (int s = 0; s < n * n; ++s)
      for (int e = 0; e < m[s]; ++e) term = wedge(term, Form<S>::dzdzbar(n, s / n, s % n, ScalarTraits<S>::one()));
    out += term;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symbolic push-forward

struct PushforwardConfig {
  int max_rank = 4;
  int max_dim = 3;
};

template <class S>
struct PushforwardResult {
  std::vector<Form<S>> fiber_integrals;  // π_*[1/(1+c1(O(1)))] by base degree
  std::vector<Form<S>> segre;            // (-1)^{r-1} times the above: s_0..s_n
};

/// Expands 1/(1 + c1(O(1))) with c1(O(1)) = ω + β, β = κ ξ^†Θξ/|ξ|², keeps the
/// fiber-top part C(r-1+k, k) ω^{r-1} β^k and integrates the monomials in ξ, ξ̄
/// with the moment formula. Only the ξ-monomials with equal holomorphic and
/// antiholomorphic exponents survive the torus average.
template <class S>
PushforwardResult<S> symbolic_pushforward(const CurvatureMatrix<S>& theta, const PushforwardConfig& cfg = {}) {
  using T = ScalarTraits<S>;
  const int r = static_cast<int>(theta.size());
  if (r < 1) throw InputError("empty curvature matrix");
  const int n = matrix_dim(theta);
  if (r > cfg.max_rank || n > cfg.max_dim)
    throw Unsupported("push-forward is limited to rank " + std::to_string(cfg.max_rank) + " and dimension " +
                      std::to_string(cfg.max_dim));
  const int symbols = n * n;
  using N = NilpotentScalar<S>;
  // ξ̄^e ξ^f keyed by the concatenated exponent vector (e, f)
  using Key = std::vector<int>;
  std::map<Key, N> beta_num;  // ξ^†(κΘ)ξ
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) {
      N entry = to_nilpotent(theta[a][b], n) * T::chern_kappa();
      if (entry.is_zero()) continue;
      Key k(2 * r, 0);
      k[a] += 1;
      k[r + b] += 1;
      auto [it, ins] = beta_num.try_emplace(k, entry);
      if (!ins) it->second += entry;
    }

  PushforwardResult<S> out;
  out.fiber_integrals.assign(n + 1, Form<S>(n));
  std::map<Key, N> power;  // β-numerator to the k-th power
  power[Key(2 * r, 0)] = N::constant(symbols, n, T::one());
  for (int k = 0; k <= n; ++k) {
    if (k > 0) {
      std::map<Key, N> next;
      for (const auto& [ka, ca] : power)
        for (const auto& [kb, cb] : beta_num) {
          N prod = ca * cb;
          if (prod.is_zero()) continue;
          Key key(ka);
          for (int i = 0; i < 2 * r; ++i) key[i] += kb[i];
          auto [it, ins] = next.try_emplace(key, prod);
          if (!ins) it->second += prod;
        }
      power = std::move(next);
    }
    // ∫ ω^{r-1} ξ̄^e ξ^f / |ξ|^{2k} = (r-1)! · moment(e_1..e_{r-1}; s = r + k) when e = f
    N total(symbols, n);
    for (const auto& [key, c] : power) {
      bool diagonal = true;
      for (int i = 0; i < r; ++i) diagonal = diagonal && key[i] == key[r + i];
      if (!diagonal) continue;
      std::vector<int> a(key.begin() + 1, key.begin() + r);
      total += c * from_rational<S>(factorial(r - 1) * fubini_study_moment(a, r + k));
    }
    // sign (-1)^m of 1/(1+c1)^{-1} expansion at m = r-1+k, times C(r-1+k, k)
    Rational coeff = factorial(r - 1 + k) / (factorial(k) * factorial(r - 1));
    if ((r - 1 + k) % 2) coeff = -coeff;
    out.fiber_integrals[k] = to_form(total * from_rational<S>(coeff), n);
  }
  out.segre = out.fiber_integrals;
  if ((r - 1) % 2)
    for (auto& f : out.segre) f = -f;
  return out;
}

/// Largest coefficient difference between the push-forward and the base-side
/// Segre forms segre_forms(chern_forms(Θ)).
template <class S>
double pushforward_deviation(const CurvatureMatrix<S>& theta) {
  auto push = symbolic_pushforward(theta);
  const int n = matrix_dim(theta);
  auto base = segre_forms(chern_forms(theta), n);
  double worst = 0.0;
  for (int k = 0; k <= n; ++k) worst = std::max(worst, max_abs(push.segre[k] - base[k]));
  return worst;
}

// ---------------------------------------------------------------------------
// Unitary changes of frame

using ExactMatrix = std::vector<std::vector<GaussRational>>;

/// Inverse over Q(i) by Gauss-Jordan elimination.
inline ExactMatrix invert_exact(ExactMatrix a) {
  const int r = static_cast<int>(a.size());
  ExactMatrix inv(r, std::vector<GaussRational>(r));
  for (int i = 0; i < r; ++i) inv[i][i] = GaussRational(1);
  for (int col = 0; col < r; ++col) {
    int pivot = col;
    while (pivot < r && a[pivot][col].is_zero()) ++pivot;
    if (pivot == r) throw InputError("matrix is singular");
    std::swap(a[pivot], a[col]);
    std::swap(inv[pivot], inv[col]);
    const GaussRational p = a[col][col];
    for (int j = 0; j < r; ++j) {
      a[col][j] /= p;
      inv[col][j] /= p;
    }
    for (int i = 0; i < r; ++i) {
      if (i == col || a[i][col].is_zero()) continue;
      const GaussRational f = a[i][col];
      for (int j = 0; j < r; ++j) {
        a[i][j] -= f * a[col][j];
        inv[i][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

/// Cayley transform U = (I - A)(I + A)^{-1} of an anti-Hermitian A: a unitary
/// matrix with entries in Q(i).
inline ExactMatrix cayley_unitary(const ExactMatrix& a) {
  const int r = static_cast<int>(a.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (!(a[i][j] == -a[j][i].conj())) throw InputError("Cayley transform needs an anti-Hermitian matrix");
  ExactMatrix plus(r, std::vector<GaussRational>(r)), minus = plus, u = plus;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      const GaussRational id = i == j ? GaussRational(1) : GaussRational(0);
      plus[i][j] = id + a[i][j];
      minus[i][j] = id - a[i][j];
    }
  const ExactMatrix inv = invert_exact(plus);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      for (int k = 0; k < r; ++k) u[i][j] += minus[i][k] * inv[k][j];
  return u;
}

inline std::vector<std::vector<ExactScalar>> to_exact_scalars(const ExactMatrix& m) {
  std::vector<std::vector<ExactScalar>> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (const auto& v : m[i]) out[i].push_back(ExactScalar(v));
  return out;
}

inline std::vector<std::vector<ExactScalar>> adjoint(const std::vector<std::vector<ExactScalar>>& m) {
  const std::size_t r = m.size();
  std::vector<std::vector<ExactScalar>> out(r, std::vector<ExactScalar>(r));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) out[j][i] = m[i][j].conj();
  return out;
}

inline std::vector<std::vector<Complex>> adjoint(const std::vector<std::vector<Complex>>& m) {
  const std::size_t r = m.size();
  std::vector<std::vector<Complex>> out(r, std::vector<Complex>(r));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) out[j][i] = std::conj(m[i][j]);
  return out;
}

/// Max coefficient change of the push-forward under Θ ↦ UΘU^†.
template <class S>
double unitary_invariance_probe(const CurvatureMatrix<S>& theta, const std::vector<std::vector<S>>& u) {
  if (u.size() != theta.size()) throw InputError("unitary size does not match the rank");
  auto rotated = conjugate_curvature(theta, u, adjoint(u));
  auto a = symbolic_pushforward(theta);
  auto b = symbolic_pushforward(rotated);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.segre.size(); ++k) worst = std::max(worst, max_abs(a.segre[k] - b.segre[k]));
  return worst;
}

}  // namespace parachern
