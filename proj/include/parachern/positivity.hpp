#pragma once

// Sample-based curvature positivity: Griffiths (decomposable vectors v ⊗ s),
// Nakano (all of TX ⊗ E) and weak positivity of (k,k)-forms.
//
// Conventions: Θ_ab = Σ R_{ab,jk} dz_j ∧ dz̄_k. The Griffiths quadratic form is
// s^† H Θ(v) s with Θ(v)_ab = Σ_jk R_{ab,jk} v̄_j v_k, and the Nakano matrix is
// N_{(j a),(k b)} = Σ_c H_{ac} R_{cb,jk}; both are Hermitian-symmetrized.

#include "parachern/forms.hpp"
#include "parachern/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

namespace parachern {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

enum class Sign { positive, semipositive, indefinite };

inline const char* to_string(Sign s) {
  switch (s) {
    case Sign::positive: return "positive";
    case Sign::semipositive: return "semipositive";
    case Sign::indefinite: return "indefinite";
  }
  return "?";
}

inline Sign classify(double margin, double tol) {
  if (margin > tol) return Sign::positive;
  if (margin >= -tol) return Sign::semipositive;
  return Sign::indefinite;
}

struct SamplingConfig {
  int samples = 512;
  std::uint64_t seed = 20240917;
  unsigned workers = 1;
  double tol = 1e-10;
};

/// Independent stream for sample i; the same for any worker count.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline VectorXc random_unit_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g;
  VectorXc v(dim);
  for (int i = 0; i < dim; ++i) v[i] = Complex(g(rng), g(rng));
  return v / v.norm();
}

inline MatrixXc hermitian_part(const MatrixXc& m) { return 0.5 * (m + m.adjoint()); }

inline void require_positive_definite(const MatrixXc& h, const char* what) {
  if (h.rows() != h.cols()) throw InputError(std::string(what) + " is not square");
  if ((h - h.adjoint()).norm() > 1e-9 * (1.0 + h.norm()))
    throw InputError(std::string(what) + " is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(hermitian_part(h), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw InputError(std::string(what) + " is not positive definite");
}

/// Coefficient tensor R[a][b] as an n×n matrix (row j, column k).
inline std::vector<std::vector<MatrixXc>> curvature_tensor(const CurvatureMatrix<Complex>& theta) {
  const int r = static_cast<int>(theta.size());
  const int n = matrix_dim(theta);
  std::vector<std::vector<MatrixXc>> out(r, std::vector<MatrixXc>(r, MatrixXc::Zero(n, n)));
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) {
      if (!theta[a][b].is_pure(1, 1)) throw InputError("curvature entries must be (1,1)-forms");
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) out[a][b](j, k) = curvature_coefficient(theta, a, b, j, k);
    }
  return out;
}

/// Hermitian r×r matrix s ↦ s^† H Θ(v) s.
inline MatrixXc griffiths_matrix(const std::vector<std::vector<MatrixXc>>& R, const MatrixXc& h,
                                 const VectorXc& v) {
  const int r = static_cast<int>(R.size());
  MatrixXc tv(r, r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) tv(a, b) = (v.adjoint() * R[a][b] * v)(0, 0);
  return hermitian_part(h * tv);
}

struct GriffithsResult {
  Sign verdict = Sign::indefinite;
  double margin = 0.0;  // min sampled s^†HΘ(v)s over unit v (in the reference metric) and unit s
  VectorXc v, s;        // minimizing pair
  int samples = 0;
};

/// Griffiths test relative to a reference Hermitian metric g on TX (identity by
/// default): v ranges over g-unit vectors, s over H-unit vectors, the inner
/// minimum over s is exact (least generalized eigenvalue).
inline GriffithsResult griffiths_test(const CurvatureMatrix<Complex>& theta, const MatrixXc& h,
                                      const SamplingConfig& cfg = {},
                                      const MatrixXc* reference = nullptr) {
  require_positive_definite(h, "metric H");
  const int n = matrix_dim(theta);
  MatrixXc g = reference ? *reference : MatrixXc::Identity(n, n);
  require_positive_definite(g, "reference metric");
  const auto R = curvature_tensor(theta);
  // v = L^{-†} u with g = L L^† maps Euclidean-unit u to g-unit v
  Eigen::LLT<MatrixXc> lg(g);
  const MatrixXc l_inv_adj = lg.matrixL().adjoint().solve(MatrixXc::Identity(n, n));

  const int coordinate = n;
  const int total = coordinate + cfg.samples;
  std::vector<double> values(total);
  std::vector<VectorXc> vs(total), ss(total);
  parallel_for(total, cfg.workers, [&](std::size_t i) {
    VectorXc u = VectorXc::Zero(n);
    if (static_cast<int>(i) < coordinate) {
      u[static_cast<int>(i)] = 1.0;
    } else {
      auto rng = sample_rng(cfg.seed, i);
      u = random_unit_vector(rng, n);
    }
    VectorXc v = l_inv_adj * u;
    MatrixXc q = griffiths_matrix(R, h, v);
    // generalized problem q s = λ h s
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(q, hermitian_part(h));
    values[i] = es.eigenvalues()[0];
    vs[i] = v;
    ss[i] = es.eigenvectors().col(0);
    ss[i] /= std::sqrt(std::abs((ss[i].adjoint() * h * ss[i])(0, 0)));
  });
  GriffithsResult res;
  res.samples = total;
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  res.margin = values[best];
  res.v = vs[best];
  res.s = ss[best];
  res.verdict = classify(res.margin, cfg.tol);
  return res;
}

/// The (nr)×(nr) Hermitian Nakano matrix, index (j,a) ↦ j*r + a.
inline MatrixXc nakano_matrix(const CurvatureMatrix<Complex>& theta, const MatrixXc& h) {
  const int n = matrix_dim(theta);
  const int r = static_cast<int>(theta.size());
  const auto R = curvature_tensor(theta);
  MatrixXc m = MatrixXc::Zero(n * r, n * r);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) {
          Complex acc = 0.0;
          for (int c = 0; c < r; ++c) acc += h(a, c) * R[c][b](j, k);
          m(j * r + a, k * r + b) = acc;
        }
  return hermitian_part(m);
}

/// Inverse of nakano_matrix for H = Id: Θ from a Hermitian (nr)×(nr) matrix.
inline CurvatureMatrix<Complex> curvature_from_nakano_matrix(const MatrixXc& m, int r, int n) {
  if (m.rows() != n * r || m.cols() != n * r) throw InputError("matrix size is not n*r");
  CurvatureMatrix<Complex> theta = zero_matrix<Complex>(r, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          theta[a][b] += Form<Complex>::dzdzbar(n, j, k, m(j * r + a, k * r + b));
  return theta;
}

/// Rank 2 over a surface: N = Id - t·ζζ^† with ζ = (e1⊗e2 - e2⊗e1)/√2. Every
/// decomposable v⊗s has |<ζ, v⊗s>|² ≤ 1/2, so the Griffiths minimum is 1 - t/2
/// while the Nakano minimum is 1 - t. For 1 < t < 2 the tests disagree.
inline CurvatureMatrix<Complex> griffiths_not_nakano_fixture(double t = 1.5) {
  const int r = 2, n = 2;
  VectorXc zeta = VectorXc::Zero(n * r);
  zeta[0 * r + 1] = 1.0 / std::sqrt(2.0);
  zeta[1 * r + 0] = -1.0 / std::sqrt(2.0);
  MatrixXc m = MatrixXc::Identity(n * r, n * r) - t * zeta * zeta.adjoint();
  return curvature_from_nakano_matrix(m, r, n);
}

struct NakanoResult {
  Sign verdict = Sign::indefinite;
  double margin = 0.0;  // least generalized eigenvalue against g ⊗ H
  VectorXc witness;
};

inline NakanoResult nakano_test(const CurvatureMatrix<Complex>& theta, const MatrixXc& h,
                                const SamplingConfig& cfg = {}, const MatrixXc* reference = nullptr) {
  require_positive_definite(h, "metric H");
  const int n = matrix_dim(theta);
  const int r = static_cast<int>(theta.size());
  MatrixXc g = reference ? *reference : MatrixXc::Identity(n, n);
  require_positive_definite(g, "reference metric");
  MatrixXc gh(n * r, n * r);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) gh.block(j * r, k * r, r, r) = g(j, k) * hermitian_part(h);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(nakano_matrix(theta, h), hermitian_part(gh));
  NakanoResult res;
  res.margin = es.eigenvalues()[0];
  res.witness = es.eigenvectors().col(0);
  res.verdict = classify(res.margin, cfg.tol);
  return res;
}

// ---------------------------------------------------------------------------

struct WeakPositivityResult {
  Sign verdict = Sign::indefinite;
  double margin = 0.0;  // min normalized pairing over sampled simple forms
  int samples = 0;
  bool sampled = false;  // false when decided exactly (k = n or k = 0)
};

/// i ξ ∧ ξ̄ for a (1,0)-covector ξ = Σ a_j dz_j.
inline Form<Complex> simple_positive_form(const VectorXc& a) {
  const int n = static_cast<int>(a.size());
  Form<Complex> out(n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      out += Form<Complex>::dzdzbar(n, j, k, Complex(0.0, 1.0) * a[j] * std::conj(a[k]));
  return out;
}

/// Weak positivity of a real (k,k)-form: the top-degree pairing with every
/// product of n-k simple positive (1,1)-forms is ≥ 0. Sampled for 0 < k < n;
/// exact for k = n (sign of the coefficient against the volume form) and k = 0.
inline WeakPositivityResult weak_positivity_test(const Form<Complex>& eta, int k,
                                                 const SamplingConfig& cfg = {}) {
  const int n = eta.dim();
  if (k < 0 || k > n || !eta.is_pure(k, k)) throw InputError("form is not of bidegree (k,k)");
  WeakPositivityResult res;
  if (k == n) {
    res.margin = top_coefficient(eta).real();
    res.verdict = classify(res.margin, cfg.tol);
    res.samples = 1;
    return res;
  }
  if (k == 0) {
    res.margin = eta.coefficient(0, 0).real();
    res.verdict = classify(res.margin, cfg.tol);
    res.samples = 1;
    return res;
  }
  const int m = n - k;
  // deterministic probes: wedges of coordinate forms i dz_j dz̄_j
  std::vector<std::vector<int>> coordinate_sets;
  for (Mask s = 0; s < (Mask(1) << n); ++s)
    if (popcount(s) == m) coordinate_sets.push_back(mask_indices(s));
  const int fixed = static_cast<int>(coordinate_sets.size());
  const int total = fixed + cfg.samples;
  std::vector<double> values(total);
  parallel_for(total, cfg.workers, [&](std::size_t i) {
    Form<Complex> probe = eta;
    double norm = 1.0;
    if (static_cast<int>(i) < fixed) {
      for (int j : coordinate_sets[i]) {
        VectorXc a = VectorXc::Zero(n);
        a[j] = 1.0;
        probe = wedge(probe, simple_positive_form(a));
      }
    } else {
      auto rng = sample_rng(cfg.seed, i);
      for (int l = 0; l < m; ++l) {
        VectorXc a = random_unit_vector(rng, n);
        probe = wedge(probe, simple_positive_form(a));
        norm *= a.squaredNorm();
      }
    }
    values[i] = top_coefficient(probe).real() / norm;
  });
  res.sampled = true;
  res.samples = total;
  res.margin = *std::min_element(values.begin(), values.end());
  res.verdict = classify(res.margin, cfg.tol);
  return res;
}

}  // namespace parachern
