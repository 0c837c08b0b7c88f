#pragma once

// Random curvature data. A Hermitian-symmetric Θ is the same thing as a
// Hermitian (nr)×(nr) coefficient matrix N_{(j a),(k b)} = R_{ab,jk}.

#include "parachern/forms.hpp"

#include <complex>
#include <random>

namespace testgen {

using parachern::Complex;
using parachern::CurvatureMatrix;
using parachern::ExactScalar;
using parachern::GaussRational;
using parachern::Rational;

inline Rational small_rational(std::mt19937_64& rng, int span = 4, int den = 3) {
  std::uniform_int_distribution<int> num(-span, span);
  std::uniform_int_distribution<int> d(1, den);
  return parachern::make_rational(num(rng), d(rng));
}

inline GaussRational small_gauss(std::mt19937_64& rng) {
  return {small_rational(rng), small_rational(rng)};
}

template <class S>
using Tensor4 = std::vector<std::vector<std::vector<std::vector<S>>>>;

template <class S>
Tensor4<S> empty_tensor(int r, int n) {
  return Tensor4<S>(r, std::vector<std::vector<std::vector<S>>>(
                           r, std::vector<std::vector<S>>(n, std::vector<S>(n))));
}

inline CurvatureMatrix<ExactScalar> random_exact_curvature(std::mt19937_64& rng, int r, int n) {
  auto R = empty_tensor<ExactScalar>(r, n);
  for (int a = 0; a < r; ++a)
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < r; ++b)
        for (int k = 0; k < n; ++k) {
          const int row = j * r + a, col = k * r + b;
          if (row > col) continue;
          GaussRational v = small_gauss(rng);
          if (row == col) v.im = 0;
          R[a][b][j][k] = ExactScalar(v);
          R[b][a][k][j] = ExactScalar(v.conj());
        }
  return parachern::curvature_from_coefficients(R, n);
}

inline CurvatureMatrix<Complex> random_complex_curvature(std::mt19937_64& rng, int r, int n,
                                                         double shift = 0.0) {
  std::normal_distribution<double> g;
  auto R = empty_tensor<Complex>(r, n);
  for (int a = 0; a < r; ++a)
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < r; ++b)
        for (int k = 0; k < n; ++k) {
          const int row = j * r + a, col = k * r + b;
          if (row > col) continue;
          Complex v(g(rng), g(rng));
          if (row == col) v = Complex(v.real() + shift, 0.0);
          R[a][b][j][k] = v;
          R[b][a][k][j] = std::conj(v);
        }
  return parachern::curvature_from_coefficients(R, n);
}

/// Diagonal Θ_aa = Σ_j d[a][j] dz_j ∧ dz̄_j.
template <class S>
CurvatureMatrix<S> diagonal_curvature(const std::vector<std::vector<S>>& d, int n) {
  const int r = static_cast<int>(d.size());
  auto theta = parachern::zero_matrix<S>(r, n);
  for (int a = 0; a < r; ++a)
    for (int j = 0; j < n; ++j) theta[a][a] += parachern::Form<S>::dzdzbar(n, j, j, d[a][j]);
  return theta;
}

}  // namespace testgen
