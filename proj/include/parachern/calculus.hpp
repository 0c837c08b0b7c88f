#pragma once

// Finite-difference complex derivatives and Gauss-Legendre quadrature helpers.

#include "parachern/scalar.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <Eigen/Dense>

#include <functional>
#include <numbers>
#include <vector>

namespace parachern {

using RealFunction = std::function<double(const std::vector<Complex>&)>;

/// Complex Hessian ∂_j∂̄_k f by centered differences of step h in real coordinates:
///   ∂_j∂̄_k = ¼[(f_{x_j x_k} + f_{y_j y_k}) + i(f_{x_j y_k} - f_{y_j x_k})].
inline Eigen::MatrixXcd complex_hessian(const RealFunction& f, const std::vector<Complex>& z, double h) {
  const int n = static_cast<int>(z.size());
  // real coordinate d: 2j -> x_j, 2j+1 -> y_j
  auto shifted = [&](int d1, double s1, int d2, double s2) {
    std::vector<Complex> p = z;
    auto bump = [&](int d, double s) {
      if (d < 0) return;
      p[d / 2] += (d % 2 == 0) ? Complex(s, 0.0) : Complex(0.0, s);
    };
    bump(d1, s1);
    bump(d2, s2);
    return f(p);
  };
  const double f0 = f(z);
  Eigen::MatrixXd d2(2 * n, 2 * n);
  for (int a = 0; a < 2 * n; ++a) {
    d2(a, a) = (shifted(a, h, -1, 0) - 2.0 * f0 + shifted(a, -h, -1, 0)) / (h * h);
    for (int b = a + 1; b < 2 * n; ++b) {
      const double v = (shifted(a, h, b, h) - shifted(a, h, b, -h) - shifted(a, -h, b, h) +
                        shifted(a, -h, b, -h)) /
                       (4.0 * h * h);
      d2(a, b) = v;
      d2(b, a) = v;
    }
  }
  Eigen::MatrixXcd out(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      out(j, k) = 0.25 * Complex(d2(2 * j, 2 * k) + d2(2 * j + 1, 2 * k + 1),
                                 d2(2 * j, 2 * k + 1) - d2(2 * j + 1, 2 * k));
  return out;
}

/// 20-point Gauss-Legendre rule on [a, b].
template <class Fn>
double gauss_legendre(Fn&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

struct RadialIntegral {
  double value = 0.0;
  double tail_estimate = 0.0;  // extrapolated contribution of the innermost disk
  std::vector<double> partial_sums;  // after each annulus, outermost first
};

/// ∫_{|z|<R} f(|z|) dA for a radial integrand that may be singular at 0 but
/// integrable: dyadic annuli [R 2^{-m-1}, R 2^{-m}] with Gauss-Legendre in r,
/// and the innermost disk estimated by geometric extrapolation of the last two
/// annulus contributions.
template <class Fn>
RadialIntegral radial_disk_integral(Fn&& f, double radius, int annuli = 60) {
  RadialIntegral out;
  std::vector<double> pieces;
  double outer = radius;
  for (int m = 0; m < annuli; ++m) {
    const double inner = outer / 2.0;
    pieces.push_back(gauss_legendre([&](double r) { return 2.0 * std::numbers::pi * r * f(r); }, inner, outer));
    out.value += pieces.back();
    out.partial_sums.push_back(out.value);
    outer = inner;
  }
  if (pieces.size() >= 2) {
    const double a = pieces[pieces.size() - 2], b = pieces.back();
    const double q = (a != 0.0) ? b / a : 0.0;
    if (q > 0.0 && q < 1.0) out.tail_estimate = b * q / (1.0 - q);
  }
  out.value += out.tail_estimate;
  return out;
}

}  // namespace parachern
