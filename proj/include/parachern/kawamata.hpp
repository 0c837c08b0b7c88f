#pragma once

// The local branched-cover model w1^N = z1 near a smooth divisor D = {z1 = 0}.
//
// Frame convention: for weights α_1 ≤ … ≤ α_r the i-th frame vector (0-based)
// pairs with α_{r-1-i}, and on the chosen branch z1^α = w1^{Nα}. With
// D(w) = diag(w1^{k'_i}), k'_i = N α_{r-1-i}, a metric H̃ upstairs induces
//   H(z) = D(w)^† H̃(w) D(w).
// H descends (is single valued in z) iff H̃ satisfies the deck relation
//   H̃_ij(ζ w1, w') = ζ^{k'_i - k'_j} H̃_ij(w),  ζ = e^{2πi/N}.

#include "parachern/calculus.hpp"
#include "parachern/forms.hpp"
#include "parachern/para_core.hpp"
#include "parachern/parallel.hpp"
#include "parachern/positivity.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <tuple>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace parachern {

using Point = std::vector<Complex>;
using MatrixFunction = std::function<MatrixXc(const Point&)>;

enum class Branch {
  principal,  // arg z1 in (-π, π], cut along the negative real axis
  rotated     // arg z1 in (-3π/2, π/2], cut along the positive imaginary axis
};

inline Complex nth_root(Complex z, int N, Branch branch = Branch::principal) {
  double theta = std::arg(z);
  if (branch == Branch::rotated && theta > std::numbers::pi / 2) theta -= 2.0 * std::numbers::pi;
  return std::polar(std::pow(std::abs(z), 1.0 / N), theta / N);
}

inline Complex deck_root(int N) { return std::polar(1.0, 2.0 * std::numbers::pi / N); }

/// w(z) on the given branch: (z1^{1/N}, z2, …).
inline Point cover_point(const Point& z, int N, Branch branch = Branch::principal) {
  Point w = z;
  w[0] = nth_root(z[0], N, branch);
  return w;
}

/// z(w) = (w1^N, w2, …).
inline Point base_point(const Point& w, int N) {
  Point z = w;
  z[0] = std::pow(w[0], N);
  return z;
}

struct LocalChart {
  int n = 1;          // complex dimension
  int cover = 1;      // N
  double rho = 0.5;   // polydisk radius in z
  int annuli = 8;     // K: |w1| = rho^{1/N} 2^{-k}, k < K
  int angular = 16;   // angles per annulus, offset by half a step from the cut
  int slices = 2;     // transverse sample values of z' when n >= 2

  void validate() const {
    if (n < 1) throw InputError("chart dimension must be positive");
    if (cover < 1) throw InputError("cover degree must be positive");
    if (!(rho > 0.0 && rho < 1.0)) throw InputError("chart radius must lie in (0,1)");
    if (angular < 4) throw InputError("need at least 4 angular samples");
    if (annuli < 1) throw InputError("need at least one annulus");
  }

  double w_radius(int k) const { return std::pow(rho, 1.0 / cover) * std::ldexp(1.0, -k); }
  double angle(int j) const {
    return -std::numbers::pi + (j + 0.5) * 2.0 * std::numbers::pi / angular;
  }
};

struct SamplePoint {
  int annulus = 0, angle = 0, slice = 0;
  Point z, w;  // w on the principal branch
};

inline Point transverse_slice(const LocalChart& chart, int s) {
  Point zp(chart.n - 1);
  for (int i = 0; i < chart.n - 1; ++i) {
    if (s == 0) zp[i] = 0.0;
    else zp[i] = std::polar(chart.rho * 0.5 * s / std::max(1, chart.slices - 1), 0.7 * (i + 1) * s);
  }
  return zp;
}

inline std::vector<SamplePoint> sample_points(const LocalChart& chart) {
  chart.validate();
  std::vector<SamplePoint> out;
  const int slices = chart.n >= 2 ? chart.slices : 1;
  for (int k = 0; k < chart.annuli; ++k)
    for (int j = 0; j < chart.angular; ++j)
      for (int s = 0; s < slices; ++s) {
        SamplePoint p;
        p.annulus = k;
        p.angle = j;
        p.slice = s;
        const double rz = std::pow(chart.w_radius(k), chart.cover);
        p.z.push_back(std::polar(rz, chart.angle(j)));
        Point zp = transverse_slice(chart, s);
        p.z.insert(p.z.end(), zp.begin(), zp.end());
        p.w = cover_point(p.z, chart.cover);
        out.push_back(std::move(p));
      }
  return out;
}

/// k'_i = N α_{r-1-i}; every weight must have denominator dividing N.
inline std::vector<int> frame_exponents(const std::vector<Rational>& weights, int N) {
  const int r = static_cast<int>(weights.size());
  std::vector<int> k(r);
  for (int i = 0; i < r; ++i) {
    const Rational& a = weights[r - 1 - i];
    if (a < 0 || a >= 1) throw InputError("weight " + to_string(a) + " outside [0,1)");
    if (i > 0 && weights[r - 1 - i] > weights[r - i]) throw InputError("weights must be nondecreasing");
    Rational e = a * N;
    if (boost::multiprecision::denominator(e) != 1)
      throw InputError("weight " + to_string(a) + " is not a multiple of 1/" + std::to_string(N));
    k[i] = boost::multiprecision::numerator(e).convert_to<int>();
  }
  return k;
}

inline MatrixXc frame_factor(Complex w1, const std::vector<int>& k) {
  const int r = static_cast<int>(k.size());
  MatrixXc d = MatrixXc::Zero(r, r);
  for (int i = 0; i < r; ++i) d(i, i) = std::pow(w1, k[i]);
  return d;
}

inline MatrixXc frame_factor_inverse(Complex w1, const std::vector<int>& k) {
  const int r = static_cast<int>(k.size());
  MatrixXc d = MatrixXc::Zero(r, r);
  for (int i = 0; i < r; ++i) d(i, i) = std::pow(w1, -k[i]);
  return d;
}

/// Phase factors ζ^{k'_i - k'_j} of the deck relation.
inline MatrixXc deck_phases(const std::vector<int>& k, int N, int power = 1) {
  const int r = static_cast<int>(k.size());
  MatrixXc p(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      p(i, j) = std::polar(1.0, 2.0 * std::numbers::pi * power * (k[i] - k[j]) / N);
  return p;
}

/// Largest relative violation of the deck relation over the given cover points.
inline double deck_defect(const MatrixFunction& htilde, const std::vector<int>& k, int N,
                          const std::vector<Point>& ws) {
  const MatrixXc phase = deck_phases(k, N);
  const Complex zeta = deck_root(N);
  double worst = 0.0;
  for (const auto& w : ws) {
    Point rw = w;
    rw[0] *= zeta;
    MatrixXc a = htilde(w);
    MatrixXc b = htilde(rw);
    const double scale = std::max(1e-300, a.norm());
    worst = std::max(worst, (b - phase.cwiseProduct(a)).norm() / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Metric fields

struct LocalMetricField {
  LocalChart chart;
  std::vector<Rational> weights;
  MatrixFunction downstairs;  // z ↦ H(z), single valued away from D
  std::vector<SamplePoint> points;
  std::vector<MatrixXc> values;  // H at points
};

/// Samples a downstairs metric on the chart grid.
inline LocalMetricField sample_metric(MatrixFunction h, std::vector<Rational> weights, const LocalChart& chart) {
  frame_exponents(weights, chart.cover);
  LocalMetricField f;
  f.chart = chart;
  f.weights = std::move(weights);
  f.downstairs = std::move(h);
  f.points = sample_points(chart);
  f.values.reserve(f.points.size());
  for (const auto& p : f.points) {
    MatrixXc v = f.downstairs(p.z);
    if (v.rows() != static_cast<int>(f.weights.size()) || v.cols() != v.rows())
      throw InputError("metric values do not match the rank");
    f.values.push_back(std::move(v));
  }
  return f;
}

/// H(z) = D^† H̃(w(z)) D on the requested branch.
inline MatrixXc descend_value(const MatrixFunction& htilde, const std::vector<int>& k, int N, const Point& z,
                              Branch branch = Branch::principal) {
  Point w = cover_point(z, N, branch);
  MatrixXc d = frame_factor(w[0], k);
  return d.adjoint() * htilde(w) * d;
}

/// Descends a smooth deck-invariant metric H̃ to the punctured chart. Rejects
/// inputs that violate the deck relation (relative tolerance `tol`) or are not
/// positive definite at a sample.
inline LocalMetricField descend_metric(MatrixFunction htilde, std::vector<Rational> weights,
                                       const LocalChart& chart, double tol = 1e-8) {
  const std::vector<int> k = frame_exponents(weights, chart.cover);
  auto pts = sample_points(chart);
  std::vector<Point> ws;
  for (const auto& p : pts) ws.push_back(p.w);
  const double defect = deck_defect(htilde, k, chart.cover, ws);
  if (defect > tol)
    throw InputError("upstairs metric violates the deck relation (relative defect " +
                     std::to_string(defect) + ")");
  for (const auto& w : ws) {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(hermitian_part(htilde(w)), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()[0] <= 0.0) throw InputError("upstairs metric is not positive definite");
  }
  const int N = chart.cover;
  MatrixFunction down = [htilde, k, N](const Point& z) { return descend_value(htilde, k, N, z); };
  return sample_metric(std::move(down), std::move(weights), chart);
}

/// H̃(w) = D(w)^{-†} H(z(w)) D(w)^{-1}, for any w off the divisor.
inline MatrixXc lift_value(const MatrixFunction& h, const std::vector<int>& k, int N, const Point& w) {
  MatrixXc di = frame_factor_inverse(w[0], k);
  return di.adjoint() * h(base_point(w, N)) * di;
}

/// Max relative difference between H(z) computed through the principal and the
/// rotated branch of z1^{1/N}.
inline double branch_deviation(const MatrixFunction& htilde, const std::vector<Rational>& weights,
                               const LocalChart& chart) {
  const std::vector<int> k = frame_exponents(weights, chart.cover);
  double worst = 0.0;
  for (const auto& p : sample_points(chart)) {
    MatrixXc a = descend_value(htilde, k, chart.cover, p.z, Branch::principal);
    MatrixXc b = descend_value(htilde, k, chart.cover, p.z, Branch::rotated);
    worst = std::max(worst, (a - b).norm() / std::max(1e-300, a.norm()));
  }
  return worst;
}

/// Random smooth deck-invariant metric: H̃ = F^†F + μ Id with
/// F_lj = a_lj w̄1^{(k'_j + c_l) mod N} (1 + b_lj w2).
inline MatrixFunction random_invariant_metric(std::uint64_t seed, const std::vector<Rational>& weights, int N,
                                              int n, double mu = 0.5) {
  const std::vector<int> k = frame_exponents(weights, N);
  const int r = static_cast<int>(k.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> shift(0, N - 1);
  MatrixXc a(r, r), b(r, r);
  std::vector<int> c(r);
  for (int l = 0; l < r; ++l) {
    c[l] = shift(rng);
    for (int j = 0; j < r; ++j) {
      a(l, j) = Complex(g(rng), g(rng));
      b(l, j) = 0.5 * Complex(g(rng), g(rng));
    }
  }
  return [=](const Point& w) {
    MatrixXc f(r, r);
    for (int l = 0; l < r; ++l)
      for (int j = 0; j < r; ++j) {
        const int e = ((k[j] + c[l]) % N + N) % N;
        Complex v = a(l, j) * std::pow(std::conj(w[0]), e);
        if (n >= 2) v *= (1.0 + b(l, j) * w[1]);
        f(l, j) = v;
      }
    return MatrixXc(f.adjoint() * f + mu * MatrixXc::Identity(r, r));
  };
}

// ---------------------------------------------------------------------------
// Admissibility

struct AdmissibilityConfig {
  double invariance_tol = 1e-8;   // relative
  double positivity_margin = 1e-10;
  double growth_ratio = 2.0;      // allowed tail/reference growth of sup norms
  double step_fraction = 0.25;    // finite-difference step relative to |w1|
  double floor = 1e-6;            // absolute floor (relative to the value scale)
};

struct AnnulusDiagnostics {
  int annulus = 0;
  double w_radius = 0.0;
  double max_value = 0.0;    // sup ‖H̃‖
  double max_first = 0.0;    // sup of first centered differences in w1
  double max_second = 0.0;   // sup of second centered differences in w1
  double min_eigenvalue = 0.0;
};

struct AdmissibilityReport {
  bool admissible = false;
  bool bounded = false;
  bool bounded_derivatives = false;
  bool positive = false;
  bool cut_consistent = false;
  std::vector<AnnulusDiagnostics> annuli;
  std::vector<MatrixXc> lifted;  // H̃ at the field's sample points
  double cut_jump = 0.0;         // max deck-corrected jump across the cut
  double cut_reference = 0.0;    // max jump between neighbouring angular samples
  std::vector<std::string> reasons;
};

inline AdmissibilityReport admissibility_check(const LocalMetricField& field, const AdmissibilityConfig& cfg = {}) {
  const LocalChart& chart = field.chart;
  if (chart.annuli < 4) throw InputError("admissibility needs at least 4 annuli");
  const int N = chart.cover;
  const std::vector<int> k = frame_exponents(field.weights, N);
  const int K = chart.annuli;

  AdmissibilityReport rep;
  rep.annuli.resize(K);
  for (int a = 0; a < K; ++a) {
    rep.annuli[a].annulus = a;
    rep.annuli[a].w_radius = chart.w_radius(a);
    rep.annuli[a].min_eigenvalue = std::numeric_limits<double>::infinity();
  }
  const std::size_t count = field.points.size();
  rep.lifted.resize(count);
  struct Local {
    double value, first, second, eig;
  };
  std::vector<Local> local(count);
  parallel_for(count, 1, [&](std::size_t i) {
    const auto& p = field.points[i];
    MatrixXc di = frame_factor_inverse(p.w[0], k);
    MatrixXc lifted = di.adjoint() * field.values[i] * di;
    rep.lifted[i] = lifted;
    const double h = cfg.step_fraction * std::abs(p.w[0]);
    double first = 0.0, second = 0.0;
    for (Complex dir : {Complex(1.0, 0.0), Complex(0.0, 1.0)}) {
      Point wp = p.w, wm = p.w;
      wp[0] += h * dir;
      wm[0] -= h * dir;
      MatrixXc fp = lift_value(field.downstairs, k, N, wp);
      MatrixXc fm = lift_value(field.downstairs, k, N, wm);
      first = std::max(first, (fp - fm).norm() / (2.0 * h));
      second = std::max(second, (fp - 2.0 * lifted + fm).norm() / (h * h));
    }
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(hermitian_part(lifted), Eigen::EigenvaluesOnly);
    local[i] = {lifted.norm(), first, second, es.eigenvalues()[0]};
  });
  for (std::size_t i = 0; i < count; ++i) {
    auto& d = rep.annuli[field.points[i].annulus];
    d.max_value = std::max(d.max_value, local[i].value);
    d.max_first = std::max(d.max_first, local[i].first);
    d.max_second = std::max(d.max_second, local[i].second);
    d.min_eigenvalue = std::min(d.min_eigenvalue, local[i].eig);
  }

  // Reference: the outer half of the annuli; tail: the inner half.
  const int mid = K / 2;
  auto sup = [&](auto member, int lo, int hi) {
    double m = 0.0;
    for (int a = lo; a < hi; ++a) m = std::max(m, rep.annuli[a].*member);
    return m;
  };
  const double value_ref = sup(&AnnulusDiagnostics::max_value, 0, mid);
  const double floor = cfg.floor * std::max(1.0, value_ref);
  auto grows = [&](auto member) {
    const double ref = sup(member, 0, mid);
    const double tail = sup(member, mid, K);
    return tail > cfg.growth_ratio * ref + floor;
  };
  rep.bounded = !grows(&AnnulusDiagnostics::max_value);
  rep.bounded_derivatives = !grows(&AnnulusDiagnostics::max_first) && !grows(&AnnulusDiagnostics::max_second);
  if (!rep.bounded) rep.reasons.push_back("lifted metric grows towards the divisor");
  if (!rep.bounded_derivatives) rep.reasons.push_back("lifted metric derivatives grow towards the divisor");

  const double eig_last = rep.annuli[K - 1].min_eigenvalue;
  const double eig_mid = rep.annuli[mid].min_eigenvalue;
  rep.positive = eig_last >= cfg.positivity_margin && eig_last >= 0.5 * eig_mid;
  if (!rep.positive) rep.reasons.push_back("least eigenvalue degenerates towards the divisor");

  // Across the cut: the sample just above the negative real axis, continued
  // through the cut, lands on ζ·(sample just below) upstairs.
  const MatrixXc phase = deck_phases(k, N);
  const int M = chart.angular;
  std::map<std::tuple<int, int, int>, std::size_t> index;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = field.points[i];
    index[{p.annulus, p.angle, p.slice}] = i;
  }
  double cut = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = field.points[i];
    if (p.angle + 1 < M) {
      const std::size_t nb = index.at({p.annulus, p.angle + 1, p.slice});
      ref = std::max(ref, (rep.lifted[nb] - rep.lifted[i]).norm());
    } else {
      const std::size_t below = index.at({p.annulus, 0, p.slice});
      MatrixXc continued = phase.cwiseProduct(rep.lifted[below]);
      cut = std::max(cut, (continued - rep.lifted[i]).norm());
    }
  }
  rep.cut_jump = cut;
  rep.cut_reference = ref;
  rep.cut_consistent = cut <= 2.0 * ref + cfg.invariance_tol * std::max(1.0, value_ref);
  if (!rep.cut_consistent) rep.reasons.push_back("lifted metric jumps across the branch cut");

  rep.admissible = rep.bounded && rep.bounded_derivatives && rep.positive && rep.cut_consistent;
  return rep;
}

/// Re-checks admissibility on the cover of degree uN, where the weights become
/// integer exponents u·k'.
inline AdmissibilityReport rebase_cover(const LocalMetricField& field, int u, const AdmissibilityConfig& cfg = {}) {
  if (u < 1) throw InputError("rebase factor must be at least 1");
  LocalChart chart = field.chart;
  chart.cover *= u;
  return admissibility_check(sample_metric(field.downstairs, field.weights, chart), cfg);
}

// ---------------------------------------------------------------------------
// Curvature and forms

using CurvatureFunction = std::function<CurvatureMatrix<Complex>(const Point&)>;
using FormFunction = std::function<Form<Complex>(const Point&)>;

/// Jacobian of w(z): dw1 = (w1 / (N z1)) dz1, dw_i = dz_i.
inline std::vector<std::vector<Complex>> cover_jacobian(const Point& z, const Point& w, int N) {
  const int n = static_cast<int>(z.size());
  std::vector<std::vector<Complex>> jac(n, std::vector<Complex>(n, 0.0));
  jac[0][0] = w[0] / (static_cast<double>(N) * z[0]);
  for (int i = 1; i < n; ++i) jac[i][i] = 1.0;
  return jac;
}

/// Jacobian of z(w): dz1 = N w1^{N-1} dw1.
inline std::vector<std::vector<Complex>> base_jacobian(const Point& w, int N) {
  const int n = static_cast<int>(w.size());
  std::vector<std::vector<Complex>> jac(n, std::vector<Complex>(n, 0.0));
  jac[0][0] = static_cast<double>(N) * std::pow(w[0], N - 1);
  for (int i = 1; i < n; ++i) jac[i][i] = 1.0;
  return jac;
}

/// D^{-1} Θ D for D = diag(w1^{k'}); works in exact and float mode.
template <class S>
CurvatureMatrix<S> frame_conjugate(const CurvatureMatrix<S>& theta, const std::vector<int>& k, const S& w1,
                                   const S& w1_inv) {
  using T = ScalarTraits<S>;
  const int r = static_cast<int>(k.size());
  auto power = [&](int e) {
    S out = T::one();
    const S& base = e >= 0 ? w1 : w1_inv;
    for (int i = 0; i < std::abs(e); ++i) out = out * base;
    return out;
  };
  std::vector<std::vector<S>> d(r, std::vector<S>(r, T::zero())), di = d;
  for (int i = 0; i < r; ++i) {
    d[i][i] = power(k[i]);
    di[i][i] = power(-k[i]);
  }
  return conjugate_curvature(theta, di, d);
}

/// Θ_H(z) = D^{-1} (w*Θ̃)(z) D at one downstairs point.
inline CurvatureMatrix<Complex> curvature_descend_at(const CurvatureFunction& theta_tilde,
                                                     const std::vector<int>& k, int N, const Point& z,
                                                     Branch branch = Branch::principal) {
  const Point w = cover_point(z, N, branch);
  CurvatureMatrix<Complex> up = theta_tilde(w);
  const int n = static_cast<int>(z.size());
  const auto jac = cover_jacobian(z, w, N);
  for (auto& row : up)
    for (auto& f : row) f = pullback_linear(f, jac, n);
  return frame_conjugate<Complex>(up, k, w[0], 1.0 / w[0]);
}

inline std::vector<CurvatureMatrix<Complex>> curvature_descend(const CurvatureFunction& theta_tilde,
                                                               const std::vector<Rational>& weights,
                                                               const LocalChart& chart) {
  const std::vector<int> k = frame_exponents(weights, chart.cover);
  std::vector<CurvatureMatrix<Complex>> out;
  for (const auto& p : sample_points(chart)) out.push_back(curvature_descend_at(theta_tilde, k, chart.cover, p.z));
  return out;
}

/// Largest coefficient defect of ρ*η̃ - η̃ where ρ is the deck rotation.
inline double form_deck_defect(const FormFunction& eta_tilde, int N, const std::vector<Point>& ws) {
  double worst = 0.0;
  const Complex zeta = deck_root(N);
  for (const auto& w : ws) {
    Point rw = w;
    rw[0] *= zeta;
    const int n = static_cast<int>(w.size());
    std::vector<std::vector<Complex>> jac(n, std::vector<Complex>(n, 0.0));
    jac[0][0] = zeta;
    for (int i = 1; i < n; ++i) jac[i][i] = 1.0;
    Form<Complex> a = eta_tilde(w);
    Form<Complex> b = pullback_linear(eta_tilde(rw), jac, n);
    worst = std::max(worst, max_abs(b - a) / std::max(1.0, max_abs(a)));
  }
  return worst;
}

/// Descent of an invariant form: η(z) = (w*η̃)(z) = η̃(w(z)) rewritten through
/// dw1 = (1/N) z1^{1/N - 1} dz1. Blocks with dw1 pick up z1^{1/N-1}/N, with dw̄1
/// the conjugate factor, with both |z1|^{2/N-2}/N².
inline Form<Complex> descend_form_at(const FormFunction& eta_tilde, int N, const Point& z,
                                     Branch branch = Branch::principal) {
  const Point w = cover_point(z, N, branch);
  return pullback_linear(eta_tilde(w), cover_jacobian(z, w, N), static_cast<int>(z.size()));
}

inline std::vector<Form<Complex>> descend_form(const FormFunction& eta_tilde, const LocalChart& chart,
                                               double tol = 1e-8) {
  auto pts = sample_points(chart);
  std::vector<Point> ws;
  for (const auto& p : pts) ws.push_back(p.w);
  const double defect = form_deck_defect(eta_tilde, chart.cover, ws);
  if (defect > tol)
    throw InputError("form is not invariant under the deck rotation (defect " + std::to_string(defect) + ")");
  std::vector<Form<Complex>> out;
  for (const auto& p : pts) out.push_back(descend_form_at(eta_tilde, chart.cover, p.z));
  return out;
}

/// z*η: pulls a downstairs form back to the cover.
inline Form<Complex> pullback_to_cover(const FormFunction& eta, int N, const Point& w) {
  return pullback_linear(eta(base_point(w, N)), base_jacobian(w, N), static_cast<int>(w.size()));
}

/// Coefficients of the pullback of i Σ g̃_ab dw_a dw̄_b along w(z):
/// g_jk = Σ J_aj g̃_ab conj(J_bk).
inline MatrixXc pullback_coefficients(const MatrixXc& g_tilde, const std::vector<std::vector<Complex>>& jac) {
  const int n = static_cast<int>(jac.size());
  MatrixXc j(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) j(a, b) = jac[a][b];
  return j.transpose() * g_tilde * j.conjugate();
}

// ---------------------------------------------------------------------------
// Cone metrics

/// Coefficient matrix g with ω = i Σ g_jk dz_j dz̄_k for the model
/// |z1|^{-α} dz1 dz̄1 + Σ_{i≥2} dz_i dz̄_i.
inline MatrixXc cone_coefficients(double alpha, const Point& z) {
  if (!(alpha >= 0.0 && alpha < 2.0)) throw InputError("cone angle parameter must lie in [0,2)");
  const int n = static_cast<int>(z.size());
  MatrixXc g = MatrixXc::Identity(n, n);
  g(0, 0) = std::pow(std::abs(z[0]), -alpha);
  return g;
}

inline Form<Complex> cone_metric_at(double alpha, const Point& z) {
  MatrixXc g = cone_coefficients(alpha, z);
  const int n = static_cast<int>(z.size());
  std::vector<std::vector<Complex>> gg(n, std::vector<Complex>(n));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) gg[j][k] = g(j, k);
  return kahler_form(gg);
}

inline std::vector<Form<Complex>> cone_metric(double alpha, const LocalChart& chart) {
  if (!(alpha >= 0.0 && alpha < 2.0)) throw InputError("cone angle parameter must lie in [0,2)");
  std::vector<Form<Complex>> out;
  for (const auto& p : sample_points(chart)) out.push_back(cone_metric_at(alpha, p.z));
  return out;
}

struct AdmissibleKahler {
  double k_min = 0.0;        // smallest k with kω + i∂∂̄ψ ≥ 0 at every sample
  double k = 0.0;            // the k used for `coefficients`
  std::vector<MatrixXc> coefficients;  // g of kω + i∂∂̄ψ per sample
  double cone_dominance = 0.0;  // min over samples of λ_min(cone^{-1/2} g cone^{-1/2})
};

/// kω + i∂∂̄ (|z1|² h_D)^{(2-α)/2} on the chart samples. The complex Hessian is
/// taken by finite differences with step 1e-3 |z1|. When k <= 0 the constructor
/// uses k = 2·k_min + 1.
inline AdmissibleKahler make_admissible_kahler(const MatrixFunction& omega, const RealFunction& h_divisor,
                                               double alpha, double k, const LocalChart& chart) {
  if (!(alpha >= 0.0 && alpha < 2.0)) throw InputError("cone angle parameter must lie in [0,2)");
  const double beta = (2.0 - alpha) / 2.0;
  RealFunction psi = [&](const Point& z) {
    const double hd = h_divisor(z);
    if (!(hd > 0.0)) throw InputError("divisor metric must be positive");
    return std::pow(std::norm(z[0]) * hd, beta);
  };
  auto pts = sample_points(chart);
  std::vector<MatrixXc> hess(pts.size()), om(pts.size());
  AdmissibleKahler out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& z = pts[i].z;
    hess[i] = complex_hessian(psi, z, 1e-3 * std::abs(z[0]));
    om[i] = omega(z);
    require_positive_definite(om[i], "background Kahler form");
    // k must exceed the largest generalized eigenvalue of -Hess ψ against ω
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(hermitian_part(-hess[i]), hermitian_part(om[i]),
                                                          Eigen::EigenvaluesOnly);
    out.k_min = std::max(out.k_min, es.eigenvalues().maxCoeff());
  }
  out.k = k > 0.0 ? k : 2.0 * out.k_min + 1.0;
  out.cone_dominance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    MatrixXc g = out.k * om[i] + hess[i];
    out.coefficients.push_back(g);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(hermitian_part(g), cone_coefficients(alpha, pts[i].z),
                                                          Eigen::EigenvaluesOnly);
    out.cone_dominance = std::min(out.cone_dominance, es.eigenvalues().minCoeff());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parabolic line metrics and their curvature currents

/// -(i/2π)∂∂̄ ln h as a form, from a finite-difference Hessian.
inline Form<Complex> chern_form_of_line(const RealFunction& h, const Point& p, double step) {
  RealFunction logh = [&](const Point& q) {
    const double v = h(q);
    if (!(v > 0.0)) throw InputError("line metric must be positive");
    return std::log(v);
  };
  MatrixXc hs = complex_hessian(logh, p, step);
  const int n = static_cast<int>(p.size());
  Form<Complex> out(n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      out += Form<Complex>::dzdzbar(n, j, k, -hs(j, k) * ScalarTraits<Complex>::chern_kappa());
  return out;
}

/// The real density ρ with η = ρ · (Lebesgue measure) for a top-degree form.
inline double top_density(const Form<Complex>& eta) {
  // vol = Π i dz dz̄ = 2^n dA
  return std::ldexp(top_coefficient(eta).real(), eta.dim());
}

struct LineCurrentResult {
  int cover = 1;
  Rational divisor_mass;                 // α, the coefficient of [D]
  std::vector<Form<Complex>> smooth_part;  // c1(h) + α[D] at chart samples
  RadialIntegral weight_integral;        // ∫_{|z1|<1} |z1|^{2/N-2} dA
  double weight_closed_form = 0.0;       // πN
  double smooth_mass = 0.0;              // ∫_{|z1|<ρ} of the smooth part (n = 1)
  double upstairs_mass = 0.0;            // ∫_{|w1|<ρ^{1/N}} c1(h̃) (n = 1)
};

/// For an admissible line metric h(z) = h̃(w)|z1|^{2α}, c1(h) + α[D] is the
/// descent of c1(h̃), an L¹ form whose dw1∧dw̄1 block carries |z1|^{2/N-2}/N².
inline LineCurrentResult line_current_decomposition(const RealFunction& h_tilde, const Rational& alpha,
                                                    const LocalChart& chart, double step = 1e-4) {
  const int N = chart.cover;
  frame_exponents({alpha}, N);
  LineCurrentResult out;
  out.cover = N;
  out.divisor_mass = alpha;
  FormFunction up = [&](const Point& w) { return chern_form_of_line(h_tilde, w, step); };
  for (const auto& p : sample_points(chart)) out.smooth_part.push_back(descend_form_at(up, N, p.z));
  out.weight_integral =
      radial_disk_integral([&](double r) { return std::pow(r, 2.0 / N - 2.0); }, 1.0, 60);
  out.weight_closed_form = std::numbers::pi * N;
  if (chart.n == 1) {
    // angular average by the trapezoid rule, radial by dyadic Gauss-Legendre
    const int angles = 64;
    auto ring_average = [&](double r, bool downstairs) {
      double acc = 0.0;
      for (int j = 0; j < angles; ++j) {
        const double th = -std::numbers::pi + (j + 0.5) * 2.0 * std::numbers::pi / angles;
        Point q{std::polar(r, th)};
        acc += downstairs ? top_density(descend_form_at(up, N, q)) : top_density(up(q));
      }
      return acc / angles;
    };
    out.smooth_mass = radial_disk_integral([&](double r) { return ring_average(r, true); }, chart.rho, 40).value;
    out.upstairs_mass =
        radial_disk_integral([&](double r) { return ring_average(r, false); }, std::pow(chart.rho, 1.0 / N), 40)
            .value;
  }
  return out;
}

struct BoundaryResidual {
  std::vector<double> radii;
  std::vector<double> residuals;  // |∮_{|z1|=ε} f γ|
  double slope = 0.0;             // least-squares slope of log residual vs log ε
};

/// For γ̃ = a(w) dw + b(w) dw̄ invariant on the cover (n = 1), pairs the descended
/// γ with the smooth test function f on circles |z| = ε.
inline BoundaryResidual boundary_residual(const std::function<std::pair<Complex, Complex>(Complex)>& gamma_tilde,
                                          int N, const std::function<Complex(Complex)>& test,
                                          const std::vector<double>& radii, int angles = 256) {
  BoundaryResidual out;
  out.radii = radii;
  for (double eps : radii) {
    Complex acc = 0.0;
    for (int j = 0; j < angles; ++j) {
      const double th = -std::numbers::pi + (j + 0.5) * 2.0 * std::numbers::pi / angles;
      const Complex z = std::polar(eps, th);
      const Complex w = nth_root(z, N);
      const Complex dw_dz = w / (static_cast<double>(N) * z);
      auto [a, b] = gamma_tilde(w);
      // dz = i z dθ, dz̄ = -i z̄ dθ
      const Complex integrand = test(z) * (a * dw_dz * Complex(0.0, 1.0) * z +
                                           b * std::conj(dw_dz) * Complex(0.0, -1.0) * std::conj(z));
      acc += integrand;
    }
    acc *= 2.0 * std::numbers::pi / angles;
    out.residuals.push_back(std::abs(acc));
  }
  // least squares on (log ε, log residual)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double x = std::log(radii[i]), y = std::log(out.residuals[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return out;
}

// ---------------------------------------------------------------------------
// Bott-Chern transgression for line metrics

struct BottChernResult {
  std::vector<double> potential;            // φ = ln(h1/h2) at the points
  std::vector<Form<Complex>> ddc_potential;  // (i/2π)∂∂̄φ by finite differences
};

inline BottChernResult bott_chern_line(const RealFunction& h1, const RealFunction& h2,
                                       const std::vector<Point>& points, double step) {
  RealFunction phi = [&](const Point& w) {
    const double a = h1(w), b = h2(w);
    if (!(a > 0.0) || !(b > 0.0)) throw InputError("line metrics must be positive");
    return std::log(a / b);
  };
  BottChernResult out;
  for (const auto& w : points) {
    out.potential.push_back(phi(w));
    MatrixXc hs = complex_hessian(phi, w, step);
    const int n = static_cast<int>(w.size());
    Form<Complex> f(n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        f += Form<Complex>::dzdzbar(n, j, k, hs(j, k) * ScalarTraits<Complex>::chern_kappa());
    out.ddc_potential.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ample parabolic lines on the projective line

struct LinePositivity {
  double margin = 0.0;  // min over samples of c1(h_par) / ω_FS away from D
  bool positive = false;
  int samples = 0;
};

/// Divisor points on P¹ for the model's labels, in label order: 0.8·e^{2πij/m}.
inline std::vector<Complex> default_divisor_positions(const ParabolicModel& m) {
  std::vector<Complex> out;
  const int count = static_cast<int>(m.point_count());
  for (int j = 0; j < count; ++j) out.push_back(std::polar(0.8, 2.0 * std::numbers::pi * j / std::max(1, count)));
  return out;
}

/// Builds h_par = (1+|z|²)^{-d} Π (|z-p_j|²/(1+|z|²))^{α_j} for a parabolic line of
/// degree d on P¹ and measures c1(h_par)/ω_FS away from D by finite differences.
inline LinePositivity parabolic_line_positivity(const ParabolicModel& m, const std::vector<Complex>& positions,
                                                double tol = 1e-5) {
  if (m.rank != 1) throw Unsupported("the ample-line construction is for rank 1");
  if (positions.size() != m.point_count()) throw InputError("one position per divisor point is required");
  std::vector<double> alphas;
  for (const auto& [label, ws] : m.points) alphas.push_back(to_double(ws[0]));
  const double d = static_cast<double>(m.degree);
  RealFunction h = [&](const Point& z) {
    const double q = 1.0 + std::norm(z[0]);
    double v = std::pow(q, -d);
    for (std::size_t j = 0; j < positions.size(); ++j) v *= std::pow(std::norm(z[0] - positions[j]) / q, alphas[j]);
    return v;
  };
  LinePositivity out;
  out.margin = std::numeric_limits<double>::infinity();
  auto ratio = [&](Complex z, double step) {
    const double c1 = (chern_form_of_line(h, {z}, step).coefficient(1, 1) /
                       ScalarTraits<Complex>::chern_kappa()).real();
    return c1 * std::pow(1.0 + std::norm(z), 2);  // ω_FS density is (1+|z|²)^{-2}
  };
  for (int a = 0; a < 12; ++a)
    for (int b = 0; b < 24; ++b) {
      const Complex z = std::polar(0.15 + 0.25 * a, 2.0 * std::numbers::pi * (b + 0.25) / 24);
      bool near = false;
      for (const auto& p : positions) near = near || std::abs(z - p) < 0.25;
      if (near) continue;
      // Richardson step: the log|z-p|² factors are harmonic but their stencil error is not
      const double step = 2e-3;
      const double value = (4.0 * ratio(z, step / 2) - ratio(z, step)) / 3.0;
      out.margin = std::min(out.margin, value);
      ++out.samples;
    }
  out.positive = out.margin > tol;
  return out;
}

}  // namespace parachern
