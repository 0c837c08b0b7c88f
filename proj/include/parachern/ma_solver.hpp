#pragma once

// Complex Monge–Ampère equation for a conformal change G = H·e^{-φ} of a rank-r
// Hermitian metric on the flat torus C²/Z⁴:
//
//   r(r+1)/2 · ω_φ² = F,   ω_φ = c1(H)/r + ddᶜφ,   F = η + (2r·c2(H) − (r−1)·c1(H)²)/(2r).
//
// Fields are stored per node. A real (1,1)-form i·Σ g_jk dz_j ∧ dz̄_k is stored
// as its Hermitian coefficient matrix g, and a (2,2)-form as its coefficient
// against vol = (i dz1∧dz̄1)∧(i dz2∧dz̄2). With these conventions
// (i·Σ w_jk dz_j∧dz̄_k)² = 2·det(w)·vol and ddᶜφ has matrix ∂_j∂̄_kφ / 2π,
// so the equation reads r(r+1)·det(W) = F with W = g/r + Φ/2π.

#include "parachern/errors.hpp"
#include "parachern/forms.hpp"
#include "parachern/parallel.hpp"
#include "parachern/torus.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace parachern {

struct MAProblem {
  int rank = 2;
  TorusGrid grid;
  std::vector<Matrix2c> c1;   // c1(H) coefficient matrix per node
  std::vector<double> c2;     // c2(H) density per node
  std::vector<double> eta;    // target density per node
  double eta_scale = 1.0;     // factor applied by normalize_problem
  // Optional curvature of H per node, used to cross-check the post-solve Chern forms.
  std::vector<CurvatureMatrix<Complex>> theta;

  void validate() const {
    grid.validate();
    if (rank < 1) throw InputError("rank must be positive");
    const std::size_t n = grid.size();
    if (c1.size() != n || c2.size() != n || eta.size() != n) throw InputError("problem fields do not match the grid");
    if (!theta.empty() && theta.size() != n) throw InputError("curvature field does not match the grid");
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(c2[i]) || !std::isfinite(eta[i]) || !c1[i].allFinite())
        throw InputError("problem data contain non-finite values");
      if ((c1[i] - c1[i].adjoint()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + c1[i].cwiseAbs().maxCoeff()))
        throw InputError("c1 coefficient matrix is not Hermitian");
    }
  }

  /// Kobayashi–Lübke density (2r·c2 − (r−1)·c1²)/(2r), with c1² = 2·det(c1).
  std::vector<double> kobayashi_lubke() const {
    std::vector<double> out(c1.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double c1sq = 2.0 * c1[i].determinant().real();
      out[i] = (2.0 * rank * c2[i] - (rank - 1) * c1sq) / (2.0 * rank);
    }
    return out;
  }

  /// Right side F.
  std::vector<double> rhs() const {
    std::vector<double> f = kobayashi_lubke();
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += eta[i];
    return f;
  }
};

inline Matrix2c adjugate(const Matrix2c& a) {
  Matrix2c out;
  out << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  return out;
}

inline double min_eigenvalue(const Matrix2c& w) {
  Eigen::SelfAdjointEigenSolver<Matrix2c> es(w, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Largest violation of d-closedness of i·Σ g_jk dz_j∧dz̄_k, i.e. of
/// ∂_l g_jk = ∂_j g_lk, measured with spectral derivatives.
inline double closedness_defect(const TorusGrid& grid, const std::vector<Matrix2c>& g) {
  Spectral sp(grid);
  const std::size_t n = grid.size();
  // ∂_{z_l} f = ½(∂_{x_l} − i∂_{y_l}) f, applied to the real and imaginary parts
  auto dz = [&](const std::vector<double>& re, const std::vector<double>& im, int l) {
    std::vector<Complex> out(n, Complex(0.0));
    for (int axis : {2 * l, 2 * l + 1}) {
      if (grid.dims[axis] == 1) continue;
      auto d = [&](const std::vector<double>& f) {
        return sp.multiplier(f, [axis](const std::array<double, 4>& k) { return Complex(0.0, k[axis]); });
      };
      const auto dre = d(re), dim = d(im);
      const Complex factor = axis % 2 == 0 ? Complex(0.5, 0.0) : Complex(0.0, -0.5);
      for (std::size_t i = 0; i < n; ++i) out[i] += factor * Complex(dre[i], dim[i]);
    }
    return out;
  };
  std::vector<double> re(n), im(n);
  double defect = 0.0;
  for (int k = 0; k < 2; ++k) {
    std::array<std::vector<Complex>, 2> d_of_col0, d_of_col1;  // ∂_l g_{0k}, ∂_l g_{1k}
    for (int j = 0; j < 2; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        re[i] = g[i](j, k).real();
        im[i] = g[i](j, k).imag();
      }
      auto& target = j == 0 ? d_of_col0 : d_of_col1;
      for (int l = 0; l < 2; ++l) target[l] = dz(re, im, l);
    }
    // ∂_1 g_{0k} must equal ∂_0 g_{1k}
    for (std::size_t i = 0; i < n; ++i) defect = std::max(defect, std::abs(d_of_col0[1][i] - d_of_col1[0][i]));
  }
  return defect;
}

// ---------------------------------------------------------------------------
// Normalization

struct NormalizationReport {
  double scale = 1.0;
  double lhs_mean = 0.0;  // mean of r(r+1)·det(c1/r)
  double rhs_mean = 0.0;  // mean of F after scaling
};

/// Rescales η so that mean(F) = mean(r(r+1)·det(c1/r)), the discrete Calabi
/// compatibility condition. Rejects data whose F is not pointwise positive
/// before or after the rescale.
inline MAProblem normalize_problem(MAProblem p, NormalizationReport* report = nullptr) {
  p.validate();
  const std::size_t n = p.grid.size();
  const double r = p.rank;
  const auto kl = p.kobayashi_lubke();
  for (std::size_t i = 0; i < n; ++i) {
    if (p.eta[i] <= 0.0) throw InputError("target density is not positive at node " + std::to_string(i));
    if (kl[i] + p.eta[i] <= 0.0) throw InputError("right side F is not positive at node " + std::to_string(i));
  }
  double lhs = 0.0, kl_mean = 0.0, eta_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lhs += r * (r + 1.0) * (p.c1[i] / r).determinant().real();
    kl_mean += kl[i];
    eta_mean += p.eta[i];
  }
  lhs /= n;
  kl_mean /= n;
  eta_mean /= n;
  const double s = (lhs - kl_mean) / eta_mean;
  if (!(s > 0.0)) throw InputError("no positive rescale of the target satisfies the compatibility condition");
  for (std::size_t i = 0; i < n; ++i) {
    p.eta[i] *= s;
    if (kl[i] + p.eta[i] <= 0.0) throw InputError("right side F is not positive after normalization");
  }
  p.eta_scale *= s;
  if (report) {
    report->scale = s;
    report->lhs_mean = lhs;
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) f += kl[i] + p.eta[i];
    report->rhs_mean = f / n;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Solver

struct SolverConfig {
  double tol = 1e-10;           // sup-norm residual target
  int max_iterations = 50;
  int max_halvings = 30;
  int gmres_restart = 40;
  int gmres_max_iterations = 400;
  double gmres_tol = 1e-11;     // smallest relative linear tolerance
  unsigned workers = 1;
};

struct IterationRecord {
  double residual = 0.0;        // sup norm after the step
  double resolved = 0.0;        // same on reachable modes (the Newton merit)
  double step = 0.0;            // accepted damping factor
  double min_eigenvalue = 0.0;  // min over nodes of λ_min(W)
  double conservation = 0.0;    // |mean det W − mean det(c1/r)| relative to the latter
  int gmres_iterations = 0;
};

struct MASolution {
  TorusField phi;
  std::vector<double> residual;  // r(r+1)·det W − F per node
  bool converged = false;
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double initial_resolved = 0.0;
  double final_resolved = 0.0;
  double min_eigenvalue = 0.0;
  double initial_conservation = 0.0;
  std::vector<IterationRecord> history;
};

namespace detail {

struct MAState {
  std::vector<Matrix2c> w;      // W per node
  std::vector<double> residual;
  double sup = 0.0;
  double resolved = 0.0;  // sup norm of the residual on reachable modes
  double min_eig = 0.0;
  double mean_det = 0.0;
};

inline double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline void remove_mean(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  s /= static_cast<double>(v.size());
  for (double& x : v) x -= s;
}

class MAOperator {
public:
  MAOperator(const MAProblem& p, const SolverConfig& cfg)
      : p_(p), cfg_(cfg), sp_(p.grid), f_(p.rhs()), coef_(p.rank * (p.rank + 1.0)) {}

  Spectral& spectral() { return sp_; }
  const std::vector<double>& rhs() const { return f_; }

  MAState evaluate(const std::vector<double>& phi) {
    const auto hess = sp_.complex_hessian(phi);
    const std::size_t n = phi.size();
    MAState s;
    s.w.resize(n);
    s.residual.resize(n);
    std::vector<double> eig(n), det(n);
    const double r = p_.rank;
    parallel_for(n, cfg_.workers, [&](std::size_t i) {
      Matrix2c w = p_.c1[i] / r + hess[i] / (2.0 * std::numbers::pi);
      w = 0.5 * (w + w.adjoint()).eval();
      s.w[i] = w;
      det[i] = w.determinant().real();
      s.residual[i] = coef_ * det[i] - f_[i];
      eig[i] = min_eigenvalue(w);
    });
    s.sup = sup_norm(s.residual);
    s.resolved = sup_norm(sp_.strip_unreachable(s.residual));
    s.min_eig = *std::min_element(eig.begin(), eig.end());
    s.mean_det = pairwise_sum(std::span<const double>(det)) / static_cast<double>(n);
    return s;
  }

  /// Linearization δ ↦ r(r+1)/2π · Σ adj(W)_kj Φ(δ)_jk.
  std::vector<double> apply(const std::vector<Matrix2c>& adj, const std::vector<double>& delta) {
    const auto hess = sp_.complex_hessian(delta);
    std::vector<double> out(delta.size());
    const double c = coef_ / (2.0 * std::numbers::pi);
    parallel_for(delta.size(), cfg_.workers, [&](std::size_t i) {
      out[i] = c * (adj[i].transpose().cwiseProduct(hess[i])).sum().real();
    });
    return out;
  }

  /// Inverse of the constant-coefficient operator built from the mean adjugate.
  std::vector<double> precondition(const Matrix2c& mean_adj, const std::vector<double>& v) {
    const double c = coef_ / (2.0 * std::numbers::pi);
    return sp_.multiplier(v, [&](const std::array<double, 4>& k) {
      Eigen::Vector2cd dir(Complex(k[0], -k[1]), Complex(k[2], -k[3]));
      const double symbol = -c * 0.25 * (dir.adjoint() * mean_adj * dir)(0, 0).real();
      return std::abs(symbol) < 1e-300 ? Complex(0.0) : Complex(1.0 / symbol);
    });
  }

private:
  const MAProblem& p_;
  SolverConfig cfg_;
  Spectral sp_;
  std::vector<double> f_;
  double coef_;
};

/// Right-preconditioned restarted GMRES on mean-zero fields. Returns the
/// iteration count; x solves a(x) ≈ b (the preconditioner is already applied).
template <class Apply, class Precondition>
int gmres(Apply&& a, Precondition&& m, const std::vector<double>& b, std::vector<double>& x, int restart, int max_it,
          double tol, double abs_tol = 0.0) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const std::size_t n = b.size();
  auto to_vec = [](const std::vector<double>& v) { return Eigen::Map<const VectorXd>(v.data(), v.size()).eval(); };
  auto to_std = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  const VectorXd bv = to_vec(b);
  const double bnorm = bv.norm();
  const double target = std::max(tol * bnorm, abs_tol);
  VectorXd xv = VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (bnorm == 0.0) {
    x = to_std(xv);
    return 0;
  }
  int total = 0;
  while (total < max_it) {
    VectorXd rv = bv - to_vec(a(to_std(xv)));
    double beta = rv.norm();
    if (beta <= target) break;
    MatrixXd v(n, restart + 1), h = MatrixXd::Zero(restart + 1, restart);
    std::vector<VectorXd> z(restart);
    VectorXd cs = VectorXd::Zero(restart), sn = VectorXd::Zero(restart), g = VectorXd::Zero(restart + 1);
    v.col(0) = rv / beta;
    g(0) = beta;
    int k = 0;
    for (; k < restart && total < max_it; ++k, ++total) {
      z[k] = to_vec(m(to_std(v.col(k))));
      VectorXd w = to_vec(a(to_std(z[k])));
      for (int j = 0; j <= k; ++j) {
        h(j, k) = w.dot(v.col(j));
        w -= h(j, k) * v.col(j);
      }
      h(k + 1, k) = w.norm();
      if (h(k + 1, k) > 0.0) v.col(k + 1) = w / h(k + 1, k);
      for (int j = 0; j < k; ++j) {
        const double t = cs(j) * h(j, k) + sn(j) * h(j + 1, k);
        h(j + 1, k) = -sn(j) * h(j, k) + cs(j) * h(j + 1, k);
        h(j, k) = t;
      }
      const double denom = std::hypot(h(k, k), h(k + 1, k));
      cs(k) = denom == 0.0 ? 1.0 : h(k, k) / denom;
      sn(k) = denom == 0.0 ? 0.0 : h(k + 1, k) / denom;
      h(k, k) = denom;
      h(k + 1, k) = 0.0;
      g(k + 1) = -sn(k) * g(k);
      g(k) = cs(k) * g(k);
      if (std::abs(g(k + 1)) <= target || h(k, k) == 0.0) {
        ++k;
        ++total;
        break;
      }
    }
    VectorXd y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    for (int j = 0; j < k; ++j) xv += y(j) * z[j];
    if (std::abs(g(k)) <= target) break;
  }
  x = to_std(xv);
  return total;
}

}  // namespace detail

/// Damped Newton iteration for the normalized problem. Newton steps target the
/// residual on the modes a Hessian can reach; the solution counts as converged
/// when the full pointwise residual is below tol, so under-resolved data stop
/// at the floor set by the unreachable modes and report it. The starting potential
/// removes the non-constant part of tr(c1) by a Poisson solve when that keeps
/// ω_φ positive, and is zero otherwise, unless an initial potential is given.
inline MASolution solve(const MAProblem& problem, const SolverConfig& cfg = {},
                        const std::vector<double>* initial = nullptr) {
  problem.validate();
  if (cfg.tol <= 0.0 || cfg.max_iterations < 0) throw InputError("invalid solver tolerance or iteration limit");
  detail::MAOperator op(problem, cfg);
  const std::size_t n = problem.grid.size();
  const double r = problem.rank;

  double base_det = 0.0;
  for (const auto& g : problem.c1) base_det += (g / r).determinant().real();
  base_det /= static_cast<double>(n);

  std::vector<double> phi(n, 0.0);
  if (initial) {
    if (initial->size() != n) throw InputError("initial potential does not match the grid");
    phi = *initial;
    detail::remove_mean(phi);
  } else {
    // tr Φ(φ) = ¼Δφ, so Δφ = −(8π/r)·(tr c1 − mean) flattens the trace
    std::vector<double> tr(n);
    for (std::size_t i = 0; i < n; ++i) tr[i] = problem.c1[i].trace().real();
    detail::remove_mean(tr);
    if (detail::sup_norm(tr) > 0.0) {
      auto guess = op.spectral().multiplier(tr, [&](const std::array<double, 4>& k) {
        const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + k[3] * k[3];
        return k2 == 0.0 ? Complex(0.0) : Complex(8.0 * std::numbers::pi / r / k2);
      });
      if (op.evaluate(guess).min_eig > 0.0) phi = std::move(guess);
    }
  }

  detail::MAState state = op.evaluate(phi);
  if (!(state.min_eig > 0.0)) throw InputError("ω_φ is not positive at the starting potential");

  MASolution sol;
  sol.initial_residual = state.sup;
  sol.initial_resolved = state.resolved;
  sol.initial_conservation = std::abs(state.mean_det - base_det) / std::abs(base_det);

  while (state.sup >= cfg.tol && sol.iterations < cfg.max_iterations) {
    std::vector<Matrix2c> adj(n);
    Matrix2c mean_adj = Matrix2c::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      adj[i] = adjugate(state.w[i]);
      mean_adj += adj[i];
    }
    mean_adj /= static_cast<double>(n);

    std::vector<double> b = op.spectral().strip_unreachable(state.residual);
    for (double& x : b) x = -x;
    detail::remove_mean(b);
    std::vector<double> delta;
    // inexact Newton: the relative target tracks the residual (quadratic
    // convergence) and never drops below a fraction of the requested tolerance
    const double forcing = std::max(cfg.gmres_tol, std::min(1e-2, state.resolved));
    const double floor = 1e-3 * cfg.tol * std::sqrt(static_cast<double>(n));
    const int its = detail::gmres([&](const std::vector<double>& v) { return op.apply(adj, v); },
                                  [&](const std::vector<double>& v) { return op.precondition(mean_adj, v); }, b, delta,
                                  cfg.gmres_restart, cfg.gmres_max_iterations, forcing, floor);
    detail::remove_mean(delta);

    double t = 1.0;
    bool accepted = false;
    detail::MAState trial;
    std::vector<double> candidate(n);
    for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) candidate[i] = phi[i] + t * delta[i];
      trial = op.evaluate(candidate);
      if (trial.min_eig > 0.0 && trial.resolved < state.resolved) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // roundoff or the unreachable-mode floor
    phi = candidate;
    detail::remove_mean(phi);
    state = std::move(trial);
    ++sol.iterations;
    sol.history.push_back({state.sup, state.resolved, t, state.min_eig, std::abs(state.mean_det - base_det) / std::abs(base_det), its});
  }

  detail::remove_mean(phi);
  state = op.evaluate(phi);
  sol.phi = TorusField(problem.grid);
  sol.phi.values = phi;
  sol.residual = state.residual;
  sol.final_residual = state.sup;
  sol.final_resolved = state.resolved;
  sol.min_eigenvalue = state.min_eig;
  sol.converged = state.sup < cfg.tol;
  return sol;
}

/// Throws when the solver stopped short of its tolerance.
inline MASolution solve_or_throw(const MAProblem& problem, const SolverConfig& cfg = {}) {
  MASolution s = solve(problem, cfg);
  if (!s.converged)
    throw NumericalFailure("Monge–Ampère iteration did not converge: residual " + std::to_string(s.final_residual));
  return s;
}

// ---------------------------------------------------------------------------
// Post-solve Chern forms of G = H·e^{-φ}

struct ConclusionReport {
  double c1_margin = 0.0;       // min over nodes of λ_min(c1(G))
  double c2_margin = 0.0;       // min over nodes of the c2(G) density
  double schur_margin = 0.0;    // min over nodes of the (c1² − c2)(G) density
  double eta_deviation = 0.0;   // max |(c1² − c2)(G) − η|
  double chern_mismatch = -1.0; // max deviation from chern_forms(Θ_G); −1 when Θ_H is absent
  bool c1_positive = false;
  bool c2_positive = false;
  bool schur_positive = false;
  bool matches_eta = false;
  std::vector<double> schur_density;
};

inline std::vector<std::vector<Complex>> to_rows(const Matrix2c& m) {
  return {{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}};
}

/// c1(G) = c1(H) + r·B, c2(G) = c2(H) + (r−1)·c1(H)∧B + C(r,2)·B∧B with
/// B = ddᶜφ, evaluated node by node with exterior algebra. `tol` bounds the
/// allowed deviation of (c1² − c2)(G) from η.
inline ConclusionReport verify_conclusion(const MAProblem& problem, const TorusField& phi, double tol = 1e-8,
                                          unsigned workers = 1) {
  problem.validate();
  if (!(phi.grid == problem.grid)) throw InputError("solution grid does not match the problem");
  Spectral sp(problem.grid);
  const auto hess = sp.complex_hessian(phi.values);
  const std::size_t n = problem.grid.size();
  const int r = problem.rank;
  std::vector<double> c1m(n), c2d(n), schur(n), dev(n), mismatch(n, 0.0);
  parallel_for(n, workers, [&](std::size_t i) {
    const Matrix2c b = hess[i] / (2.0 * std::numbers::pi);
    const Form<Complex> c1h = kahler_form(to_rows(problem.c1[i]));
    const Form<Complex> bf = kahler_form(to_rows(b));
    const Form<Complex> c1g = c1h + bf * Complex(r);
    const double c2g = problem.c2[i] + (r - 1) * top_coefficient(wedge(c1h, bf)).real() +
                       0.5 * r * (r - 1) * top_coefficient(wedge(bf, bf)).real();
    const double c1sq = top_coefficient(wedge(c1g, c1g)).real();
    Matrix2c g = problem.c1[i] + double(r) * b;
    c1m[i] = min_eigenvalue(0.5 * (g + g.adjoint()));
    c2d[i] = c2g;
    schur[i] = c1sq - c2g;
    dev[i] = std::abs(schur[i] - problem.eta[i]);
    if (!problem.theta.empty()) {
      CurvatureMatrix<Complex> tg = problem.theta[i];
      const auto twist = identity_twist(to_rows(hess[i]), r);
      for (int a = 0; a < r; ++a) tg[a][a] += twist[a][a];
      const auto c = chern_forms(tg);
      double m = max_abs(c[1] - c1g);
      if (r >= 2) m = std::max(m, std::abs(top_coefficient(c[2]).real() - c2g));
      mismatch[i] = m;
    }
  });
  ConclusionReport rep;
  rep.c1_margin = *std::min_element(c1m.begin(), c1m.end());
  rep.c2_margin = *std::min_element(c2d.begin(), c2d.end());
  rep.schur_margin = *std::min_element(schur.begin(), schur.end());
  rep.eta_deviation = *std::max_element(dev.begin(), dev.end());
  if (!problem.theta.empty()) rep.chern_mismatch = *std::max_element(mismatch.begin(), mismatch.end());
  rep.c1_positive = rep.c1_margin > 0.0;
  rep.c2_positive = rep.c2_margin > 0.0;
  rep.schur_positive = rep.schur_margin > 0.0;
  rep.matches_eta = rep.eta_deviation <= tol;
  rep.schur_density = std::move(schur);
  return rep;
}

// ---------------------------------------------------------------------------
// Synthetic problems

/// Direct sum of r lines with constant curvature matrices: c1 = Σ g_a and c2 the
/// second elementary symmetric function of the line classes.
inline void fill_line_sum(MAProblem& p, const std::vector<std::vector<Matrix2c>>& lines) {
  const std::size_t n = p.grid.size();
  p.rank = static_cast<int>(lines.size());
  p.c1.assign(n, Matrix2c::Zero());
  p.c2.assign(n, 0.0);
  p.theta.assign(n, {});
  const Complex inv_kappa = 1.0 / ScalarTraits<Complex>::chern_kappa();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Form<Complex>> forms;
    for (const auto& l : lines) {
      p.c1[i] += l[i];
      forms.push_back(kahler_form(to_rows(l[i])));
    }
    double c2 = 0.0;
    for (std::size_t a = 0; a < forms.size(); ++a)
      for (std::size_t b = a + 1; b < forms.size(); ++b) c2 += top_coefficient(wedge(forms[a], forms[b])).real();
    p.c2[i] = c2;
    CurvatureMatrix<Complex> th = zero_matrix<Complex>(p.rank, 2);
    for (int a = 0; a < p.rank; ++a) th[a][a] = forms[a] * inv_kappa;
    p.theta[i] = std::move(th);
  }
}

/// Lines with constant curvature diag(1+a/4, 1+a/3) scaled by the line index.
inline std::vector<Matrix2c> constant_line(const TorusGrid& grid, int a) {
  Matrix2c g;
  g << 1.0 + 0.25 * a, Complex(0.1, 0.05 * a), Complex(0.1, -0.05 * a), 1.2 + a / 3.0;
  return std::vector<Matrix2c>(grid.size(), g);
}

/// η chosen so that F = r(r+1)·det(c1/r)·profile, with profile of mean one.
inline void set_rhs_profile(MAProblem& p, const std::vector<double>& profile) {
  const auto kl = p.kobayashi_lubke();
  p.eta.resize(p.grid.size());
  for (std::size_t i = 0; i < p.eta.size(); ++i) {
    const double r = p.rank;
    p.eta[i] = r * (r + 1.0) * (p.c1[i] / r).determinant().real() * profile[i] - kl[i];
  }
}

/// Constant lines and constant η: the flat potential already solves the equation.
inline MAProblem constant_problem(const TorusGrid& grid, int rank) {
  MAProblem p;
  p.grid = grid;
  std::vector<std::vector<Matrix2c>> lines;
  for (int a = 0; a < rank; ++a) lines.push_back(constant_line(grid, a));
  fill_line_sum(p, lines);
  set_rhs_profile(p, std::vector<double>(grid.size(), 1.0));
  return p;
}

/// Constant lines, F = (1 + ε·cos 2πx1)·(compatible constant).
inline MAProblem cosine_problem(const TorusGrid& grid, int rank, double eps) {
  MAProblem p = constant_problem(grid, rank);
  std::vector<double> profile(grid.size());
  for (std::size_t i = 0; i < profile.size(); ++i)
    profile[i] = 1.0 + eps * std::cos(2.0 * std::numbers::pi * grid.coords(i)[0]);
  set_rhs_profile(p, profile);
  return p;
}

/// Random trigonometric polynomial of low degree in the coordinates present on the grid.
inline std::vector<double> random_trig_field(const TorusGrid& grid, std::uint64_t seed, int modes = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> freq(-2, 2);
  std::uniform_real_distribution<double> coef(-1.0, 1.0), phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> out(grid.size(), 0.0);
  for (int m = 0; m < modes; ++m) {
    std::array<int, 4> k{};
    for (int a = 0; a < 4; ++a) k[a] = grid.dims[a] > 4 ? freq(rng) : 0;
    const double c = coef(rng), ph = phase(rng);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto x = grid.coords(i);
      double arg = ph;
      for (int a = 0; a < 4; ++a) arg += 2.0 * std::numbers::pi * k[a] * x[a];
      out[i] += c * std::cos(arg);
    }
  }
  return out;
}

/// Direct sum of lines g_a = g_a⁰ + ε·∂∂̄ψ_a/2π with random ψ_a (so each line
/// form is closed on the grid), and η = level·(1 + 0.2·ψ_η/max|ψ_η|), not yet
/// normalized.
inline MAProblem line_sum_problem(const TorusGrid& grid, int rank, std::uint64_t seed, double eps, double level) {
  MAProblem p;
  p.grid = grid;
  Spectral sp(grid);
  std::vector<std::vector<Matrix2c>> lines;
  for (int a = 0; a < rank; ++a) {
    auto line = constant_line(grid, a);
    const auto psi = random_trig_field(grid, seed * 7919 + a);
    const auto hess = sp.complex_hessian(psi);
    for (std::size_t i = 0; i < line.size(); ++i) line[i] += eps * hess[i] / (2.0 * std::numbers::pi);
    lines.push_back(std::move(line));
  }
  fill_line_sum(p, lines);
  auto bump = random_trig_field(grid, seed * 7919 + 1000);
  double m = 0.0;
  for (double v : bump) m = std::max(m, std::abs(v));
  p.eta.resize(grid.size());
  for (std::size_t i = 0; i < p.eta.size(); ++i) p.eta[i] = level * (1.0 + (m > 0 ? 0.2 * bump[i] / m : 0.0));
  return p;
}

/// Lines sharing one potential, g_a = h + t_a·diag(s, −s) + ε·∂∂̄ψ/2π with
/// t_a centred on zero. Differences c1(L_a) − c1(L_b) are constant and
/// indefinite, so 2r·c2 − (r−1)·c1² = −Σ_{a<b}(c1(L_a) − c1(L_b))² is positive
/// at every node, as it is for Hermite–Einstein metrics.
inline MAProblem kobayashi_lubke_problem(const TorusGrid& grid, int rank, std::uint64_t seed, double eps, double level,
                                         double split = 0.3) {
  MAProblem p;
  p.grid = grid;
  Spectral sp(grid);
  const auto psi = random_trig_field(grid, seed * 7919 + 17);
  const auto hess = sp.complex_hessian(psi);
  Matrix2c h;
  h << 1.0, Complex(0.1, 0.05), Complex(0.1, -0.05), 1.2;
  std::vector<std::vector<Matrix2c>> lines;
  for (int a = 0; a < rank; ++a) {
    const double t = a - 0.5 * (rank - 1);
    Matrix2c base = h;
    base(0, 0) += t * split;
    base(1, 1) -= t * split;
    std::vector<Matrix2c> line(grid.size());
    for (std::size_t i = 0; i < line.size(); ++i) line[i] = base + eps * hess[i] / (2.0 * std::numbers::pi);
    lines.push_back(std::move(line));
  }
  fill_line_sum(p, lines);
  auto bump = random_trig_field(grid, seed * 7919 + 1001);
  double m = 0.0;
  for (double v : bump) m = std::max(m, std::abs(v));
  p.eta.resize(grid.size());
  for (std::size_t i = 0; i < p.eta.size(); ++i) p.eta[i] = level * (1.0 + (m > 0 ? 0.2 * bump[i] / m : 0.0));
  return p;
}

/// Manufactured solution φ* = δ·exp(sin 2πx1 + cos 2πx2) on a grid with axes
/// (x1, x2) = (0, 2). F is the continuum right side, so the discrete problem is
/// solved by the grid restriction of φ* only up to discretization error.
struct Manufactured {
  MAProblem problem;
  std::vector<double> exact;
};

inline Manufactured manufactured_problem(const TorusGrid& grid, int rank, double delta = 0.03) {
  if (grid.dims[0] < 2 || grid.dims[2] < 2) throw InputError("manufactured problem needs the x1 and x2 axes");
  Manufactured m;
  m.problem = constant_problem(grid, rank);
  const double tau = 2.0 * std::numbers::pi;
  m.exact.resize(grid.size());
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto x = grid.coords(i);
    const double s1 = std::sin(tau * x[0]), c1 = std::cos(tau * x[0]);
    const double s2 = std::sin(tau * x[2]), c2 = std::cos(tau * x[2]);
    const double u = delta * std::exp(s1 + c2);
    const double ux1x1 = u * (tau * tau * c1 * c1 - tau * tau * s1);
    const double ux2x2 = u * (tau * tau * s2 * s2 - tau * tau * c2);
    const double ux1x2 = u * (tau * c1) * (-tau * s2);
    Matrix2c hess;
    hess << 0.25 * ux1x1, 0.25 * ux1x2, 0.25 * ux1x2, 0.25 * ux2x2;
    const double r = rank;
    const Matrix2c w = m.problem.c1[i] / r + hess / tau;
    f[i] = r * (r + 1.0) * w.determinant().real();
    m.exact[i] = u;
  }
  const auto kl = m.problem.kobayashi_lubke();
  for (std::size_t i = 0; i < f.size(); ++i) m.problem.eta[i] = f[i] - kl[i];
  double mean = 0.0;
  for (double v : m.exact) mean += v;
  mean /= static_cast<double>(m.exact.size());
  for (double& v : m.exact) v -= mean;
  return m;
}

/// Sup norm of r(r+1)·det W − F for a given potential.
inline double residual_of(const MAProblem& p, const std::vector<double>& phi) {
  SolverConfig cfg;
  detail::MAOperator op(p, cfg);
  return op.evaluate(phi).sup;
}

// ---------------------------------------------------------------------------
// Grid-file layout: columns c1_00, c1_01_re, c1_01_im, c1_11, c2, eta.

inline MAProblem problem_from_table(const GridTable& t, int rank) {
  MAProblem p;
  p.rank = rank;
  p.grid = t.grid;
  const auto& a = t.column("c1_00");
  const auto& bre = t.column("c1_01_re");
  const auto& bim = t.column("c1_01_im");
  const auto& d = t.column("c1_11");
  p.c2 = t.column("c2");
  p.eta = t.column("eta");
  p.c1.resize(t.grid.size());
  for (std::size_t i = 0; i < p.c1.size(); ++i)
    p.c1[i] << a[i], Complex(bre[i], bim[i]), Complex(bre[i], -bim[i]), d[i];
  p.validate();
  return p;
}

inline void write_problem_csv(const std::string& path, const MAProblem& p) {
  const std::size_t n = p.grid.size();
  std::vector<double> a(n), bre(n), bim(n), d(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = p.c1[i](0, 0).real();
    bre[i] = p.c1[i](0, 1).real();
    bim[i] = p.c1[i](0, 1).imag();
    d[i] = p.c1[i](1, 1).real();
  }
  write_grid_csv(path, p.grid, {"c1_00", "c1_01_re", "c1_01_im", "c1_11", "c2", "eta"},
                 {&a, &bre, &bim, &d, &p.c2, &p.eta});
}

}  // namespace parachern
