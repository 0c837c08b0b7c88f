#include "parachern/kawamata.hpp"

#include "support/curvature_gen.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace parachern;

namespace {

constexpr double kPi = std::numbers::pi;

Rational q(long a, long b) { return make_rational(a, b); }

MatrixXc scalar_matrix(Complex v) {
  MatrixXc m(1, 1);
  m(0, 0) = v;
  return m;
}

double sup_norm_diff(const MatrixXc& a, const MatrixXc& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Weights k/N, nondecreasing, r of them.
std::vector<Rational> random_weights(std::mt19937_64& rng, int r, int N) {
  std::uniform_int_distribution<int> k(0, N - 1);
  std::vector<int> ks(r);
  for (auto& v : ks) v = k(rng);
  std::sort(ks.begin(), ks.end());
  std::vector<Rational> out;
  for (int v : ks) out.push_back(q(v, N));
  return out;
}

// Θ̃ with R_ab,jk(w) = C_ab,jk w1^m, m ≡ k'_a - k'_b - [j=0] + [k=0] (mod N), so that
// the rotation w1 ↦ ζw1 acts on Θ̃_ab by ζ^{k'_a - k'_b}. Hermitian symmetry is
// kept by pairing (a,b,j,k) with (b,a,k,j) through conjugation of w1^m.
CurvatureFunction equivariant_curvature(std::mt19937_64& rng, const std::vector<int>& k, int N, int n) {
  const int r = static_cast<int>(k.size());
  std::normal_distribution<double> g;
  auto C = testgen::empty_tensor<Complex>(r, n);
  for (int a = 0; a < r; ++a)
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < r; ++b)
        for (int kk = 0; kk < n; ++kk) C[a][b][j][kk] = Complex(g(rng), g(rng));
  auto exponent = [=](int a, int b, int j, int kk) {
    const int m = k[a] - k[b] - (j == 0 ? 1 : 0) + (kk == 0 ? 1 : 0);
    return ((m % N) + N) % N;
  };
  return [=](const Point& w) {
    auto R = testgen::empty_tensor<Complex>(r, n);
    for (int a = 0; a < r; ++a)
      for (int j = 0; j < n; ++j)
        for (int b = 0; b < r; ++b)
          for (int kk = 0; kk < n; ++kk) {
            const int row = j * r + a, col = kk * r + b;
            if (row > col) continue;
            // the mirrored slot has exponent ≡ -m, realised by w̄1^m
            Complex v = C[a][b][j][kk] * std::pow(w[0], exponent(a, b, j, kk));
            if (row == col) v = Complex(v.real(), 0.0);
            R[a][b][j][kk] = v;
            R[b][a][kk][j] = std::conj(v);
          }
    return curvature_from_coefficients(R, n);
  };
}

}  // namespace

// ---------------------------------------------------------------------------
// descend / lift

TEST(KawamataDescend, FlatLineOverDoubleCoverIsModulus) {
  LocalChart chart{.n = 1, .cover = 2};
  auto field = descend_metric([](const Point&) { return scalar_matrix(1.0); }, {q(1, 2)}, chart);
  for (std::size_t i = 0; i < field.points.size(); ++i)
    EXPECT_NEAR(field.values[i](0, 0).real(), std::abs(field.points[i].z[0]), 1e-15);
}

TEST(KawamataDescend, GaussianMatchesPointwiseFormula) {
  LocalChart chart{.n = 2, .cover = 3};
  MatrixFunction ht = [](const Point& w) { return scalar_matrix(std::exp(-(std::norm(w[0]) + std::norm(w[1])))); };
  auto field = descend_metric(ht, {q(1, 3)}, chart);
  ASSERT_GE(field.points.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    const Point& z = field.points[i].z;
    const double a = std::pow(std::abs(z[0]), 2.0 / 3.0);
    const double expected = a * std::exp(-a - std::norm(z[1]));
    EXPECT_NEAR(field.values[i](0, 0).real(), expected, 1e-14 * (1.0 + expected));
    EXPECT_NEAR(field.values[i](0, 0).imag(), 0.0, 1e-15);
  }
}

TEST(KawamataDescend, ZeroWeightsIsPlainSubstitution) {
  LocalChart chart{.n = 1, .cover = 3};
  auto ht = random_invariant_metric(5, {q(0, 1), q(0, 1)}, 3, 1);
  auto field = descend_metric(ht, {q(0, 1), q(0, 1)}, chart);
  for (std::size_t i = 0; i < field.points.size(); ++i)
    EXPECT_LT(sup_norm_diff(field.values[i], ht(field.points[i].w)), 1e-15);
}

TEST(KawamataDescend, RejectsNonInvariantInput) {
  LocalChart chart{.n = 1, .cover = 2};
  MatrixFunction ht = [](const Point& w) { return scalar_matrix(2.0 + w[0].real()); };
  EXPECT_THROW(descend_metric(ht, {q(0, 1)}, chart), InputError);
}

TEST(KawamataDescend, RejectsWeightsOffTheCoverLattice) {
  LocalChart chart{.n = 1, .cover = 2};
  MatrixFunction ht = [](const Point&) { return scalar_matrix(1.0); };
  EXPECT_THROW(descend_metric(ht, {q(1, 3)}, chart), InputError);
  EXPECT_THROW(frame_exponents({q(1, 2), q(0, 1)}, 2), InputError);
}

TEST(KawamataDescend, RandomInvariantMetricsSatisfyDeckRelation) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int N = 1 + trial % 6, r = 1 + trial % 4;
    auto w = random_weights(rng, r, N);
    auto ht = random_invariant_metric(trial, w, N, 2);
    LocalChart chart{.n = 2, .cover = N};
    std::vector<Point> ws;
    for (const auto& p : sample_points(chart)) ws.push_back(p.w);
    EXPECT_LT(deck_defect(ht, frame_exponents(w, N), N, ws), 1e-12);
  }
}

TEST(KawamataDescend, BranchIndependence) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int N = 2 + trial % 5, r = 1 + trial % 4;
    auto w = random_weights(rng, r, N);
    LocalChart chart{.n = 2, .cover = N};
    EXPECT_LT(branch_deviation(random_invariant_metric(100 + trial, w, N, 2), w, chart), 1e-10);
  }
}

// ---------------------------------------------------------------------------
// admissibility

TEST(KawamataAdmissibility, ModulusFixtureIsAdmissible) {
  LocalChart chart{.n = 1, .cover = 2};
  auto field = sample_metric([](const Point& z) { return scalar_matrix(std::abs(z[0])); }, {q(1, 2)}, chart);
  auto rep = admissibility_check(field);
  EXPECT_TRUE(rep.admissible);
  for (const auto& m : rep.lifted) EXPECT_NEAR(m(0, 0).real(), 1.0, 1e-12);
}

TEST(KawamataAdmissibility, ConstantMetricWithWeightIsRejected) {
  LocalChart chart{.n = 1, .cover = 2};
  auto field = sample_metric([](const Point&) { return scalar_matrix(1.0); }, {q(1, 2)}, chart);
  auto rep = admissibility_check(field);
  EXPECT_FALSE(rep.admissible);
  EXPECT_FALSE(rep.bounded);
  // |z1|^{-1} = |w1|^{-2}: ratio 4 between consecutive annuli
  EXPECT_NEAR(rep.annuli[5].max_value / rep.annuli[4].max_value, 4.0, 1e-9);
}

TEST(KawamataAdmissibility, DegeneratingMetricFailsPositivity) {
  LocalChart chart{.n = 1, .cover = 2};
  auto field = sample_metric([](const Point& z) { return scalar_matrix(std::norm(z[0])); }, {q(1, 2)}, chart);
  auto rep = admissibility_check(field);
  EXPECT_FALSE(rep.positive);
  EXPECT_FALSE(rep.admissible);
}

TEST(KawamataAdmissibility, DiscontinuousAcrossCutIsRejected) {
  LocalChart chart{.n = 1, .cover = 1};
  // continuous except for a jump of 1 across the negative real axis
  MatrixFunction h = [](const Point& z) { return scalar_matrix(1.0 + 0.5 * std::arg(z[0]) / kPi); };
  auto rep = admissibility_check(sample_metric(h, {q(0, 1)}, chart));
  EXPECT_FALSE(rep.cut_consistent);
}

TEST(KawamataAdmissibility, NeedsFourAnnuli) {
  LocalChart chart{.n = 1, .cover = 2, .annuli = 3};
  auto field = sample_metric([](const Point& z) { return scalar_matrix(std::abs(z[0])); }, {q(1, 2)}, chart);
  EXPECT_THROW(admissibility_check(field), InputError);
}

TEST(KawamataAdmissibility, RankTwoRoundTrip) {
  LocalChart chart{.n = 2, .cover = 4};
  const std::vector<Rational> w{q(1, 4), q(3, 4)};
  auto ht = random_invariant_metric(99, w, 4, 2);
  auto field = descend_metric(ht, w, chart);
  auto rep = admissibility_check(field);
  EXPECT_TRUE(rep.admissible);
  double worst = 0.0;
  for (std::size_t i = 0; i < field.points.size(); ++i)
    worst = std::max(worst, sup_norm_diff(rep.lifted[i], ht(field.points[i].w)));
  EXPECT_LT(worst, 1e-10);
}

TEST(KawamataAdmissibility, RandomRoundTrips) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> rd(1, 4), nd(1, 6), dim(1, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const int r = rd(rng), N = nd(rng), n = dim(rng);
    auto w = random_weights(rng, r, N);
    auto ht = random_invariant_metric(rng(), w, N, n);
    LocalChart chart{.n = n, .cover = N};
    auto field = descend_metric(ht, w, chart);
    auto rep = admissibility_check(field);
    EXPECT_TRUE(rep.admissible) << "trial " << trial;
    for (std::size_t i = 0; i < field.points.size(); ++i)
      ASSERT_LT(sup_norm_diff(rep.lifted[i], ht(field.points[i].w)), 1e-10) << "trial " << trial;
  }
}

TEST(KawamataRebase, PreservesVerdicts) {
  LocalChart chart{.n = 2, .cover = 4};
  const std::vector<Rational> w{q(1, 4), q(3, 4)};
  auto field = descend_metric(random_invariant_metric(99, w, 4, 2), w, chart);
  EXPECT_EQ(rebase_cover(field, 1).admissible, admissibility_check(field).admissible);
  EXPECT_TRUE(rebase_cover(field, 2).admissible);
  EXPECT_TRUE(rebase_cover(field, 3).admissible);

  LocalChart line{.n = 1, .cover = 2};
  auto bad = sample_metric([](const Point&) { return scalar_matrix(1.0); }, {q(1, 2)}, line);
  for (int u = 1; u <= 4; ++u) EXPECT_FALSE(rebase_cover(bad, u).admissible) << u;
  EXPECT_THROW(rebase_cover(bad, 0), InputError);
}

TEST(KawamataRebase, MatchesDirectCheckAtLargerCover) {
  const std::vector<Rational> w{q(0, 1), q(1, 3), q(2, 3)};
  LocalChart chart{.n = 1, .cover = 3};
  auto field = descend_metric(random_invariant_metric(7, w, 3, 1), w, chart);
  auto rebased = rebase_cover(field, 2);
  LocalChart six = chart;
  six.cover = 6;
  auto direct = admissibility_check(sample_metric(field.downstairs, w, six));
  ASSERT_EQ(rebased.lifted.size(), direct.lifted.size());
  for (std::size_t i = 0; i < direct.lifted.size(); ++i) EXPECT_LT(sup_norm_diff(rebased.lifted[i], direct.lifted[i]), 1e-14);
  EXPECT_EQ(rebased.admissible, direct.admissible);
}

// ---------------------------------------------------------------------------
// curvature

TEST(KawamataCurvature, RankOneIsCoordinateChangeOnly) {
  std::mt19937_64 rng(3);
  const int N = 3;
  auto theta = equivariant_curvature(rng, {0}, N, 2);
  const Point z{std::polar(0.1, 0.4), Complex(0.2, -0.1)};
  auto down = curvature_descend_at(theta, {0}, N, z);
  const Point w = cover_point(z, N);
  auto expected = pullback_linear(theta(w)[0][0], cover_jacobian(z, w, N), 2);
  EXPECT_LT(max_abs(down[0][0] - expected), 1e-14);
}

TEST(KawamataCurvature, DiagonalStaysDiagonal) {
  const int N = 4;
  const std::vector<int> k{3, 1};
  CurvatureFunction theta = [](const Point& w) {
    std::vector<std::vector<Complex>> d{{1.0 + std::norm(w[0]), 2.0}, {0.5, 3.0 + std::norm(w[1])}};
    return testgen::diagonal_curvature(d, 2);
  };
  const Point z{std::polar(0.05, -2.0), Complex(0.1, 0.3)};
  auto down = curvature_descend_at(theta, k, N, z);
  EXPECT_TRUE(down[0][1].is_zero());
  EXPECT_TRUE(down[1][0].is_zero());
  const Point w = cover_point(z, N);
  const auto jac = cover_jacobian(z, w, N);
  for (int a = 0; a < 2; ++a) EXPECT_LT(max_abs(down[a][a] - pullback_linear(theta(w)[a][a], jac, 2)), 1e-14);
}

TEST(KawamataCurvature, ChernFormsAreInvariant) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int N = 2 + trial % 4, r = 2;
    auto weights = random_weights(rng, r, N);
    const auto k = frame_exponents(weights, N);
    auto theta = equivariant_curvature(rng, k, N, 2);
    LocalChart chart{.n = 2, .cover = N, .annuli = 4, .angular = 8};
    auto down = curvature_descend(theta, weights, chart);
    auto pts = sample_points(chart);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto up = theta(pts[i].w);
      const auto jac = cover_jacobian(pts[i].z, pts[i].w, N);
      for (auto& row : up)
        for (auto& f : row) f = pullback_linear(f, jac, 2);
      auto c_down = chern_forms(down[i]);
      auto c_up = chern_forms(up);
      for (std::size_t d = 0; d < c_up.size(); ++d) {
        const double scale = 1.0 + max_abs(c_up[d]);
        EXPECT_LT(max_abs(c_down[d] - c_up[d]), 1e-10 * scale);
      }
    }
  }
}

TEST(KawamataCurvature, BranchIndependence) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const int N = 2 + trial % 5, r = 1 + trial % 3;
    auto weights = random_weights(rng, r, N);
    const auto k = frame_exponents(weights, N);
    auto theta = equivariant_curvature(rng, k, N, 2);
    LocalChart chart{.n = 2, .cover = N, .annuli = 4, .angular = 8};
    for (const auto& p : sample_points(chart)) {
      auto a = curvature_descend_at(theta, k, N, p.z, Branch::principal);
      auto b = curvature_descend_at(theta, k, N, p.z, Branch::rotated);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) EXPECT_LT(max_abs(a[i][j] - b[i][j]), 1e-10 * (1.0 + max_abs(a[i][j])));
    }
  }
}

TEST(KawamataCurvature, ExactConjugationKeepsChernForms) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int r = 2 + trial % 2, n = 1 + trial % 2, N = 2 + trial % 4;
    auto theta = testgen::random_exact_curvature(rng, r, n);
    auto k = frame_exponents(random_weights(rng, r, N), N);
    GaussRational w1 = testgen::small_gauss(rng);
    if (w1.re == 0 && w1.im == 0) w1 = GaussRational(q(1, 3), q(1, 2));
    auto conj = frame_conjugate<ExactScalar>(theta, k, ExactScalar(w1), ExactScalar(GaussRational(1) / w1));
    EXPECT_EQ(chern_forms(conj), chern_forms(theta));
  }
}

// Θ̃ ≥ C·ω̃ upstairs iff Θ_H ≥ C·ω downstairs with ω the descended ω̃: the Griffiths
// quotient at a downstairs direction v equals the upstairs one at conj(J)v.
TEST(KawamataCurvature, GriffithsQuotientTransfers) {
  std::mt19937_64 rng(51);
  const int N = 3, n = 2;
  const std::vector<Rational> weights{q(1, 3), q(2, 3)};
  const auto k = frame_exponents(weights, N);
  auto theta = equivariant_curvature(rng, k, N, n);
  auto ht = random_invariant_metric(4, weights, N, n);
  const MatrixXc g_up = (MatrixXc(2, 2) << 2.0, Complex(0.3, 0.1), Complex(0.3, -0.1), 1.0).finished();
  auto quotient = [](const CurvatureMatrix<Complex>& th, const MatrixXc& h, const MatrixXc& g, const VectorXc& v) {
    const MatrixXc qm = griffiths_matrix(curvature_tensor(th), h, v);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(qm, hermitian_part(h));
    return es.eigenvalues()[0] / (v.adjoint() * g * v)(0, 0).real();
  };
  LocalChart chart{.n = n, .cover = N, .annuli = 4, .angular = 8};
  std::normal_distribution<double> gd;
  for (const auto& p : sample_points(chart)) {
    const auto jac = cover_jacobian(p.z, p.w, N);
    const MatrixXc g_down = pullback_coefficients(g_up, jac);
    const MatrixXc h_down = descend_value(ht, k, N, p.z);
    auto th_down = curvature_descend_at(theta, k, N, p.z);
    VectorXc v(2);
    v << Complex(gd(rng), gd(rng)), Complex(gd(rng), gd(rng));
    VectorXc v_up(2);
    v_up << std::conj(jac[0][0]) * v[0], v[1];
    const double down = quotient(th_down, h_down, g_down, v);
    const double up = quotient(theta(p.w), ht(p.w), g_up, v_up);
    EXPECT_NEAR(down, up, 1e-8 * (1.0 + std::abs(up)));
  }
  // the sampled margins agree too, up to sampling of directions
  const auto grid = sample_points(chart);
  const auto& p = grid[7];
  const auto jac = cover_jacobian(p.z, p.w, N);
  const MatrixXc g_down = pullback_coefficients(g_up, jac);
  SamplingConfig cfg;
  cfg.samples = 4096;
  auto up = griffiths_test(theta(p.w), ht(p.w), cfg, &g_up);
  auto down = griffiths_test(curvature_descend_at(theta, k, N, p.z), descend_value(ht, k, N, p.z), cfg, &g_down);
  EXPECT_NEAR(up.margin, down.margin, 0.05 * (1.0 + std::abs(up.margin)));
}

// ---------------------------------------------------------------------------
// cone metrics

TEST(KawamataCone, ZeroAngleIsEuclidean) {
  LocalChart chart{.n = 2, .cover = 1};
  auto forms = cone_metric(0.0, chart);
  const std::vector<std::vector<Complex>> id{{1.0, 0.0}, {0.0, 1.0}};
  for (const auto& f : forms) EXPECT_LT(max_abs(f - kahler_form(id)), 1e-15);
  EXPECT_THROW(cone_metric(2.0, chart), InputError);
  EXPECT_THROW(cone_metric(-0.1, chart), InputError);
}

TEST(KawamataCone, HalfAngleLiftsSmoothly) {
  // α = 1, N = 2: pulled back by z1 = w1² the dz1 dz̄1 block is |w1|^{-2}·4|w1|² = 4
  const int N = 2;
  FormFunction cone = [](const Point& z) { return cone_metric_at(1.0, z); };
  LocalChart chart{.n = 2, .cover = N};
  for (const auto& p : sample_points(chart)) {
    auto up = pullback_to_cover(cone, N, p.w);
    EXPECT_NEAR(std::abs(up.coefficient(1, 1) - Complex(0.0, 4.0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(up.coefficient(2, 2) - Complex(0.0, 1.0)), 0.0, 1e-15);
    EXPECT_EQ(up.coefficient(1, 2), Complex(0.0, 0.0));
  }
}

TEST(KawamataCone, AdmissibleKahlerDominatesCone) {
  LocalChart chart{.n = 2, .cover = 2};
  MatrixFunction euclid = [](const Point&) { return MatrixXc(MatrixXc::Identity(2, 2)); };
  RealFunction flat = [](const Point&) { return 1.0; };
  auto res = make_admissible_kahler(euclid, flat, 1.0, 0.0, chart);
  EXPECT_TRUE(std::isfinite(res.k_min));
  // Hessian of |z1| is |z1|^{-1}/4 ≥ 0, so no correction is needed
  EXPECT_NEAR(res.k_min, 0.0, 1e-6);
  // oracle: g = k + |z1|^{-1}/4 against |z1|^{-1} in the z1 slot, k against 1 in z2
  auto pts = sample_points(chart);
  double oracle = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    const double r = std::abs(p.z[0]);
    oracle = std::min({oracle, res.k * r + 0.25, res.k});
  }
  EXPECT_NEAR(res.cone_dominance, oracle, 1e-5);
  EXPECT_GT(res.cone_dominance, 0.2);
}

TEST(KawamataCone, CurvedDivisorMetricNeedsPositiveK) {
  LocalChart chart{.n = 2, .cover = 2};
  MatrixFunction euclid = [](const Point&) { return MatrixXc(MatrixXc::Identity(2, 2)); };
  // h_D = e^{-4|z2|²} makes ψ concave in z2
  RealFunction hd = [](const Point& z) { return std::exp(-4.0 * std::norm(z[1])); };
  auto res = make_admissible_kahler(euclid, hd, 1.0, 0.0, chart);
  EXPECT_GT(res.k_min, 0.0);
  auto at_min = make_admissible_kahler(euclid, hd, 1.0, res.k_min * (1.0 + 1e-9) + 1e-12, chart);
  EXPECT_GE(at_min.cone_dominance, -1e-9);
  auto below = make_admissible_kahler(euclid, hd, 1.0, 0.5 * res.k_min, chart);
  EXPECT_LT(below.cone_dominance, 0.0);
}

// ---------------------------------------------------------------------------
// L¹ currents

TEST(KawamataCurrent, WeightIntegralIsPiN) {
  for (int N = 2; N <= 6; ++N) {
    LocalChart chart{.n = 1, .cover = N, .annuli = 4, .angular = 8};
    auto res = line_current_decomposition([](const Point&) { return 1.0; }, q(1, N), chart);
    EXPECT_NEAR(res.weight_integral.value, kPi * N, 1e-6) << N;
    EXPECT_DOUBLE_EQ(res.weight_closed_form, kPi * N);
  }
}

TEST(KawamataCurrent, FlatUpstairsHasNoSmoothPart) {
  LocalChart chart{.n = 1, .cover = 3, .annuli = 4, .angular = 8};
  auto res = line_current_decomposition([](const Point&) { return 1.0; }, q(2, 3), chart);
  EXPECT_EQ(res.divisor_mass, q(2, 3));
  for (const auto& f : res.smooth_part) EXPECT_LT(max_abs(f), 1e-6);
}

TEST(KawamataCurrent, NoBranchingKeepsFullChernForm) {
  LocalChart chart{.n = 2, .cover = 1, .annuli = 4, .angular = 8};
  RealFunction h = [](const Point& w) { return 1.0 / (1.0 + std::norm(w[0]) + std::norm(w[1])); };
  auto res = line_current_decomposition(h, q(0, 1), chart);
  auto pts = sample_points(chart);
  for (std::size_t i = 0; i < pts.size(); ++i)
    EXPECT_LT(max_abs(res.smooth_part[i] - chern_form_of_line(h, pts[i].w, 1e-4)), 1e-12);
}

TEST(KawamataCurrent, GaussianBlockAndMass) {
  const int N = 2;
  LocalChart chart{.n = 1, .cover = N};
  RealFunction h = [](const Point& w) { return std::exp(-std::norm(w[0])); };
  auto res = line_current_decomposition(h, q(1, 2), chart);
  // c1(e^{-|w|²}) = (i/2π) dw dw̄ descends to (i/2π)|z1|^{2/N-2}/N² dz dz̄
  auto pts = sample_points(chart);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double expected = std::pow(std::abs(pts[i].z[0]), 2.0 / N - 2.0) / (N * N) / (2.0 * kPi);
    EXPECT_NEAR(res.smooth_part[i].coefficient(1, 1).imag(), expected, 1e-5 * expected);
  }
  // mass downstairs is the upstairs mass over N; upstairs it is ρ^{2/N}
  EXPECT_NEAR(res.upstairs_mass, std::pow(chart.rho, 2.0 / N), 1e-6);
  EXPECT_NEAR(res.smooth_mass, res.upstairs_mass / N, 1e-6);
}

TEST(KawamataCurrent, MassRatioForSeveralCovers) {
  for (int N = 2; N <= 5; ++N) {
    LocalChart chart{.n = 1, .cover = N, .annuli = 4, .angular = 8};
    RealFunction h = [](const Point& w) { return 1.0 / (1.0 + std::norm(w[0])); };
    auto res = line_current_decomposition(h, q(1, N), chart);
    EXPECT_NEAR(res.smooth_mass * N, res.upstairs_mass, 1e-6) << N;
  }
}

TEST(KawamataCurrent, BoundaryResidualDecays) {
  std::vector<double> eps;
  for (int e = 4; e <= 12; ++e) eps.push_back(std::ldexp(1.0, -e));
  auto gamma = [](Complex w) { return std::pair<Complex, Complex>{-std::conj(w), 0.0}; };
  auto test = [](Complex z) { return 1.0 + 0.5 * z + 0.25 * std::conj(z) * z; };
  for (int N = 1; N <= 6; ++N) {
    auto res = boundary_residual(gamma, N, test, eps);
    EXPECT_GE(res.slope, 2.0 / N - 0.1) << N;
    // f ≡ 1 oracle: |∮| = 2π ε^{2/N}/N
    auto flat = boundary_residual(gamma, N, [](Complex) { return Complex(1.0); }, eps);
    for (std::size_t i = 0; i < eps.size(); ++i)
      EXPECT_NEAR(flat.residuals[i], 2.0 * kPi * std::pow(eps[i], 2.0 / N) / N, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// form descent

TEST(KawamataForms, TransverseFormsAreSubstituted) {
  const int N = 3;
  FormFunction eta = [](const Point& w) {
    return Form<Complex>::dzdzbar(2, 1, 1, Complex(0.0, 1.0 + std::norm(w[0])));
  };
  LocalChart chart{.n = 2, .cover = N, .annuli = 4, .angular = 8};
  auto forms = descend_form(eta, chart);
  auto pts = sample_points(chart);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_LT(max_abs(forms[i] - eta(pts[i].w)), 1e-15);
}

TEST(KawamataForms, NormalBlockPicksUpWeight) {
  for (int N = 1; N <= 5; ++N) {
    FormFunction eta = [](const Point&) { return Form<Complex>::dzdzbar(1, 0, 0, 1.0); };
    LocalChart chart{.n = 1, .cover = N, .annuli = 4, .angular = 8};
    auto forms = descend_form(eta, chart);
    auto pts = sample_points(chart);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double expected = std::pow(std::abs(pts[i].z[0]), 2.0 / N - 2.0) / (N * N);
      EXPECT_NEAR(std::abs(forms[i].coefficient(1, 1) - expected), 0.0, 1e-12 * expected);
    }
  }
}

TEST(KawamataForms, NonInvariantFormIsRejected) {
  FormFunction eta = [](const Point&) { return Form<Complex>::dz(1, 0); };
  LocalChart chart{.n = 1, .cover = 2};
  EXPECT_THROW(descend_form(eta, chart), InputError);
}

TEST(KawamataForms, PullbackAfterDescendIsIdentity) {
  const int N = 4;
  // each term is invariant under w1 ↦ ζw1 (dw1 ↦ ζ dw1)
  FormFunction eta = [](const Point& w) {
    Form<Complex> f(2);
    f += Form<Complex>::dzdzbar(2, 0, 1, std::conj(w[0]) * (1.0 + w[1]));
    f += Form<Complex>::dzdzbar(2, 1, 0, w[0] * (1.0 + std::conj(w[1])));
    f += Form<Complex>::dzdzbar(2, 0, 0, Complex(2.0 + std::norm(w[0]), 0.0));
    f += Form<Complex>::monomial(2, 0b11, 0, std::pow(w[0], 3));
    return f;
  };
  LocalChart chart{.n = 2, .cover = N, .annuli = 6, .angular = 8};
  descend_form(eta, chart);  // invariance check passes
  FormFunction down = [&](const Point& z) { return descend_form_at(eta, N, z); };
  for (const auto& p : sample_points(chart)) {
    auto back = pullback_to_cover(down, N, p.w);
    EXPECT_LT(max_abs(back - eta(p.w)), 1e-12 * (1.0 + max_abs(eta(p.w))));
  }
}

// ---------------------------------------------------------------------------
// Bott-Chern

TEST(KawamataBottChern, EqualMetricsGiveZero) {
  RealFunction h = [](const Point& w) { return 1.0 / (1.0 + std::norm(w[0])); };
  auto res = bott_chern_line(h, h, {{Complex(0.1, 0.2)}, {Complex(-0.3, 0.0)}}, 1e-3);
  for (double v : res.potential) EXPECT_EQ(v, 0.0);
  for (const auto& f : res.ddc_potential) EXPECT_EQ(max_abs(f), 0.0);
  RealFunction bad = [](const Point&) { return 0.0; };
  EXPECT_THROW(bott_chern_line(h, bad, {{Complex(0.1, 0.0)}}, 1e-3), InputError);
}

TEST(KawamataBottChern, GaussianPotential) {
  RealFunction h1 = [](const Point& w) { return 1.0 / (1.0 + std::norm(w[0]) + std::norm(w[1])); };
  RealFunction h2 = [&](const Point& w) { return h1(w) * std::exp(-std::norm(w[0]) - std::norm(w[1])); };
  std::vector<Point> pts{{Complex(0.1, 0.2), Complex(-0.3, 0.1)}, {Complex(0.5, 0.0), Complex(0.0, 0.4)}};
  auto res = bott_chern_line(h1, h2, pts, 1e-3);
  const auto kappa = ScalarTraits<Complex>::chern_kappa();
  Form<Complex> expected = Form<Complex>::dzdzbar(2, 0, 0, kappa) + Form<Complex>::dzdzbar(2, 1, 1, kappa);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_NEAR(res.potential[i], std::norm(pts[i][0]) + std::norm(pts[i][1]), 1e-14);
    EXPECT_LT(max_abs(res.ddc_potential[i] - expected), 1e-7);
    // and it is the difference of the first Chern forms
    auto diff = chern_form_of_line(h2, pts[i], 1e-3) - chern_form_of_line(h1, pts[i], 1e-3);
    EXPECT_LT(max_abs(res.ddc_potential[i] - diff), 1e-7);
  }
}

TEST(KawamataBottChern, SecondOrderConvergence) {
  RealFunction h1 = [](const Point& w) { return 1.0 / (1.0 + std::norm(w[0]) + std::norm(w[1])); };
  RealFunction h2 = [](const Point& w) { return std::exp(-std::pow(std::norm(w[0]) + std::norm(w[1]), 2)); };
  const Point p{Complex(0.4, -0.2), Complex(0.3, 0.5)};
  // oracle: ∂_j∂̄_k of φ = -ln(1+|w|²) + |w|⁴
  const double s = std::norm(p[0]) + std::norm(p[1]);
  MatrixXc exact(2, 2);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      const Complex outer = std::conj(p[j]) * p[k];
      const double delta = j == k ? 1.0 : 0.0;
      exact(j, k) = -(delta * (1.0 + s) - outer) / ((1.0 + s) * (1.0 + s)) + 2.0 * (delta * s + outer);
    }
  std::vector<double> errs;
  for (double h : {0.1, 0.05, 0.025}) {
    auto res = bott_chern_line(h1, h2, {p}, h);
    double e = 0.0;
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const Complex c = res.ddc_potential[0].coefficient(Mask(1) << j, Mask(1) << k);
        e = std::max(e, std::abs(c - exact(j, k) * ScalarTraits<Complex>::chern_kappa()));
      }
    errs.push_back(e);
  }
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) EXPECT_GT(std::log2(errs[i] / errs[i + 1]), 1.8);
}

TEST(KawamataBottChern, InvariantInputsGiveInvariantPotential) {
  const int N = 3;
  RealFunction h1 = [](const Point& w) { return std::exp(-std::norm(w[0])); };
  RealFunction h2 = [](const Point& w) { return 1.0 + std::pow(std::norm(w[0]), 3) + std::real(std::pow(w[0], 3)) * 0.1; };
  LocalChart chart{.n = 1, .cover = N};
  std::vector<Point> pts, rotated;
  for (const auto& p : sample_points(chart)) {
    pts.push_back(p.w);
    rotated.push_back({p.w[0] * deck_root(N)});
  }
  auto a = bott_chern_line(h1, h2, pts, 1e-3);
  auto b = bott_chern_line(h1, h2, rotated, 1e-3);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_LT(std::abs(a.potential[i] - b.potential[i]), 1e-12);
}

// ---------------------------------------------------------------------------
// ample parabolic lines on P¹

TEST(KawamataAmpleLine, MarginTracksParabolicDegree) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> deg(-2, 2), pts(1, 3), num(0, 5);
  int positive = 0, other = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::map<std::string, std::vector<Rational>> points;
    const int m = pts(rng);
    for (int j = 0; j < m; ++j) points["p" + std::to_string(j)] = {q(num(rng), 6)};
    auto model = make_model(1, deg(rng), points);
    auto line = parabolic_line_positivity(model, default_divisor_positions(model));
    EXPECT_NEAR(line.margin, to_double(par_degree(model)), 1e-6) << trial;
    EXPECT_EQ(line.positive, ample_degree_test(model).ample) << trial;
    (line.positive ? positive : other)++;
  }
  EXPECT_GT(positive, 0);
  EXPECT_GT(other, 0);
}

TEST(KawamataAmpleLine, TrivialLineIsNotAmple) {
  auto model = make_model(1, 0, {{"p", {q(0, 1)}}});
  auto line = parabolic_line_positivity(model, default_divisor_positions(model));
  EXPECT_FALSE(line.positive);
  EXPECT_NEAR(line.margin, 0.0, 1e-6);
  EXPECT_THROW(parabolic_line_positivity(make_model(2, 0, {{"p", {q(0, 1), q(1, 2)}}}), {Complex(0.8)}),
               Unsupported);
}
