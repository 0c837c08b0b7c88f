#include "parachern/para_core.hpp"
#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace parachern;

namespace {

Rational q(std::int64_t a, std::int64_t b = 1) { return make_rational(a, b); }

ParabolicModel model(int rank, std::int64_t deg,
                     std::map<std::string, std::vector<Rational>> pts = {}) {
  return make_model(rank, deg, std::move(pts));
}

// Independent description of the filtration: exponent of z on the i-th frame
// vector of E_t is ceil(t - alpha_i).
std::int64_t oracle_local(const std::vector<Rational>& ws, const Rational& t) {
  std::int64_t c = 0;
  for (const auto& a : ws) c += ceil_of(t - a).convert_to<std::int64_t>();
  return c;
}

std::int64_t oracle_degree(const ParabolicModel& m, const Rational& t) {
  std::int64_t d = m.degree;
  for (const auto& [label, ws] : m.points) d -= oracle_local(ws, t);
  return d;
}

// Midpoint rule on cells of width 1/N is exact for a step function with jumps
// on multiples of 1/N.
Rational oracle_integral(const ParabolicModel& m) {
  const std::int64_t n = m.cover_degree;
  Rational acc = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    Rational mid = q(2 * k + 1, 2 * n);
    acc += Rational(oracle_degree(m, mid)) / Rational(n);
  }
  return acc;
}

Rational oracle_par_degree(const ParabolicModel& m) {
  return Rational(static_cast<std::int64_t>(m.rank * m.point_count())) + oracle_integral(m);
}

// Weights read off as right-jump locations of the local exponent on [0,1).
std::vector<Rational> jump_weights(const std::function<std::int64_t(const Rational&)>& local,
                                   std::int64_t grid) {
  std::vector<Rational> out;
  const Rational eps = q(1, 4 * grid);
  for (std::int64_t k = 0; k < grid; ++k) {
    Rational t = q(k, grid);
    std::int64_t drop = local(t + eps) - local(t);
    for (std::int64_t j = 0; j < drop; ++j) out.push_back(t);
  }
  return out;
}

// Dual filtration: E*_t = (E_{(-t-1)+})^*, so the local exponent negates.
ParabolicModel oracle_dual(const ParabolicModel& m) {
  const std::int64_t n = m.cover_degree;
  const Rational eps = q(1, 8 * n);
  std::map<std::string, std::vector<Rational>> pts;
  std::int64_t deg = 0;
  for (const auto& [label, ws] : m.points) {
    auto local = [&](const Rational& t) { return -oracle_local(ws, -t - 1 + eps); };
    pts[label] = jump_weights(local, n);
  }
  deg = -oracle_degree(m, q(-1) + eps);
  return make_model(m.rank, deg, pts);
}

// Tensor filtration generated by E_s (x) V_{t-s}: minimum exponent over s.
ParabolicModel oracle_tensor(const ParabolicModel& a, const ParabolicModel& b) {
  const std::int64_t n = std::lcm(a.cover_degree, b.cover_degree);
  std::map<std::string, std::vector<Rational>> pts;
  std::int64_t deg = b.rank * a.degree + a.rank * b.degree;
  for (const auto& [label, wa] : a.points) {
    const auto& wb = b.points.at(label);
    auto local = [&](const Rational& t) {
      std::int64_t total = 0;
      for (const auto& x : wa)
        for (const auto& y : wb) {
          std::int64_t best = std::numeric_limits<std::int64_t>::max();
          for (std::int64_t k = -4 * n; k <= 4 * n; ++k) {
            Rational s = q(k, 2 * n);
            std::int64_t e = (ceil_of(s - x) + ceil_of(t - s - y)).convert_to<std::int64_t>();
            best = std::min(best, e);
          }
          total += best;
        }
      return total;
    };
    pts[label] = jump_weights(local, 2 * n);
    deg -= local(q(0));
  }
  return make_model(a.rank * b.rank, deg, pts);
}

}  // namespace

TEST(ParDegree, ZeroWeightsGiveOrdinaryDegree) {
  EXPECT_EQ(par_degree(model(2, 3)), q(3));
}

TEST(ParDegree, HalfHalfOnRankTwo) {
  auto m = model(2, 1, {{"p", {q(1, 2), q(1, 2)}}});
  EXPECT_EQ(par_degree(m), q(2));
  EXPECT_EQ(oracle_par_degree(m), q(2));
}

TEST(ParDegree, RankThreeTwoPoints) {
  auto m = model(3, 0, {{"p", {q(1, 3), q(1, 3), q(2, 3)}}, {"r", {q(1, 4), q(1, 2), q(3, 4)}}});
  EXPECT_EQ(par_degree(m), q(17, 6));
  EXPECT_EQ(oracle_par_degree(m), q(17, 6));
  EXPECT_EQ(m.cover_degree, 12);
}

TEST(ParDegree, IntegralFormMatchesStepOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    auto m = testgen::random_model(rng);
    EXPECT_EQ(par_degree_integral_form(m), oracle_par_degree(m));
    EXPECT_EQ(par_degree_sum_form(m), oracle_par_degree(m));
  }
}

TEST(Filtration, NoPointsIsConstant) {
  auto f = my_filtration(model(2, 5));
  EXPECT_TRUE(f.jumps.empty());
  EXPECT_EQ(f.degree(q(1, 3)), 5);
  EXPECT_EQ(f.degree(q(7, 2)), 5);
}

TEST(Filtration, DoubleWeightSingleJump) {
  auto f = my_filtration(model(2, 0, {{"p", {q(1, 2), q(1, 2)}}}));
  ASSERT_EQ(f.jumps.size(), 1u);
  EXPECT_EQ(f.jumps[0].t, q(1, 2));
  EXPECT_EQ(f.jumps[0].rank_drop, 2);
}

TEST(Filtration, ThirdsJumpsAndIntegral) {
  auto m = model(2, 0, {{"p", {q(1, 3), q(2, 3)}}});
  auto f = my_filtration(m);
  ASSERT_EQ(f.jumps.size(), 2u);
  EXPECT_EQ(f.jumps[0].t, q(1, 3));
  EXPECT_EQ(f.jumps[1].t, q(2, 3));
  EXPECT_EQ(f.jumps[1].degree_at, -1);
  EXPECT_EQ(f.integral_over_period(), q(-1));
  EXPECT_EQ(par_degree(m), q(1));
}

TEST(Filtration, ZeroWeightJumpRecordedAtZero) {
  auto f = my_filtration(model(2, 0, {{"p", {q(0), q(1, 2)}}}));
  ASSERT_EQ(f.jumps.size(), 2u);
  EXPECT_EQ(f.jumps[0].t, q(0));
  EXPECT_EQ(f.degree(q(0)), 0);
  EXPECT_EQ(f.degree(q(1, 4)), -1);
}

TEST(Filtration, DegreeMatchesClosedFormEverywhere) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    auto m = testgen::random_model(rng);
    auto f = my_filtration(m);
    const std::int64_t n = 4 * m.cover_degree;
    for (std::int64_t k = -3 * n; k <= 3 * n; ++k)
      ASSERT_EQ(f.degree(q(k, n)), oracle_degree(m, q(k, n)));
  }
}

TEST(Filtration, StructuralPropertiesHold) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    auto m = testgen::random_model(rng);
    auto ok = filtration_properties(m, my_filtration(m));
    for (std::size_t p = 0; p < ok.size(); ++p) EXPECT_TRUE(ok[p]) << kFiltrationPropertyNames[p];
  }
}

TEST(Filtration, PropertyCheckDetectsCorruptedJumpTable) {
  auto m = model(2, 0, {{"p", {q(1, 3), q(2, 3)}}});
  auto f = my_filtration(m);
  f.jumps[0].t = q(1, 2);
  f.local_jumps["p"] = {{q(1, 2), 1}, {q(2, 3), 1}};
  auto ok = filtration_properties(m, f);
  EXPECT_FALSE(ok[5]);
}

TEST(Dual, LineWithThirdWeight) {
  auto d = dual(model(1, 0, {{"p", {q(1, 3)}}}));
  EXPECT_EQ(d.points.at("p"), std::vector<Rational>{q(2, 3)});
  EXPECT_EQ(d.degree, -1);
  EXPECT_EQ(par_degree(d), q(-1, 3));
}

TEST(Dual, ZeroWeightsNegateDegree) {
  auto d = dual(model(3, 4, {{"p", {q(0), q(0), q(0)}}}));
  EXPECT_EQ(d.degree, -4);
  EXPECT_TRUE(d.is_trivial_structure());
}

TEST(Dual, MixedZeroAndHalf) {
  auto m = model(2, 1, {{"p", {q(0), q(1, 2)}}});
  auto d = dual(m);
  EXPECT_EQ(d.points.at("p"), (std::vector<Rational>{q(0), q(1, 2)}));
  EXPECT_EQ(par_degree(d), q(-3, 2));
  EXPECT_EQ(d, oracle_dual(m));
}

TEST(Dual, MatchesFiltrationDualOracle) {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 200; ++i) {
    auto m = testgen::random_model(rng);
    EXPECT_EQ(dual(m), oracle_dual(m));
  }
}

TEST(Tensor, TrivialLineIsIdentity) {
  std::mt19937_64 rng(15);
  auto m = testgen::random_model(rng, {}, 3, testgen::point_labels(2));
  auto one = model(1, 0, {{"p0", {q(0)}}, {"p1", {q(0)}}});
  EXPECT_EQ(tensor(m, one), m);
}

TEST(Tensor, HalvesWrapAround) {
  auto a = model(1, 0, {{"p", {q(1, 2)}}});
  auto t = tensor(a, a);
  EXPECT_EQ(t.points.at("p"), std::vector<Rational>{q(0)});
  EXPECT_EQ(t.degree, 1);
  EXPECT_EQ(par_degree(t), q(1));
  EXPECT_EQ(t, oracle_tensor(a, a));
}

TEST(Tensor, RankTwoWithLine) {
  auto a = model(2, 0, {{"p", {q(1, 3), q(2, 3)}}});
  auto b = model(1, 0, {{"p", {q(2, 3)}}});
  auto t = tensor(a, b);
  EXPECT_EQ(t.points.at("p"), (std::vector<Rational>{q(0), q(1, 3)}));
  // both 1/3 + 2/3 and 2/3 + 2/3 reach 1
  EXPECT_EQ(t.degree, 2);
  EXPECT_EQ(t, oracle_tensor(a, b));
}

TEST(Tensor, MatchesGeneratedFiltrationOracle) {
  std::mt19937_64 rng(16);
  testgen::ModelShape shape{3, 6, 2, 4};
  for (int i = 0; i < 60; ++i) {
    auto labels = testgen::point_labels(static_cast<int>(rng() % 3));
    auto a = testgen::random_model(rng, shape, 1 + static_cast<int>(rng() % 3), labels);
    auto b = testgen::random_model(rng, shape, 1 + static_cast<int>(rng() % 2), labels);
    EXPECT_EQ(tensor(a, b), oracle_tensor(a, b));
  }
}

TEST(Tensor, MismatchedPointsRejected) {
  auto a = model(1, 0, {{"p", {q(1, 2)}}});
  auto b = model(1, 0, {{"r", {q(1, 2)}}});
  EXPECT_THROW(tensor(a, b), IncompatibleDivisors);
  EXPECT_THROW(direct_sum(a, b), IncompatibleDivisors);
}

TEST(Det, HalfAndTwoThirds) {
  auto d = det(model(2, 0, {{"p", {q(1, 2), q(2, 3)}}}));
  EXPECT_EQ(d.rank, 1);
  EXPECT_EQ(d.points.at("p"), std::vector<Rational>{q(1, 6)});
  EXPECT_EQ(d.degree, 1);
}

TEST(Det, ZeroWeightsGiveDeterminantLine) {
  auto d = det(model(3, -2, {{"p", {q(0), q(0), q(0)}}}));
  EXPECT_EQ(d.degree, -2);
  EXPECT_EQ(d.points.at("p"), std::vector<Rational>{q(0)});
}

TEST(DirectSum, ParDegreesAdd) {
  auto a = model(1, 1, {{"p", {q(1, 3)}}});
  auto b = model(1, 0, {{"p", {q(1, 2)}}});
  auto s = direct_sum(a, b);
  EXPECT_EQ(par_degree(s), q(11, 6));
  EXPECT_EQ(s.rank, 2);
  EXPECT_EQ(s.cover_degree, 6);
}

TEST(Identities, RandomCorpus) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    auto labels = testgen::point_labels(static_cast<int>(rng() % 5));
    testgen::ModelShape shape;
    auto a = testgen::random_model(rng, shape, 1 + static_cast<int>(rng() % 5), labels);
    auto b = testgen::random_model(rng, shape, 1 + static_cast<int>(rng() % 5), labels);
    const Rational pa = par_degree(a), pb = par_degree(b);
    ASSERT_EQ(par_degree(dual(a)), -pa);
    ASSERT_EQ(dual(dual(a)), a);
    ASSERT_EQ(par_degree(tensor(a, b)), Rational(b.rank) * pa + Rational(a.rank) * pb);
    ASSERT_EQ(par_degree(det(a)), pa);
    ASSERT_EQ(det(a).rank, 1);
    ASSERT_EQ(par_degree(direct_sum(a, b)), pa + pb);
  }
}

TEST(Stability, NoCandidatesIsStable) {
  auto v = is_stable(model(2, 1), {});
  EXPECT_EQ(v.verdict, Stability::stable);
  EXPECT_FALSE(v.witness);
}

TEST(Stability, DirectSumDestabilizedBySteeperLine) {
  auto l1 = model(1, 2), l2 = model(1, 0);
  auto v = is_stable(direct_sum(l1, l2), {l2, l1});
  EXPECT_EQ(v.verdict, Stability::unstable);
  ASSERT_TRUE(v.witness);
  EXPECT_EQ(*v.witness, 1u);
}

TEST(Stability, StableAgainstLowerSlopeLine) {
  auto e = model(2, 1, {{"p", {q(1, 4), q(3, 4)}}});
  auto f = model(1, 0, {{"p", {q(3, 4)}}});
  EXPECT_EQ(slope(e), q(1));
  EXPECT_EQ(slope(f), q(3, 4));
  EXPECT_EQ(is_stable(e, {f}).verdict, Stability::stable);
}

TEST(Stability, EqualSlopeIsSemistable) {
  auto e = model(2, 2);
  auto v = is_stable(e, {model(1, 1)});
  EXPECT_EQ(v.verdict, Stability::semistable);
  EXPECT_EQ(v.witness, std::optional<std::size_t>(0));
}

TEST(Stability, CandidateRankTooLarge) {
  EXPECT_THROW(is_stable(model(2, 0), {model(2, 0)}), InputError);
}

TEST(Ample, LineVerdicts) {
  EXPECT_TRUE(ample_degree_test(model(1, 0, {{"p", {q(1, 2)}}})).ample);
  EXPECT_FALSE(ample_degree_test(model(1, -1, {{"p", {q(1, 2)}}})).ample);
  EXPECT_FALSE(ample_degree_test(model(1, 0, {{"p", {q(0)}}})).ample);
}

TEST(Ample, SumOfLinesNeedsEverySummand) {
  auto good = model(1, 1), bad = model(1, 0);
  EXPECT_TRUE(ample_degree_test(std::vector{good, good}).ample);
  auto v = ample_degree_test(std::vector{good, bad});
  EXPECT_FALSE(v.ample);
  EXPECT_EQ(v.witness, std::optional<std::size_t>(1));
}

TEST(Ample, HigherRankUnsupported) {
  EXPECT_THROW(ample_degree_test(model(2, 3)), Unsupported);
}

TEST(Model, Validation) {
  EXPECT_THROW(model(2, 0, {{"p", {q(1, 2)}}}), InputError);
  EXPECT_THROW(model(1, 0, {{"p", {q(3, 2)}}}), InputError);
  EXPECT_THROW(model(1, 0, {{"p", {q(-1, 2)}}}), InputError);
  EXPECT_THROW(make_model(1, 0, {{"p", {q(1, 2)}}}, 4), InputError);
  auto m = model(2, 0, {{"p", {q(2, 3), q(1, 3)}}});
  EXPECT_EQ(m.points.at("p").front(), q(1, 3));
  EXPECT_TRUE(m.is_parabolic());
  EXPECT_FALSE(model(2, 0, {{"p", {q(0), q(0)}}}).is_parabolic());
}
