#pragma once

// Exact algebra of parabolic structures on a curve: weights, the weighted
// filtration {E_t}, functorial operations, parabolic degree and slope tests.
//
// Filtration convention. With weights alpha_i in [0,1) at each point p,
//   deg(E_t) = deg(E) - sum_p sum_i ceil(t - alpha_i),
// which is decreasing, left-continuous, has E_0 = E, and satisfies
// E_{t+1} = E_t(-D). The sheaf drops just to the right of each weight.

#include "parachern/scalar.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace parachern {

struct ParabolicModel {
  int rank = 1;
  std::int64_t degree = 0;
  // Weights per divisor point, sorted nondecreasing, one per rank.
  std::map<std::string, std::vector<Rational>> points;
  // Least common denominator of all weights (1 when there are none).
  std::int64_t cover_degree = 1;

  std::size_t point_count() const { return points.size(); }

  /// All weights zero: the underlying bundle with no genuine parabolic data.
  bool is_trivial_structure() const {
    for (const auto& [label, ws] : points)
      for (const auto& a : ws)
        if (a != 0) return false;
    return true;
  }

  bool is_parabolic() const { return !is_trivial_structure(); }

  friend bool operator==(const ParabolicModel&, const ParabolicModel&) = default;
};

inline std::int64_t lcm_of_denominators(const ParabolicModel& m) {
  std::int64_t n = 1;
  for (const auto& [label, ws] : m.points)
    for (const auto& a : ws)
      n = std::lcm(n, boost::multiprecision::denominator(a).convert_to<std::int64_t>());
  return n;
}

/// Sorts weights, checks ranges and cardinalities, and fills in the cover degree.
/// If `declared_cover` is given it must equal the least common denominator.
inline ParabolicModel make_model(int rank, std::int64_t degree,
                                 std::map<std::string, std::vector<Rational>> points,
                                 std::optional<std::int64_t> declared_cover = std::nullopt) {
  if (rank < 1) throw InputError("rank must be positive");
  ParabolicModel m;
  m.rank = rank;
  m.degree = degree;
  for (auto& [label, ws] : points) {
    if (static_cast<int>(ws.size()) != rank)
      throw InputError("point '" + label + "' has " + std::to_string(ws.size()) +
                       " weights, expected " + std::to_string(rank));
    for (const auto& a : ws)
      if (a < 0 || a >= 1)
        throw InputError("weight " + to_string(a) + " at point '" + label + "' is outside [0,1)");
    std::sort(ws.begin(), ws.end());
  }
  m.points = std::move(points);
  m.cover_degree = lcm_of_denominators(m);
  if (declared_cover && *declared_cover != m.cover_degree)
    throw InputError("coverDegree " + std::to_string(*declared_cover) +
                     " differs from the weight denominators' lcm " +
                     std::to_string(m.cover_degree));
  return m;
}

/// Re-validates an already assembled model.
inline void validate(const ParabolicModel& m) {
  auto copy = make_model(m.rank, m.degree, m.points, m.cover_degree);
  if (copy.points != m.points) throw InputError("weights are not sorted");
}

// ---------------------------------------------------------------------------
// Filtration

struct FilterJump {
  Rational t;             // location in [0,1); the drop happens just right of t
  int rank_drop = 0;      // total multiplicity of weight t over all points
  std::int64_t degree_at = 0;  // deg(E_t), i.e. the value before the drop
  friend bool operator==(const FilterJump&, const FilterJump&) = default;
};

struct FilterFunction {
  int rank = 1;
  std::int64_t base_degree = 0;        // deg(E_0)
  std::int64_t period_drop = 0;        // deg(E_t) - deg(E_{t+1}) = rank * #points
  std::vector<FilterJump> jumps;       // sorted by t
  // Per-point jump data: label -> (t -> multiplicity). Needed for the
  // pointwise properties of the filtration.
  std::map<std::string, std::map<Rational, int>> local_jumps;

  /// deg(E_t) for any rational t, reconstructed from the jump table.
  std::int64_t degree(const Rational& t) const {
    BigInt periods = floor_of(t);
    Rational s = t - Rational(periods);  // s in [0,1)
    std::int64_t d = base_degree - periods.convert_to<std::int64_t>() * period_drop;
    // Left continuity: a jump at u affects E_s only for s > u.
    if (s == 0) return d;
    for (const auto& j : jumps)
      if (j.t < s) d -= j.rank_drop;
    return d;
  }

  /// Colength of E_t inside E_0 at one point (the local picture of the sheaf).
  std::int64_t local_colength(const std::string& label, const Rational& t) const {
    const auto& js = local_jumps.at(label);
    BigInt periods = floor_of(t);
    Rational s = t - Rational(periods);
    std::int64_t c = periods.convert_to<std::int64_t>() * rank;
    if (s == 0) return c;
    for (const auto& [u, mult] : js)
      if (u < s) c += mult;
    return c;
  }

  /// Integral of deg(E_t) over [0,1], piecewise constant between jumps.
  Rational integral_over_period() const {
    Rational acc = 0;
    Rational prev = 0;
    std::int64_t value = base_degree;
    for (const auto& j : jumps) {
      acc += Rational(value) * (j.t - prev);
      value -= j.rank_drop;
      prev = j.t;
    }
    acc += Rational(value) * (Rational(1) - prev);
    return acc;
  }
};

inline FilterFunction my_filtration(const ParabolicModel& m) {
  FilterFunction f;
  f.rank = m.rank;
  f.base_degree = m.degree;
  f.period_drop = static_cast<std::int64_t>(m.rank) * static_cast<std::int64_t>(m.point_count());
  std::map<Rational, int> all;
  for (const auto& [label, ws] : m.points) {
    auto& local = f.local_jumps[label];
    for (const auto& a : ws) {
      ++local[a];
      ++all[a];
    }
  }
  std::int64_t d = m.degree;
  for (const auto& [t, mult] : all) {
    f.jumps.push_back({t, mult, d});
    d -= mult;
  }
  return f;
}

inline const std::array<const char*, 6> kFiltrationPropertyNames = {
    "decreasing", "left-continuous", "periodic-twist", "E0-is-E", "finite-jumps",
    "jumps-at-weights"};

/// Checks the six structural properties of the filtration on the grid of
/// multiples of 1/(4N) in [-2, 2], where N is the cover degree.
inline std::array<bool, 6> filtration_properties(const ParabolicModel& m, const FilterFunction& f) {
  std::array<bool, 6> ok{true, true, true, true, true, true};
  const std::int64_t n4 = 4 * m.cover_degree;
  const Rational step(BigInt(1), BigInt(n4));
  const Rational half = step / 2;

  std::map<std::string, std::vector<Rational>> weight_sets = m.points;
  auto is_weight_somewhere = [&](const Rational& s) {
    for (const auto& [label, ws] : weight_sets)
      if (std::find(ws.begin(), ws.end(), s) != ws.end()) return true;
    return false;
  };

  int jumps_seen = 0;
  for (std::int64_t k = -2 * n4; k <= 2 * n4; ++k) {
    Rational t = step * k;
    std::int64_t here = f.degree(t);
    std::int64_t right = f.degree(t + half);
    std::int64_t left = f.degree(t - half);
    // (1) decreasing: degrees and local colengths are monotone.
    if (right > here || here > left) ok[0] = false;
    for (const auto& [label, ws] : m.points)
      if (f.local_colength(label, t + half) < f.local_colength(label, t)) ok[0] = false;
    // (2) left-continuity: E_t agrees with E_{t-eps}.
    // Weights lie on the coarse grid, so t - half is never a jump location.
    if (here != left) ok[1] = false;
    for (const auto& [label, ws] : m.points)
      if (f.local_colength(label, t) != f.local_colength(label, t - half)) ok[1] = false;
    // (3) E_{t+1} = E_t(-D).
    if (f.degree(t + 1) != here - f.period_drop) ok[2] = false;
    for (const auto& [label, ws] : m.points)
      if (f.local_colength(label, t + 1) != f.local_colength(label, t) + m.rank) ok[2] = false;
    // (6) right jump at t iff frac(t) is a weight.
    bool jumps = false;
    for (const auto& [label, ws] : m.points)
      if (f.local_colength(label, t + half) != f.local_colength(label, t)) jumps = true;
    if (jumps != is_weight_somewhere(frac_of(t))) ok[5] = false;
    if (jumps && t >= 0 && t < 1) ++jumps_seen;
  }
  // (4) E_0 = E.
  if (f.degree(Rational(0)) != m.degree) ok[3] = false;
  for (const auto& [label, ws] : m.points)
    if (f.local_colength(label, Rational(0)) != 0) ok[3] = false;
  // (5) finitely many jumps per unit interval, matching the jump table.
  std::size_t distinct = 0;
  {
    std::vector<Rational> all;
    for (const auto& [label, ws] : m.points) all.insert(all.end(), ws.begin(), ws.end());
    std::sort(all.begin(), all.end());
    distinct = static_cast<std::size_t>(std::unique(all.begin(), all.end()) - all.begin());
  }
  if (f.jumps.size() != distinct || static_cast<std::size_t>(jumps_seen) != distinct) ok[4] = false;
  return ok;
}

// ---------------------------------------------------------------------------
// Degrees

inline Rational weight_sum(const ParabolicModel& m) {
  Rational s = 0;
  for (const auto& [label, ws] : m.points)
    for (const auto& a : ws) s += a;
  return s;
}

inline Rational par_degree_sum_form(const ParabolicModel& m) {
  return Rational(m.degree) + weight_sum(m);
}

/// r * deg O(D) + integral_0^1 deg(E_t) dt.
inline Rational par_degree_integral_form(const ParabolicModel& m) {
  FilterFunction f = my_filtration(m);
  return Rational(static_cast<std::int64_t>(m.rank) * static_cast<std::int64_t>(m.point_count())) +
         f.integral_over_period();
}

inline Rational par_degree(const ParabolicModel& m) {
  Rational sum_form = par_degree_sum_form(m);
  Rational integral_form = par_degree_integral_form(m);
  if (sum_form != integral_form)
    throw std::logic_error("parabolic degree forms disagree: " + to_string(sum_form) + " vs " +
                           to_string(integral_form));
  return sum_form;
}

inline Rational slope(const ParabolicModel& m) { return par_degree(m) / Rational(m.rank); }

// ---------------------------------------------------------------------------
// Operations

inline void require_same_points(const ParabolicModel& a, const ParabolicModel& b) {
  auto ia = a.points.begin();
  auto ib = b.points.begin();
  for (; ia != a.points.end() && ib != b.points.end(); ++ia, ++ib)
    if (ia->first != ib->first) break;
  if (ia != a.points.end() || ib != b.points.end())
    throw IncompatibleDivisors("parabolic divisors differ between the two models");
}

/// Weights alpha -> 1 - alpha (0 stays 0); the underlying bundle is (E_{eps-1})^*.
inline ParabolicModel dual(const ParabolicModel& m) {
  std::map<std::string, std::vector<Rational>> pts;
  std::int64_t nonzero = 0;
  for (const auto& [label, ws] : m.points) {
    auto& out = pts[label];
    for (const auto& a : ws) {
      if (a > 0) {
        out.push_back(Rational(1) - a);
        ++nonzero;
      } else {
        out.push_back(Rational(0));
      }
    }
  }
  // deg(E_{eps-1}) = deg E + #(nonzero weights)
  return make_model(m.rank, -(m.degree + nonzero), std::move(pts));
}

inline ParabolicModel tensor(const ParabolicModel& a, const ParabolicModel& b) {
  require_same_points(a, b);
  std::map<std::string, std::vector<Rational>> pts;
  std::int64_t wraps = 0;
  for (const auto& [label, wa] : a.points) {
    const auto& wb = b.points.at(label);
    auto& out = pts[label];
    for (const auto& x : wa)
      for (const auto& y : wb) {
        Rational s = x + y;
        if (s >= 1) {
          s -= 1;
          ++wraps;
        }
        out.push_back(s);
      }
  }
  std::int64_t deg = static_cast<std::int64_t>(b.rank) * a.degree +
                     static_cast<std::int64_t>(a.rank) * b.degree + wraps;
  return make_model(a.rank * b.rank, deg, std::move(pts));
}

inline ParabolicModel direct_sum(const ParabolicModel& a, const ParabolicModel& b) {
  require_same_points(a, b);
  std::map<std::string, std::vector<Rational>> pts;
  for (const auto& [label, wa] : a.points) {
    auto& out = pts[label];
    out = wa;
    const auto& wb = b.points.at(label);
    out.insert(out.end(), wb.begin(), wb.end());
  }
  return make_model(a.rank + b.rank, a.degree + b.degree, std::move(pts));
}

inline ParabolicModel det(const ParabolicModel& m) {
  std::map<std::string, std::vector<Rational>> pts;
  std::int64_t extra = 0;
  for (const auto& [label, ws] : m.points) {
    Rational s = 0;
    for (const auto& a : ws) s += a;
    BigInt whole = floor_of(s);
    extra += whole.convert_to<std::int64_t>();
    pts[label] = {s - Rational(whole)};
  }
  return make_model(1, m.degree + extra, std::move(pts));
}

// ---------------------------------------------------------------------------
// Stability and ampleness

enum class Stability { stable, semistable, unstable };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::semistable: return "semistable";
    case Stability::unstable: return "unstable";
  }
  return "?";
}

struct StabilityVerdict {
  Stability verdict = Stability::stable;
  std::optional<std::size_t> witness;  // index into the candidate list
  Rational slope;
};

/// Stability relative to caller-certified sub-models: stable iff every candidate
/// has strictly smaller slope. The witness is the candidate of largest slope
/// among those violating the strict inequality.
inline StabilityVerdict is_stable(const ParabolicModel& m, const std::vector<ParabolicModel>& candidates) {
  StabilityVerdict v;
  v.slope = slope(m);
  std::optional<Rational> worst;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.rank >= m.rank)
      throw InputError("candidate " + std::to_string(i) + " has rank " + std::to_string(c.rank) +
                       " >= " + std::to_string(m.rank));
    Rational s = slope(c);
    if (s >= v.slope && (!worst || s > *worst)) {
      worst = s;
      v.witness = i;
    }
  }
  if (worst) v.verdict = *worst > v.slope ? Stability::unstable : Stability::semistable;
  return v;
}

struct AmpleVerdict {
  bool ample = false;
  std::optional<std::size_t> witness;  // first summand with par-deg <= 0
  Rational min_par_degree;
};

/// A sum of parabolic lines is ample iff each summand has positive parabolic degree.
inline AmpleVerdict ample_degree_test(const std::vector<ParabolicModel>& summands) {
  if (summands.empty()) throw InputError("no summands");
  AmpleVerdict v;
  v.ample = true;
  for (std::size_t i = 0; i < summands.size(); ++i) {
    if (summands[i].rank != 1)
      throw Unsupported("ampleness is only decided for lines and sums of lines");
    Rational d = par_degree(summands[i]);
    if (i == 0 || d < v.min_par_degree) v.min_par_degree = d;
    if (d <= 0 && v.ample) {
      v.ample = false;
      v.witness = i;
    }
  }
  return v;
}

inline AmpleVerdict ample_degree_test(const ParabolicModel& m) {
  return ample_degree_test(std::vector<ParabolicModel>{m});
}

}  // namespace parachern
