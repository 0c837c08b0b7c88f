#pragma once

// Verification commands behind the command-line tool. Each command reads one
// JSON document, runs the wrapped module and returns a Report holding results,
// pass/fail checks and CSV tables. A report is a deterministic function of the
// document, any file it references, the tolerance/sample/seed settings and the
// tool version; worker counts never change it.

#include "parachern/errors.hpp"
#include "parachern/forms.hpp"
#include "parachern/json_io.hpp"
#include "parachern/kawamata.hpp"
#include "parachern/ma_solver.hpp"
#include "parachern/para_core.hpp"
#include "parachern/positivity.hpp"
#include "parachern/pushforward.hpp"
#include "parachern/torus.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#ifndef PARACHERN_VERSION
#define PARACHERN_VERSION "0.0.0"
#endif

namespace parachern::reports {

using io::InputJson;
using io::Json;
using io::Node;

inline constexpr const char* kVersion = PARACHERN_VERSION;
inline constexpr std::uint64_t kDefaultSeed = 20240917;

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kInputError = 2, kRuntimeError = 3 };

inline constexpr std::array<std::string_view, 6> kCommands = {"pardeg", "ops",         "admissible",
                                                              "chern",  "pushforward", "masolve"};

inline bool is_command(std::string_view name) {
  return std::find(kCommands.begin(), kCommands.end(), name) != kCommands.end();
}

struct Settings {
  std::optional<double> tol;     // overrides each command's check tolerance
  std::optional<int> samples;    // sampling budget for stochastic checks
  std::uint64_t seed = kDefaultSeed;
  unsigned workers = 1;
  std::filesystem::path base_dir;  // resolves file references inside the input
};

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// CSV text with full double precision.
class Csv {
public:
  explicit Csv(const std::vector<std::string>& header) {
    os_ << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }

  template <class... T>
  void row(const T&... values) {
    bool first = true;
    ((os_ << (first ? "" : ",") << values, first = false), ...);
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

private:
  std::ostringstream os_;
};

struct Check {
  std::string name;
  bool pass = false;
  Json detail;
};

struct CsvTable {
  std::string name;
  std::string content;
};

struct Report {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = kDefaultSeed;
  Json settings = Json::object();
  Json inputs;
  Json results = Json::object();
  std::vector<Check> checks;
  std::vector<CsvTable> tables;

  void check(std::string name, bool pass, Json detail = Json::object()) {
    checks.push_back({std::move(name), pass, std::move(detail)});
  }

  /// Folds a referenced file's bytes into the configuration hash.
  void mix_hash(std::string_view bytes) { config_hash = fnv1a64(bytes, config_hash); }

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  Json to_json() const {
    Json out;
    out["tool"] = "parachern";
    out["version"] = kVersion;
    out["command"] = command;
    out["configHash"] = hex64(config_hash);
    out["seed"] = seed;
    out["settings"] = settings;
    out["inputs"] = inputs;
    out["results"] = results;
    Json cs = Json::array();
    for (const auto& c : checks) {
      Json e;
      e["name"] = c.name;
      e["status"] = c.pass ? "PASS" : "FAIL";
      if (c.detail.is_object())
        for (auto it = c.detail.begin(); it != c.detail.end(); ++it) e[it.key()] = it.value();
      cs.push_back(std::move(e));
    }
    out["checks"] = std::move(cs);
    out["pass"] = pass();
    return out;
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }
};

inline int exit_code(const Report& r) { return r.pass() ? kPass : kCheckFailed; }

/// Maps an exception to the exit-code contract: rejected input is 2, anything
/// raised while computing is 3.
inline int classify_exception(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const InputError&) {
    return kInputError;
  } catch (const Unsupported&) {
    return kInputError;
  } catch (const nlohmann::json::exception&) {
    return kInputError;
  } catch (...) {
    return kRuntimeError;
  }
}

namespace detail {

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Report begin(const std::string& command, const InputJson& doc, const Settings& s) {
  Report r;
  r.command = command;
  r.seed = s.seed;
  r.inputs = Json::parse(doc.dump());
  std::ostringstream key;
  key << std::setprecision(17) << "parachern " << kVersion << '\n'
      << command << '\n'
      << doc.dump() << '\n'
      << "tol=" << (s.tol ? std::to_string(*s.tol) : "default") << " samples="
      << (s.samples ? std::to_string(*s.samples) : "default") << " seed=" << s.seed << '\n';
  r.config_hash = fnv1a64(key.str());
  r.settings["seed"] = s.seed;
  return r;
}

inline Json rational(const Rational& q) { return to_string(q); }

inline Json filtration_json(const FilterFunction& f) {
  Json out;
  out["baseDegree"] = f.base_degree;
  out["periodDrop"] = f.period_drop;
  Json jumps = Json::array();
  for (const auto& j : f.jumps) {
    Json e;
    e["t"] = to_string(j.t);
    e["rankDrop"] = j.rank_drop;
    e["degreeAt"] = j.degree_at;
    jumps.push_back(std::move(e));
  }
  out["jumps"] = std::move(jumps);
  return out;
}

inline bool all_filtration_properties(const ParabolicModel& m) {
  const auto props = filtration_properties(m, my_filtration(m));
  return std::all_of(props.begin(), props.end(), [](bool b) { return b; });
}

inline std::vector<Rational> weights_from_json(const Node& node) {
  std::vector<Rational> out;
  for (const auto& w : node.items()) {
    Rational a = w.as_rational();
    if (a < 0 || a >= 1) w.fail("weight " + to_string(a) + " is outside [0,1)");
    out.push_back(std::move(a));
  }
  if (out.empty()) node.fail("at least one weight is required");
  if (!std::is_sorted(out.begin(), out.end())) node.fail("weights must be nondecreasing");
  return out;
}

template <class Fn>
auto at_location(const Node& node, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const IncompatibleDivisors& e) {
    throw IncompatibleDivisors(node.where() + ": " + e.what());
  } catch (const InputError& e) {
    node.fail(e.what());
  }
}

inline CurvatureMatrix<Complex> to_complex_matrix(const CurvatureMatrix<ExactScalar>& theta) {
  CurvatureMatrix<Complex> out;
  for (const auto& row : theta) {
    std::vector<Form<Complex>> r;
    for (const auto& f : row) r.push_back(to_complex(f));
    out.push_back(std::move(r));
  }
  return out;
}
inline CurvatureMatrix<Complex> to_complex_matrix(const CurvatureMatrix<Complex>& theta) { return theta; }

/// Nonincreasing partitions of `weight` with at most `parts` parts.
inline std::vector<std::vector<int>> partitions(int weight, int parts, int largest) {
  if (weight == 0) return {{}};
  std::vector<std::vector<int>> out;
  if (parts == 0) return out;
  for (int first = std::min(weight, largest); first >= 1; --first)
    for (auto rest : partitions(weight - first, parts - 1, first)) {
      rest.insert(rest.begin(), first);
      out.push_back(std::move(rest));
    }
  return out;
}

inline Json sign_json(Sign v, double margin) {
  Json out;
  out["verdict"] = to_string(v);
  out["margin"] = io::number(margin);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// pardeg: {"model": <model>, "candidates": [<model>...]} or a bare model.

inline Report cmd_pardeg(const InputJson& doc, const Settings& s) {
  const Node root(doc, "");
  const Node model_node = root.has("model") ? root.at("model") : root;
  const ParabolicModel m = io::model_from_json(model_node);
  std::vector<ParabolicModel> candidates;
  if (auto c = root.find("candidates"))
    for (const auto& item : c->items()) candidates.push_back(io::model_from_json(item));

  Report rep = detail::begin("pardeg", doc, s);
  rep.settings["tol"] = nullptr;
  const Rational pd = par_degree(m), sum = par_degree_sum_form(m), integral = par_degree_integral_form(m);
  const FilterFunction f = my_filtration(m);
  const auto props = filtration_properties(m, f);

  auto& res = rep.results;
  res["model"] = io::model_to_json(m);
  res["parDegree"] = detail::rational(pd);
  res["parDegreeSumForm"] = detail::rational(sum);
  res["parDegreeIntegralForm"] = detail::rational(integral);
  res["slope"] = detail::rational(slope(m));
  res["parabolic"] = m.is_parabolic();
  res["trivialStructure"] = m.is_trivial_structure();
  res["filtration"] = detail::filtration_json(f);
  Json pj;
  for (std::size_t i = 0; i < props.size(); ++i) pj[kFiltrationPropertyNames[i]] = props[i];
  res["filtrationProperties"] = pj;

  Json d;
  d["sumForm"] = detail::rational(sum);
  d["integralForm"] = detail::rational(integral);
  rep.check("parDegreeSumEqualsIntegral", sum == integral, d);
  for (std::size_t i = 0; i < props.size(); ++i)
    rep.check(std::string("filtration.") + kFiltrationPropertyNames[i], props[i]);

  if (!candidates.empty()) {
    const auto v = detail::at_location(root.at("candidates"), [&] { return is_stable(m, candidates); });
    Json st;
    st["verdict"] = to_string(v.verdict);
    st["slope"] = detail::rational(v.slope);
    st["witness"] = v.witness ? Json(*v.witness) : Json(nullptr);
    Json slopes = Json::array();
    for (const auto& c : candidates) slopes.push_back(detail::rational(slope(c)));
    st["candidateSlopes"] = std::move(slopes);
    res["stability"] = std::move(st);
  }
  if (m.rank == 1) {
    const auto a = ample_degree_test(m);
    const auto line = parabolic_line_positivity(m, default_divisor_positions(m));
    Json am;
    am["ample"] = a.ample;
    am["metricMargin"] = io::number(line.margin);
    am["metricPositive"] = line.positive;
    res["ampleness"] = std::move(am);
    Json ad;
    ad["degreeVerdict"] = a.ample;
    ad["metricVerdict"] = line.positive;
    rep.check("amplenessMatchesMetric", a.ample == line.positive, ad);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// ops: {"a": <model>, "b": <model>} or a bare model (used for both operands).

inline Report cmd_ops(const InputJson& doc, const Settings& s) {
  const Node root(doc, "");
  ParabolicModel a, b;
  if (root.has("a")) {
    a = io::model_from_json(root.at("a"));
    b = root.has("b") ? io::model_from_json(root.at("b")) : a;
  } else {
    a = io::model_from_json(root);
    b = a;
  }
  Report rep = detail::begin("ops", doc, s);
  rep.settings["tol"] = nullptr;

  const ParabolicModel da = dual(a), dda = dual(da), da_b = det(a);
  const ParabolicModel t = detail::at_location(root, [&] { return tensor(a, b); });
  const ParabolicModel ds = detail::at_location(root, [&] { return direct_sum(a, b); });
  const Rational pa = par_degree(a), pb = par_degree(b);

  auto entry = [](const ParabolicModel& m) {
    Json e;
    e["model"] = io::model_to_json(m);
    e["parDegree"] = detail::rational(par_degree(m));
    e["slope"] = detail::rational(slope(m));
    return e;
  };
  Json operands;
  operands["a"] = entry(a);
  operands["b"] = entry(b);
  rep.results["operands"] = operands;
  Json ops;
  ops["dual"] = entry(da);
  ops["dualDual"] = entry(dda);
  ops["tensor"] = entry(t);
  ops["directSum"] = entry(ds);
  ops["det"] = entry(da_b);
  rep.results["operations"] = ops;

  auto pair = [](const Rational& got, const Rational& want) {
    Json d;
    d["value"] = detail::rational(got);
    d["expected"] = detail::rational(want);
    return d;
  };
  rep.check("dualNegatesParDegree", par_degree(da) == -pa, pair(par_degree(da), -pa));
  rep.check("dualIsInvolution", dda == a);
  const Rational bilinear = Rational(b.rank) * pa + Rational(a.rank) * pb;
  rep.check("tensorIsBilinear", par_degree(t) == bilinear, pair(par_degree(t), bilinear));
  rep.check("detPreservesParDegree", par_degree(da_b) == pa, pair(par_degree(da_b), pa));
  rep.check("detIsLine", da_b.rank == 1);
  rep.check("directSumIsAdditive", par_degree(ds) == pa + pb, pair(par_degree(ds), pa + pb));
  bool forms_agree = true, filtrations = true;
  for (const ParabolicModel* m : std::array<const ParabolicModel*, 7>{&a, &b, &da, &dda, &t, &ds, &da_b}) {
    forms_agree = forms_agree && par_degree_sum_form(*m) == par_degree_integral_form(*m);
    filtrations = filtrations && detail::all_filtration_properties(*m);
  }
  rep.check("sumFormEqualsIntegralForm", forms_agree);
  rep.check("filtrationProperties", filtrations);
  return rep;
}

// ---------------------------------------------------------------------------
// admissible: {"weights": [...], "N", "n", "rho", "radialNodes", "angularNodes",
// "slices", "metric": {"kind": "invariant" | "identity" | "power" | "constant", ...},
// "expectAdmissible": bool, "rebase": [u...]}. Power metrics are diag(|z1|^{2e_i})
// with e_i listed in frame-slot order, where slot i carries weight α_{r-1-i}.

inline Report cmd_admissible(const InputJson& doc, const Settings& s) {
  const Node root(doc, "");
  const std::vector<Rational> weights = detail::weights_from_json(root.at("weights"));
  const int r = static_cast<int>(weights.size());
  LocalChart chart;
  chart.cover = root.at("N").as_int_in(1, 64);
  chart.n = static_cast<int>(root.has("n") ? root.at("n").as_int_in(1, 4) : 1);
  chart.rho = root.get_or("rho", 0.5);
  chart.annuli = static_cast<int>(root.has("radialNodes") ? root.at("radialNodes").as_int_in(4, 40) : 8);
  chart.angular = static_cast<int>(root.has("angularNodes") ? root.at("angularNodes").as_int_in(4, 4096) : 16);
  chart.slices = static_cast<int>(root.has("slices") ? root.at("slices").as_int_in(1, 64) : 2);
  detail::at_location(root, [&] { chart.validate(); return 0; });
  const std::vector<int> k = detail::at_location(root.at("weights"), [&] { return frame_exponents(weights, chart.cover); });
  const bool expect = root.get_or("expectAdmissible", true);
  std::vector<int> factors{2, 3};
  if (auto f = root.find("rebase")) {
    factors.clear();
    for (const auto& u : f->items()) factors.push_back(static_cast<int>(u.as_int_in(1, 16)));
  }

  const Node metric = root.at("metric");
  const std::string kind = metric.at("kind").as_string();
  Report rep = detail::begin("admissible", doc, s);
  const double tol = s.tol.value_or(1e-10);
  rep.settings["tol"] = tol;

  std::optional<MatrixFunction> upstairs;
  LocalMetricField field;
  if (kind == "invariant") {
    const auto seed = static_cast<std::uint64_t>(metric.get_int_or("seed", static_cast<std::int64_t>(s.seed)));
    const double mu = metric.get_or("mu", 0.5);
    if (!(mu > 0.0)) metric.at("mu").fail("must be positive");
    upstairs = random_invariant_metric(seed, weights, chart.cover, chart.n, mu);
    field = descend_metric(*upstairs, weights, chart);
  } else if (kind == "identity") {
    const int rr = r;
    upstairs = [rr](const Point&) { return MatrixXc(MatrixXc::Identity(rr, rr)); };
    field = descend_metric(*upstairs, weights, chart);
  } else if (kind == "power") {
    const Node ex = metric.at("exponents");
    if (ex.size() != static_cast<std::size_t>(r)) ex.fail("one exponent per weight is required");
    std::vector<double> e;
    for (const auto& item : ex.items()) e.push_back(to_double(item.as_rational()));
    field = sample_metric(
        [e, r](const Point& z) {
          MatrixXc h = MatrixXc::Zero(r, r);
          for (int a = 0; a < r; ++a) h(a, a) = std::pow(std::norm(z[0]), e[a]);
          return h;
        },
        weights, chart);
  } else if (kind == "constant") {
    const MatrixXc h0 = io::complex_matrix_from_json(metric.at("matrix"));
    if (h0.rows() != r) metric.at("matrix").fail("matrix size does not match the number of weights");
    field = sample_metric([h0](const Point&) { return h0; }, weights, chart);
  } else {
    metric.at("kind").fail("unknown metric kind '" + kind + "' (invariant, identity, power, constant)");
  }

  const AdmissibilityReport base = admissibility_check(field);
  Csv annuli({"cover", "annulus", "w_radius", "max_value", "max_first", "max_second", "min_eigenvalue"});
  auto add_rows = [&](const AdmissibilityReport& a, int cover) {
    for (const auto& d : a.annuli)
      annuli.row(cover, d.annulus, d.w_radius, d.max_value, d.max_first, d.max_second, d.min_eigenvalue);
  };
  add_rows(base, chart.cover);

  auto& res = rep.results;
  Json ch;
  ch["N"] = chart.cover;
  ch["n"] = chart.n;
  ch["rho"] = chart.rho;
  ch["radialNodes"] = chart.annuli;
  ch["angularNodes"] = chart.angular;
  ch["slices"] = chart.slices;
  res["chart"] = ch;
  Json wj = Json::array(), kj = Json::array();
  for (const auto& w : weights) wj.push_back(to_string(w));
  for (int e : k) kj.push_back(e);
  res["weights"] = wj;
  res["frameExponents"] = kj;
  res["metricKind"] = kind;
  res["sampleCount"] = field.points.size();
  auto verdict_json = [](const AdmissibilityReport& a) {
    Json v;
    v["admissible"] = a.admissible;
    v["bounded"] = a.bounded;
    v["boundedDerivatives"] = a.bounded_derivatives;
    v["positive"] = a.positive;
    v["cutConsistent"] = a.cut_consistent;
    v["cutJump"] = io::number(a.cut_jump);
    v["cutReference"] = io::number(a.cut_reference);
    double min_eig = std::numeric_limits<double>::infinity();
    for (const auto& d : a.annuli) min_eig = std::min(min_eig, d.min_eigenvalue);
    v["minEigenvalue"] = io::number(min_eig);
    Json reasons = Json::array();
    for (const auto& why : a.reasons) reasons.push_back(why);
    v["reasons"] = std::move(reasons);
    return v;
  };
  res["verdict"] = verdict_json(base);

  Json vd;
  vd["admissible"] = base.admissible;
  vd["expected"] = expect;
  rep.check("verdictMatchesExpectation", base.admissible == expect, vd);

  if (upstairs) {
    double worst = 0.0;
    for (std::size_t i = 0; i < field.points.size(); ++i)
      worst = std::max(worst, (base.lifted[i] - (*upstairs)(field.points[i].w)).cwiseAbs().maxCoeff());
    const double branch = branch_deviation(*upstairs, weights, chart);
    res["roundTripDeviation"] = io::number(worst);
    res["branchDeviation"] = io::number(branch);
    Json d;
    d["value"] = io::number(worst);
    d["bound"] = tol;
    rep.check("roundTrip", worst < tol, d);
    Json b;
    b["value"] = io::number(branch);
    b["bound"] = tol;
    rep.check("branchIndependence", branch < tol, b);
  }

  Json rebased = Json::array();
  for (int u : factors) {
    const AdmissibilityReport ru = rebase_cover(field, u);
    add_rows(ru, chart.cover * u);
    Json e;
    e["factor"] = u;
    e["cover"] = chart.cover * u;
    e["verdict"] = verdict_json(ru);
    rebased.push_back(std::move(e));
    Json d;
    d["admissible"] = ru.admissible;
    d["expected"] = base.admissible;
    rep.check("rebase.u" + std::to_string(u), ru.admissible == base.admissible, d);
  }
  res["rebase"] = std::move(rebased);
  rep.tables.push_back({"annuli", annuli.str()});
  return rep;
}

// ---------------------------------------------------------------------------
// chern: {"n", "exact": bool, "theta": r×r array of (1,1)-forms,
// "metric": optional r×r Hermitian matrix for the positivity testers}

namespace detail {

template <class S>
bool forms_match(const Form<S>& a, const Form<S>& b, double tol) {
  if constexpr (ScalarTraits<S>::exact) {
    (void)tol;
    return a == b;
  } else {
    return max_abs(a - b) <= tol * (1.0 + std::max(max_abs(a), max_abs(b)));
  }
}

template <class S>
void chern_report(const Node& root, int n, Report& rep, const Settings& s) {
  const double tol = s.tol.value_or(ScalarTraits<S>::exact ? 0.0 : 1e-9);
  rep.settings["tol"] = tol;
  const int samples = s.samples.value_or(512);
  rep.settings["samples"] = samples;

  const CurvatureMatrix<S> theta = io::curvature_from_json<S>(root.at("theta"), n);
  const int r = static_cast<int>(theta.size());
  const bool hermitian = is_hermitian_symmetric(theta, ScalarTraits<S>::exact ? 0.0 : tol);
  const ChernData<S> c = chern_forms(theta);
  const std::vector<Form<S>> seg = segre_forms(c, n);

  auto& res = rep.results;
  res["rank"] = r;
  res["n"] = n;
  res["exact"] = ScalarTraits<S>::exact;
  Json cj = Json::array(), sj = Json::array();
  for (const auto& f : c) cj.push_back(io::form_to_json(f));
  for (const auto& f : seg) sj.push_back(io::form_to_json(f));
  res["chernForms"] = cj;
  res["segreForms"] = sj;

  Json schur = Json::array();
  SamplingConfig cfg;
  cfg.samples = samples;
  cfg.seed = s.seed;
  cfg.workers = s.workers;
  for (const auto& lambda : partitions(n, r, n)) {
    const Form<S> f = schur_form(lambda, c);
    Json e;
    e["partition"] = lambda;
    e["form"] = io::form_to_json(f);
    e["density"] = io::number(top_coefficient(to_complex(f)).real());
    schur.push_back(std::move(e));
  }
  res["schurForms"] = std::move(schur);
  if (n == 2) {
    const Form<S> kl = kobayashi_lubke_rhs(c, r);
    Json e;
    e["form"] = io::form_to_json(kl);
    e["density"] = io::number(top_coefficient(to_complex(kl)).real());
    res["kobayashiLubke"] = std::move(e);
  }

  rep.check("hermitianSymmetric", hermitian);
  bool real = true, bidegree = true;
  for (int k = 0; k <= r; ++k) {
    real = real && forms_match(c[k], c[k].conj(), tol);
    bidegree = bidegree && (c[k].is_zero() || c[k].is_pure(k, k));
  }
  rep.check("chernFormsReal", real);
  rep.check("chernFormsBidegree", bidegree);
  bool inverse = true;
  for (int k = 1; k <= n; ++k) {
    Form<S> acc(n);
    for (int i = 0; i <= k && i <= r; ++i) acc += wedge(c[i], seg[k - i]);
    inverse = inverse && forms_match(acc, Form<S>(n), tol);
  }
  rep.check("segreInvertsChern", inverse);
  if (r <= 4 && n <= 3) {
    const double dev = pushforward_deviation(theta);
    Json d;
    d["maxCoeffDeviation"] = io::number(dev);
    d["bound"] = tol;
    res["pushforwardDeviation"] = io::number(dev);
    rep.check("pushforwardMatchesSegre", dev <= tol, d);
  }

  if (hermitian) {
    const CurvatureMatrix<Complex> tc = to_complex_matrix(theta);
    const MatrixXc h = root.has("metric") ? io::complex_matrix_from_json(root.at("metric"))
                                          : MatrixXc(MatrixXc::Identity(r, r));
    if (h.rows() != r) root.at("metric").fail("metric size does not match the rank");
    const auto gr = at_location(root, [&] { return griffiths_test(tc, h, cfg); });
    const auto nk = at_location(root, [&] { return nakano_test(tc, h, cfg); });
    Json pos;
    pos["griffiths"] = sign_json(gr.verdict, gr.margin);
    pos["nakano"] = sign_json(nk.verdict, nk.margin);
    Json weak = Json::array();
    for (int k = 1; k <= std::min(r, n); ++k) {
      const auto w = weak_positivity_test(to_complex(c[k]), k, cfg);
      Json e = sign_json(w.verdict, w.margin);
      e["degree"] = k;
      weak.push_back(std::move(e));
    }
    pos["chernWeakPositivity"] = std::move(weak);
    res["positivity"] = std::move(pos);
    const bool implied = nk.verdict != Sign::positive || gr.verdict == Sign::positive;
    Json d;
    d["griffithsMargin"] = io::number(gr.margin);
    d["nakanoMargin"] = io::number(nk.margin);
    rep.check("nakanoImpliesGriffiths", implied && gr.margin >= nk.margin - 1e-12, d);
  }
}

}  // namespace detail

inline Report cmd_chern(const InputJson& doc, const Settings& s) {
  const Node root(doc, "");
  const int n = static_cast<int>(root.at("n").as_int_in(1, 4));
  const bool exact = root.get_or("exact", false);
  Report rep = detail::begin("chern", doc, s);
  if (exact) detail::chern_report<ExactScalar>(root, n, rep, s);
  else detail::chern_report<Complex>(root, n, rep, s);
  return rep;
}

// ---------------------------------------------------------------------------
// pushforward: {"c": [c0, ..., c_{r-1}], optional "theta" with "n" and "exact"}

inline Report cmd_pushforward(const InputJson& doc, const Settings& s) {
  const Node root(doc, "");
  const Node cn = root.at("c");
  std::vector<double> c;
  for (const auto& item : cn.items()) {
    const double v = item.as_double();
    if (!(v > 0.0) || !std::isfinite(v)) item.fail("fiber coefficients must be positive");
    c.push_back(v);
  }
  if (c.empty() || c.size() > 4) cn.fail("between 1 and 4 coefficients are supported");

  Report rep = detail::begin("pushforward", doc, s);
  const double tol = s.tol.value_or(1e-6);
  const int samples = s.samples.value_or(200000);
  if (samples < 2) throw InputError("--samples must be at least 2");
  rep.settings["tol"] = tol;
  rep.settings["samples"] = samples;

  double prod = 1.0;
  for (double v : c) prod *= v;
  const double closed = 1.0 / prod;
  QuadratureConfig qc;
  qc.tail_target = std::min(1e-9, 1e-3 * tol);
  qc.workers = s.workers;
  const FiberQuadrature q = scalar_fiber_integral(c, qc);
  MonteCarloConfig mc;
  mc.samples = static_cast<std::size_t>(samples);
  mc.seed = s.seed;
  mc.workers = s.workers;
  const MonteCarloEstimate est = monte_carlo_fiber_integral(c, mc);
  const double rel = std::abs(q.value * prod - 1.0);
  const double sigmas = est.std_error > 0.0 ? std::abs(est.value - closed) / est.std_error
                                            : (est.value == closed ? 0.0 : std::numeric_limits<double>::infinity());

  auto& res = rep.results;
  res["rank"] = c.size();
  res["closedForm"] = closed;
  Json qj;
  qj["value"] = q.value;
  qj["truncation"] = q.truncation;
  qj["tailBound"] = q.tail_bound;
  qj["nodesPerAxis"] = q.nodes_per_axis;
  qj["relativeError"] = rel;
  res["quadrature"] = qj;
  Json mj;
  mj["value"] = est.value;
  mj["stdError"] = est.std_error;
  mj["samples"] = est.samples;
  mj["deviationInSigma"] = io::number(sigmas);
  res["monteCarlo"] = mj;

  Json qd;
  qd["value"] = rel;
  qd["bound"] = tol;
  rep.check("quadratureMatchesClosedForm", rel < tol, qd);
  Json md;
  md["deviationInSigma"] = io::number(sigmas);
  rep.check("monteCarloWithinThreeSigma", sigmas <= 3.0, md);

  if (root.has("theta")) {
    const int n = static_cast<int>(root.at("n").as_int_in(1, 3));
    const bool exact = root.get_or("exact", false);
    const double dev = exact ? pushforward_deviation(io::curvature_from_json<ExactScalar>(root.at("theta"), n))
                             : pushforward_deviation(io::curvature_from_json<Complex>(root.at("theta"), n));
    const double bound = exact ? 0.0 : 1e-9;
    res["maxCoeffDeviation"] = io::number(dev);
    Json d;
    d["value"] = io::number(dev);
    d["bound"] = bound;
    rep.check("symbolicMatchesSegre", dev <= bound, d);
  } else {
    res["maxCoeffDeviation"] = nullptr;
  }

  Csv series({"tail_target", "truncation", "nodes_per_axis", "value", "relative_error", "tail_bound"});
  for (int e = 1; e <= 9; ++e) {
    QuadratureConfig sc = qc;
    sc.tail_target = std::pow(10.0, -e);
    const FiberQuadrature sq = scalar_fiber_integral(c, sc);
    series.row(sc.tail_target, sq.truncation, sq.nodes_per_axis, sq.value, std::abs(sq.value * prod - 1.0),
               sq.tail_bound);
  }
  rep.tables.push_back({"quadrature", series.str()});
  return rep;
}

// ---------------------------------------------------------------------------
// masolve: {"rank", "grid": {"M"} | {"dims": [..4]}, "data": {"kind", ...},
// "maxIterations", "verifyTol"}. Data kinds: constant, cosine (epsilon),
// manufactured (delta), lineSum and hermiteEinstein (seed, epsilon, level),
// file (path to a grid CSV, relative to the input document).

inline Report cmd_masolve(const InputJson& doc, const Settings& s) {
  const Node root(doc, "");
  const int rank = static_cast<int>(root.at("rank").as_int_in(1, 8));
  const Node data = root.at("data");
  const std::string kind = data.at("kind").as_string();
  Report rep = detail::begin("masolve", doc, s);

  std::optional<TorusGrid> grid;
  if (auto g = root.find("grid")) {
    TorusGrid t;
    if (g->has("M")) {
      t = TorusGrid::square(static_cast<int>(g->at("M").as_int_in(1, 1024)));
    } else {
      const Node dims = g->at("dims");
      if (dims.size() != 4) dims.fail("expected four axis sizes");
      for (int a = 0; a < 4; ++a) t.dims[a] = static_cast<int>(dims.at(a).as_int_in(1, 1024));
    }
    detail::at_location(*g, [&] { t.validate(); return 0; });
    grid = t;
  }
  auto need_grid = [&]() -> const TorusGrid& {
    if (!grid) root.fail("missing key 'grid'");
    return *grid;
  };
  const auto seed = static_cast<std::uint64_t>(data.get_int_or("seed", static_cast<std::int64_t>(s.seed)));

  MAProblem raw;
  std::optional<std::vector<double>> exact;
  if (kind == "constant") {
    raw = constant_problem(need_grid(), rank);
  } else if (kind == "cosine") {
    raw = cosine_problem(need_grid(), rank, data.get_or("epsilon", 0.1));
  } else if (kind == "manufactured") {
    auto m = detail::at_location(data, [&] { return manufactured_problem(need_grid(), rank, data.get_or("delta", 0.03)); });
    raw = std::move(m.problem);
    exact = std::move(m.exact);
  } else if (kind == "lineSum") {
    raw = line_sum_problem(need_grid(), rank, seed, data.get_or("epsilon", 0.15), data.get_or("level", 4.0));
  } else if (kind == "hermiteEinstein") {
    raw = kobayashi_lubke_problem(need_grid(), rank, seed, data.get_or("epsilon", 0.2), data.get_or("level", 1.0),
                                  data.get_or("split", 0.3));
  } else if (kind == "file") {
    const Node pn = data.at("path");
    const std::filesystem::path path = s.base_dir / pn.as_string();
    rep.mix_hash(io::read_text_file(path.string()));
    raw = detail::at_location(pn, [&] { return problem_from_table(read_grid_csv(path.string()), rank); });
    if (grid && !(*grid == raw.grid)) root.at("grid").fail("grid does not match the field file");
  } else {
    data.at("kind").fail("unknown data kind '" + kind +
                         "' (constant, cosine, manufactured, lineSum, hermiteEinstein, file)");
  }

  NormalizationReport nr;
  const MAProblem p = detail::at_location(data, [&] { return normalize_problem(raw, &nr); });
  SolverConfig cfg;
  cfg.tol = s.tol.value_or(1e-10);
  cfg.max_iterations = static_cast<int>(root.has("maxIterations") ? root.at("maxIterations").as_int_in(0, 1000) : 50);
  cfg.workers = s.workers;
  const double verify_tol = root.get_or("verifyTol", 1e-8);
  rep.settings["tol"] = cfg.tol;

  const MASolution sol = solve(p, cfg);
  const ConclusionReport cr = verify_conclusion(p, sol.phi, verify_tol, s.workers);

  auto& res = rep.results;
  res["rank"] = rank;
  res["grid"] = std::vector<int>(p.grid.dims.begin(), p.grid.dims.end());
  res["dataKind"] = kind;
  Json nj;
  nj["scale"] = nr.scale;
  nj["lhsMean"] = nr.lhs_mean;
  nj["rhsMean"] = nr.rhs_mean;
  res["normalization"] = nj;
  double max_cons = sol.initial_conservation;
  bool positive_history = true;
  for (const auto& h : sol.history) {
    max_cons = std::max(max_cons, h.conservation);
    positive_history = positive_history && h.min_eigenvalue > 0.0;
  }
  Json sj;
  sj["converged"] = sol.converged;
  sj["iterations"] = sol.iterations;
  sj["initialResidual"] = io::number(sol.initial_residual);
  sj["finalResidual"] = io::number(sol.final_residual);
  sj["initialResolved"] = io::number(sol.initial_resolved);
  sj["finalResolved"] = io::number(sol.final_resolved);
  sj["minEigenvalue"] = io::number(sol.min_eigenvalue);
  sj["maxConservationDefect"] = io::number(max_cons);
  res["solve"] = sj;
  Json cj;
  cj["c1Margin"] = io::number(cr.c1_margin);
  cj["c2Margin"] = io::number(cr.c2_margin);
  cj["schurMargin"] = io::number(cr.schur_margin);
  cj["etaDeviation"] = io::number(cr.eta_deviation);
  cj["chernMismatch"] = cr.chern_mismatch < 0.0 ? Json(nullptr) : io::number(cr.chern_mismatch);
  cj["c1Positive"] = cr.c1_positive;
  cj["c2Positive"] = cr.c2_positive;
  cj["schurPositive"] = cr.schur_positive;
  cj["matchesEta"] = cr.matches_eta;
  res["conclusion"] = cj;

  Json d;
  d["finalResidual"] = io::number(sol.final_residual);
  d["bound"] = cfg.tol;
  rep.check("converged", sol.converged, d);
  Json pd;
  pd["minEigenvalue"] = io::number(sol.min_eigenvalue);
  rep.check("positiveThroughout", sol.min_eigenvalue > 0.0 && positive_history, pd);
  Json cd;
  cd["value"] = io::number(max_cons);
  cd["bound"] = 1e-12;
  rep.check("conservation", max_cons < 1e-12, cd);
  Json c1d;
  c1d["margin"] = io::number(cr.c1_margin);
  rep.check("c1Positive", cr.c1_positive, c1d);
  if (rank >= 2) {
    Json c2d;
    c2d["margin"] = io::number(cr.c2_margin);
    rep.check("c2Positive", cr.c2_positive, c2d);
  }
  Json sd;
  sd["margin"] = io::number(cr.schur_margin);
  rep.check("schurPositive", cr.schur_positive, sd);
  Json ed;
  ed["deviation"] = io::number(cr.eta_deviation);
  ed["bound"] = verify_tol;
  rep.check("matchesEta", cr.matches_eta, ed);
  if (exact) {
    double mean = 0.0;
    for (double v : *exact) mean += v;
    mean /= static_cast<double>(exact->size());
    double err = 0.0;
    for (std::size_t i = 0; i < exact->size(); ++i)
      err = std::max(err, std::abs(sol.phi.values[i] - ((*exact)[i] - mean)));
    res["manufacturedError"] = io::number(err);
  }

  Csv history({"iteration", "residual", "resolved", "step", "min_eigenvalue", "conservation", "gmres_iterations"});
  history.row(0, sol.initial_residual, sol.initial_resolved, 0.0, "", sol.initial_conservation, 0);
  for (std::size_t i = 0; i < sol.history.size(); ++i) {
    const auto& h = sol.history[i];
    history.row(i + 1, h.residual, h.resolved, h.step, h.min_eigenvalue, h.conservation, h.gmres_iterations);
  }
  rep.tables.push_back({"history", history.str()});
  std::ostringstream grid_csv;
  write_grid_csv(grid_csv, p.grid, {"phi", "residual", "schur_density"},
                 {&sol.phi.values, &sol.residual, &cr.schur_density});
  rep.tables.push_back({"solution", grid_csv.str()});
  return rep;
}

// ---------------------------------------------------------------------------
// Dispatch

inline Report run_document(const std::string& command, const InputJson& doc, const Settings& s) {
  if (command == "pardeg") return cmd_pardeg(doc, s);
  if (command == "ops") return cmd_ops(doc, s);
  if (command == "admissible") return cmd_admissible(doc, s);
  if (command == "chern") return cmd_chern(doc, s);
  if (command == "pushforward") return cmd_pushforward(doc, s);
  if (command == "masolve") return cmd_masolve(doc, s);
  throw InputError("unknown command '" + command + "'");
}

/// Loads the input file and runs one command. Input errors name the file.
inline Report run_file(const std::string& command, const std::filesystem::path& input, Settings s) {
  const InputJson doc = io::load_json_file(input.string());
  s.base_dir = input.parent_path();
  try {
    return run_document(command, doc, s);
  } catch (const IncompatibleDivisors& e) {
    throw IncompatibleDivisors(input.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(input.string() + ": " + e.what());
  }
}

struct RunOutcome {
  std::string name;     // input file stem
  std::string command;
  int exit_code = kPass;
  std::optional<Report> report;
  std::string error;
};

/// Fixture files in a directory: "<command>[_anything].json", sorted by name.
inline std::vector<std::pair<std::string, std::filesystem::path>> discover_inputs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError(dir.string() + ": not a directory");
  std::vector<std::pair<std::string, std::filesystem::path>> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const std::string stem = entry.path().stem().string();
    const std::string command = stem.substr(0, stem.find('_'));
    if (is_command(command)) out.emplace_back(command, entry.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  return out;
}

inline RunOutcome run_outcome(const std::string& command, const std::filesystem::path& input, const Settings& s) {
  RunOutcome o;
  o.name = input.stem().string();
  o.command = command;
  try {
    o.report = run_file(command, input, s);
    o.exit_code = exit_code(*o.report);
  } catch (const std::exception& e) {
    o.exit_code = classify_exception(std::current_exception());
    o.error = e.what();
  }
  return o;
}

/// Worst outcome wins: runtime error, then input error, then a failed check.
inline int aggregate_exit_code(const std::vector<RunOutcome>& runs) {
  int code = kPass;
  for (const auto& r : runs) {
    const auto rank = [](int c) { return c == kRuntimeError ? 3 : c == kInputError ? 2 : c == kCheckFailed ? 1 : 0; };
    if (rank(r.exit_code) > rank(code)) code = r.exit_code;
  }
  return code;
}

/// Summary of a directory run; one check per input file.
inline Report summarize(const std::vector<RunOutcome>& runs, const Settings& s) {
  Report rep;
  rep.command = "all";
  rep.seed = s.seed;
  rep.settings["seed"] = s.seed;
  rep.settings["tol"] = detail::optional_number(s.tol);
  rep.settings["samples"] = s.samples ? Json(*s.samples) : Json(nullptr);
  rep.config_hash = fnv1a64(std::string("parachern ") + kVersion + "\nall\n");
  Json files = Json::array(), list = Json::array();
  for (const auto& r : runs) {
    files.push_back(r.name);
    Json e;
    e["name"] = r.name;
    e["command"] = r.command;
    e["exitCode"] = r.exit_code;
    if (r.report) {
      rep.mix_hash(hex64(r.report->config_hash));
      e["configHash"] = hex64(r.report->config_hash);
      e["pass"] = r.report->pass();
    } else {
      rep.mix_hash(r.name + ":" + r.error);
      e["error"] = r.error;
    }
    list.push_back(std::move(e));
    Json d;
    d["exitCode"] = r.exit_code;
    rep.check(r.name, r.exit_code == kPass, d);
  }
  rep.inputs = Json::object();
  rep.inputs["files"] = std::move(files);
  rep.results["runs"] = std::move(list);
  return rep;
}

}  // namespace parachern::reports
