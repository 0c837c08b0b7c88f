#pragma once

// JSON formats: parabolic models, forms and curvature matrices.
//
// Input documents are read through Node, which carries a JSON-pointer path so
// that every rejection names the offending location. Output uses ordered_json
// so that key order, and therefore the serialized bytes, is fixed by the code.

#include "parachern/errors.hpp"
#include "parachern/forms.hpp"
#include "parachern/para_core.hpp"
#include "parachern/scalar.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace parachern::io {

using Json = nlohmann::ordered_json;
using InputJson = nlohmann::json;

class Node {
public:
  Node(const InputJson& value, std::string path) : value_(&value), path_(std::move(path)) {}

  const InputJson& value() const { return *value_; }
  const std::string& path() const { return path_; }
  std::string where() const { return path_.empty() ? "/" : path_; }

  [[noreturn]] void fail(const std::string& message) const { throw InputError(where() + ": " + message); }

  bool is_object() const { return value_->is_object(); }
  bool is_array() const { return value_->is_array(); }

  bool has(const std::string& key) const { return value_->is_object() && value_->contains(key); }

  Node at(const std::string& key) const {
    if (!value_->is_object()) fail("expected an object");
    auto it = value_->find(key);
    if (it == value_->end()) fail("missing key '" + key + "'");
    return Node(*it, path_ + "/" + key);
  }

  std::optional<Node> find(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return at(key);
  }

  Node at(std::size_t i) const {
    if (!value_->is_array()) fail("expected an array");
    if (i >= value_->size()) fail("index " + std::to_string(i) + " out of range");
    return Node((*value_)[i], path_ + "/" + std::to_string(i));
  }

  std::size_t size() const {
    if (!value_->is_array()) fail("expected an array");
    return value_->size();
  }

  std::vector<Node> items() const {
    std::vector<Node> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i));
    return out;
  }

  std::vector<std::pair<std::string, Node>> members() const {
    if (!value_->is_object()) fail("expected an object");
    std::vector<std::pair<std::string, Node>> out;
    for (auto it = value_->begin(); it != value_->end(); ++it)
      out.emplace_back(it.key(), Node(it.value(), path_ + "/" + it.key()));
    return out;
  }

  std::int64_t as_int() const {
    if (value_->is_number_integer()) return value_->get<std::int64_t>();
    if (value_->is_number_float()) {
      const double d = value_->get<double>();
      if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    fail("expected an integer");
  }

  int as_int_in(std::int64_t lo, std::int64_t hi) const {
    const std::int64_t v = as_int();
    if (v < lo || v > hi) fail("value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
  }

  double as_double() const {
    if (!value_->is_number()) fail("expected a number");
    return value_->get<double>();
  }

  bool as_bool() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }

  std::string as_string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }

  /// Exact rational from "a/b" or an integer literal.
  Rational as_rational() const {
    if (value_->is_number_integer()) return Rational(value_->get<std::int64_t>());
    try {
      return parse_rational(as_string());
    } catch (const InputError& e) {
      fail(e.what());
    }
  }

  double get_or(const std::string& key, double fallback) const { return has(key) ? at(key).as_double() : fallback; }
  bool get_or(const std::string& key, bool fallback) const { return has(key) ? at(key).as_bool() : fallback; }
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? at(key).as_int() : fallback;
  }

private:
  const InputJson* value_;
  std::string path_;
};

/// Parses a whole file; syntax errors carry the line and column.
inline InputJson load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  try {
    return InputJson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// Parabolic models: {"rank", "degree", "points": {"label": ["a/N", ...]}, "coverDegree"}

inline ParabolicModel model_from_json(const Node& node) {
  const int rank = node.at("rank").as_int_in(1, 1 << 20);
  const std::int64_t degree = node.at("degree").as_int();
  std::map<std::string, std::vector<Rational>> points;
  if (auto pts = node.find("points")) {
    for (const auto& [label, weights] : pts->members()) {
      auto& ws = points[label];
      for (const auto& w : weights.items()) {
        if (!w.value().is_string()) w.fail("weights are strings \"a/N\"");
        Rational a = w.as_rational();
        if (a < 0 || a >= 1) w.fail("weight " + to_string(a) + " is outside [0,1)");
        ws.push_back(std::move(a));
      }
    }
  }
  std::optional<std::int64_t> cover;
  if (node.has("coverDegree")) cover = node.at("coverDegree").as_int();
  try {
    return make_model(rank, degree, std::move(points), cover);
  } catch (const InputError& e) {
    node.fail(e.what());
  }
}

inline Json model_to_json(const ParabolicModel& m) {
  Json points = Json::object();
  for (const auto& [label, ws] : m.points) {
    Json arr = Json::array();
    for (const auto& w : ws) arr.push_back(to_string(w));
    points[label] = std::move(arr);
  }
  Json out;
  out["rank"] = m.rank;
  out["degree"] = m.degree;
  out["points"] = std::move(points);
  out["coverDegree"] = m.cover_degree;
  return out;
}

// ---------------------------------------------------------------------------
// Forms: a list of terms {"I": [...], "J": [...], "re", "im"} with 1-based,
// strictly increasing index lists. Float mode stores numbers. Exact mode stores
// "num/den" strings and an optional "tau" exponent: the term's coefficient is
// (re + i·im)·τ^tau with τ = 1/(2π).

inline Json index_list(Mask m) {
  Json arr = Json::array();
  for (int i : mask_indices(m)) arr.push_back(i + 1);
  return arr;
}

inline Json form_to_json(const Form<Complex>& f) {
  Json out = Json::array();
  for (const auto& [key, c] : f.terms()) {
    Json t;
    t["I"] = index_list(key.first);
    t["J"] = index_list(key.second);
    t["re"] = c.real();
    t["im"] = c.imag();
    out.push_back(std::move(t));
  }
  return out;
}

inline Json form_to_json(const Form<ExactScalar>& f) {
  Json out = Json::array();
  for (const auto& [key, c] : f.terms())
    for (const auto& [power, g] : c.terms()) {
      Json t;
      t["I"] = index_list(key.first);
      t["J"] = index_list(key.second);
      t["re"] = to_string(g.re);
      t["im"] = to_string(g.im);
      if (power != 0) t["tau"] = power;
      out.push_back(std::move(t));
    }
  return out;
}

inline Mask mask_from_json(const Node& node, int n) {
  Mask m = 0;
  int last = 0;
  for (const auto& item : node.items()) {
    const int i = item.as_int_in(1, n);
    if (i <= last) item.fail("indices must be strictly increasing");
    last = i;
    m |= Mask(1) << (i - 1);
  }
  return m;
}

template <class S>
S coefficient_from_json(const Node& term);

template <>
inline Complex coefficient_from_json<Complex>(const Node& term) {
  if (term.has("tau")) term.fail("'tau' is only meaningful in exact mode");
  return {term.at("re").as_double(), term.has("im") ? term.at("im").as_double() : 0.0};
}

template <>
inline ExactScalar coefficient_from_json<ExactScalar>(const Node& term) {
  GaussRational g(term.at("re").as_rational(), term.has("im") ? term.at("im").as_rational() : Rational(0));
  ExactScalar s(g);
  const int power = static_cast<int>(term.get_int_or("tau", 0));
  if (power < 0) term.at("tau").fail("exponent must be nonnegative");
  for (int k = 0; k < power; ++k) s *= ExactScalar::tau();
  return s;
}

template <class S>
Form<S> form_from_json(const Node& node, int n) {
  Form<S> f(n);
  for (const auto& term : node.items()) {
    const Mask i = mask_from_json(term.at("I"), n);
    const Mask j = mask_from_json(term.at("J"), n);
    f += Form<S>::monomial(n, i, j, coefficient_from_json<S>(term));
  }
  return f;
}

/// An r×r array of (1,1)-forms.
template <class S>
CurvatureMatrix<S> curvature_from_json(const Node& node, int n) {
  const std::size_t r = node.size();
  if (r == 0) node.fail("curvature matrix is empty");
  CurvatureMatrix<S> theta;
  for (std::size_t a = 0; a < r; ++a) {
    const Node row = node.at(a);
    if (row.size() != r) row.fail("curvature matrix must be square");
    std::vector<Form<S>> out;
    for (std::size_t b = 0; b < r; ++b) {
      Form<S> f = form_from_json<S>(row.at(b), n);
      if (!f.is_pure(1, 1)) row.at(b).fail("curvature entries must be (1,1)-forms");
      out.push_back(std::move(f));
    }
    theta.push_back(std::move(out));
  }
  return theta;
}

/// Complex matrix as rows of [re, im] pairs.
inline Eigen::MatrixXcd complex_matrix_from_json(const Node& node) {
  const std::size_t r = node.size();
  Eigen::MatrixXcd m(r, r);
  for (std::size_t a = 0; a < r; ++a) {
    const Node row = node.at(a);
    if (row.size() != r) row.fail("matrix must be square");
    for (std::size_t b = 0; b < r; ++b) {
      const Node entry = row.at(b);
      if (entry.value().is_number()) {
        m(a, b) = entry.as_double();
      } else {
        if (entry.size() != 2) entry.fail("expected a number or an [re, im] pair");
        m(a, b) = Complex(entry.at(0).as_double(), entry.at(1).as_double());
      }
    }
  }
  return m;
}

/// Non-finite values are written as strings, since JSON has no literal for them.
inline Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace parachern::io
