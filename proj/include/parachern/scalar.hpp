#pragma once

// Coefficient rings used throughout the library.
//
//   Rational      exact rationals (arbitrary precision)
//   GaussRational exact elements of Q(i)
//   ExactScalar   Q(i)[tau], where tau is a formal real symbol standing for 1/(2 pi)
//   Complex       std::complex<double>
//
// Algorithms that must run in both exact and floating mode are templated on the
// coefficient type and talk to it through ScalarTraits.

#include "parachern/errors.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <complex>
#include <cstdint>
#include <map>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace parachern {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;
using Complex = std::complex<double>;

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
  if (den == 0) throw InputError("zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  return Rational(BigInt(num), BigInt(den));
}

/// Parses "a/b", "a" or "-a/b". Whitespace is not accepted.
inline Rational parse_rational(std::string_view text) {
  auto parse_int = [&](std::string_view s) -> BigInt {
    if (s.empty()) throw InputError("malformed rational '" + std::string(text) + "'");
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) throw InputError("malformed rational '" + std::string(text) + "'");
    for (std::size_t j = i; j < s.size(); ++j)
      if (s[j] < '0' || s[j] > '9')
        throw InputError("malformed rational '" + std::string(text) + "'");
    return BigInt(std::string(s));
  };
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(text));
  BigInt num = parse_int(text.substr(0, slash));
  BigInt den = parse_int(text.substr(slash + 1));
  if (den == 0) throw InputError("zero denominator in '" + std::string(text) + "'");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  return Rational(num, den);
}

/// Canonical text form: "a/b" in lowest terms, or "a" when the denominator is 1.
inline std::string to_string(const Rational& q) {
  std::ostringstream os;
  os << boost::multiprecision::numerator(q);
  if (boost::multiprecision::denominator(q) != 1) os << '/' << boost::multiprecision::denominator(q);
  return os.str();
}

inline BigInt floor_of(const Rational& q) {
  BigInt n = boost::multiprecision::numerator(q);
  BigInt d = boost::multiprecision::denominator(q);
  BigInt f = n / d;
  if (n % d != 0 && n < 0) f -= 1;
  return f;
}

inline BigInt ceil_of(const Rational& q) { return -floor_of(-q); }

/// Fractional part in [0,1).
inline Rational frac_of(const Rational& q) { return q - Rational(floor_of(q)); }

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

// ---------------------------------------------------------------------------

struct GaussRational {
  Rational re{0};
  Rational im{0};

  GaussRational() = default;
  GaussRational(Rational r) : re(std::move(r)) {}
  GaussRational(Rational r, Rational i) : re(std::move(r)), im(std::move(i)) {}
  GaussRational(int r) : re(r) {}

  static GaussRational i() { return {Rational(0), Rational(1)}; }

  bool is_zero() const { return re == 0 && im == 0; }
  GaussRational conj() const { return {re, -im}; }
  Rational norm2() const { return re * re + im * im; }

  GaussRational& operator+=(const GaussRational& o) { re += o.re; im += o.im; return *this; }
  GaussRational& operator-=(const GaussRational& o) { re -= o.re; im -= o.im; return *this; }
  GaussRational& operator*=(const GaussRational& o) {
    Rational r = re * o.re - im * o.im;
    im = re * o.im + im * o.re;
    re = std::move(r);
    return *this;
  }
  GaussRational& operator/=(const GaussRational& o) {
    Rational n = o.norm2();
    if (n == 0) throw std::domain_error("division by zero in Q(i)");
    *this *= o.conj();
    re /= n;
    im /= n;
    return *this;
  }
  friend GaussRational operator+(GaussRational a, const GaussRational& b) { return a += b; }
  friend GaussRational operator-(GaussRational a, const GaussRational& b) { return a -= b; }
  friend GaussRational operator*(GaussRational a, const GaussRational& b) { return a *= b; }
  friend GaussRational operator/(GaussRational a, const GaussRational& b) { return a /= b; }
  friend GaussRational operator-(const GaussRational& a) { return {-a.re, -a.im}; }
  friend bool operator==(const GaussRational& a, const GaussRational& b) {
    return a.re == b.re && a.im == b.im;
  }

  Complex to_complex() const { return {to_double(re), to_double(im)}; }
};

inline std::ostream& operator<<(std::ostream& os, const GaussRational& z) {
  return os << '(' << to_string(z.re) << (z.im < 0 ? " - " : " + ")
            << to_string(z.im < 0 ? Rational(-z.im) : z.im) << "i)";
}

// ---------------------------------------------------------------------------

/// Exact coefficients in Q(i)[tau] with tau a formal real symbol (tau = 1/(2 pi)).
/// Chern-Weil normalizations i/(2 pi) become the exact element i*tau, so identities
/// between characteristic forms can be checked with exact equality.
class ExactScalar {
public:
  ExactScalar() = default;
  ExactScalar(GaussRational c) { add_term(0, std::move(c)); }
  ExactScalar(Rational c) : ExactScalar(GaussRational(std::move(c))) {}
  ExactScalar(int c) : ExactScalar(GaussRational(c)) {}

  static ExactScalar tau() {
    ExactScalar s;
    s.add_term(1, GaussRational(1));
    return s;
  }

  /// The Chern normalization i/(2 pi) = i * tau.
  static ExactScalar chern_kappa() {
    ExactScalar s;
    s.add_term(1, GaussRational::i());
    return s;
  }

  const std::map<int, GaussRational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  ExactScalar conj() const {
    ExactScalar s;
    for (const auto& [p, c] : terms_) s.terms_.emplace(p, c.conj());
    return s;
  }

  /// Numerical value with tau = 1/(2 pi).
  Complex evaluate() const {
    Complex acc{0.0, 0.0};
    const double t = 0.5 / std::numbers::pi;
    for (const auto& [p, c] : terms_) acc += c.to_complex() * std::pow(t, p);
    return acc;
  }

  ExactScalar& operator+=(const ExactScalar& o) {
    for (const auto& [p, c] : o.terms_) add_term(p, c);
    return *this;
  }
  ExactScalar& operator-=(const ExactScalar& o) {
    for (const auto& [p, c] : o.terms_) add_term(p, -c);
    return *this;
  }
  ExactScalar& operator*=(const ExactScalar& o) {
    ExactScalar out;
    for (const auto& [p, c] : terms_)
      for (const auto& [q, d] : o.terms_) out.add_term(p + q, c * d);
    *this = std::move(out);
    return *this;
  }
  /// Division by a constant (tau-free) element.
  ExactScalar& operator/=(const GaussRational& d) {
    for (auto& [p, c] : terms_) c /= d;
    return *this;
  }

  friend ExactScalar operator+(ExactScalar a, const ExactScalar& b) { return a += b; }
  friend ExactScalar operator-(ExactScalar a, const ExactScalar& b) { return a -= b; }
  friend ExactScalar operator*(ExactScalar a, const ExactScalar& b) { return a *= b; }
  friend ExactScalar operator-(const ExactScalar& a) { return ExactScalar() - a; }
  friend bool operator==(const ExactScalar& a, const ExactScalar& b) { return a.terms_ == b.terms_; }

private:
  void add_term(int power, GaussRational c) {
    if (c.is_zero()) return;
    auto [it, inserted] = terms_.try_emplace(power, c);
    if (!inserted) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  std::map<int, GaussRational> terms_;
};

inline std::ostream& operator<<(std::ostream& os, const ExactScalar& s) {
  if (s.is_zero()) return os << "0";
  bool first = true;
  for (const auto& [p, c] : s.terms()) {
    if (!first) os << " + ";
    first = false;
    os << c;
    if (p == 1) os << "*tau";
    else if (p > 1) os << "*tau^" << p;
  }
  return os;
}

// ---------------------------------------------------------------------------

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<Complex> {
  static constexpr bool exact = false;
  static Complex zero() { return {0.0, 0.0}; }
  static Complex one() { return {1.0, 0.0}; }
  static Complex from_int(long v) { return {static_cast<double>(v), 0.0}; }
  static Complex conj(const Complex& z) { return std::conj(z); }
  static bool is_zero(const Complex& z) { return z == Complex{0.0, 0.0}; }
  static Complex div_int(const Complex& z, long k) { return z / static_cast<double>(k); }
  static Complex chern_kappa() { return {0.0, 0.5 / std::numbers::pi}; }
  static double magnitude(const Complex& z) { return std::abs(z); }
  static Complex to_complex(const Complex& z) { return z; }
};

template <>
struct ScalarTraits<ExactScalar> {
  static constexpr bool exact = true;
  static ExactScalar zero() { return {}; }
  static ExactScalar one() { return ExactScalar(1); }
  static ExactScalar from_int(long v) { return ExactScalar(Rational(v)); }
  static ExactScalar conj(const ExactScalar& z) { return z.conj(); }
  static bool is_zero(const ExactScalar& z) { return z.is_zero(); }
  static ExactScalar div_int(ExactScalar z, long k) {
    z /= GaussRational(Rational(k));
    return z;
  }
  static ExactScalar chern_kappa() { return ExactScalar::chern_kappa(); }
  static double magnitude(const ExactScalar& z) { return std::abs(z.evaluate()); }
  static Complex to_complex(const ExactScalar& z) { return z.evaluate(); }
};

}  // namespace parachern
