#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

#include "invlearn/errors.hpp"

namespace invlearn {

/// Exact rational number in lowest terms with a positive denominator.
///
/// Thin value wrapper over boost's arbitrary precision rational so that the
/// rest of the library never touches floating point when it claims exactness.
class Rational {
 public:
  using Int = boost::multiprecision::cpp_int;
  using Impl = boost::multiprecision::cpp_rational;

  Rational() = default;
  Rational(std::int64_t n) : v_(n) {}  // NOLINT(google-explicit-constructor)
  Rational(const Int& num, const Int& den) {
    if (den == 0) throw ConfigError("rational with zero denominator");
    v_ = Impl(num, den);
  }
  explicit Rational(Impl v) : v_(std::move(v)) {}

  static Rational pow2_inverse(unsigned k) { return Rational(Int(1), Int(1) << k); }

  Int numerator() const { return boost::multiprecision::numerator(v_); }
  Int denominator() const { return boost::multiprecision::denominator(v_); }

  double to_double() const { return v_.convert_to<double>(); }
  std::string str() const {
    auto d = denominator();
    if (d == 1) return numerator().str();
    return numerator().str() + "/" + d.str();
  }

  bool is_zero() const { return v_ == 0; }

  Rational& operator+=(const Rational& o) { v_ += o.v_; return *this; }
  Rational& operator-=(const Rational& o) { v_ -= o.v_; return *this; }
  Rational& operator*=(const Rational& o) { v_ *= o.v_; return *this; }
  Rational& operator/=(const Rational& o) {
    if (o.v_ == 0) throw ConfigError("division by zero rational");
    v_ /= o.v_;
    return *this;
  }

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }
  friend Rational operator-(const Rational& a) { return Rational(Impl(-a.v_)); }

  friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    if (a.v_ < b.v_) return std::strong_ordering::less;
    if (a.v_ > b.v_) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  friend Rational abs(const Rational& a) { return a.v_ < 0 ? -a : a; }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

  /// Parses "a/b", "a", "2^-k" or "a/2^k".
  static Rational parse(std::string_view text) {
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
      return s;
    };
    text = trim(text);
    auto parse_int = [&](std::string_view s) -> Int {
      s = trim(s);
      if (s.empty()) throw ConfigError("malformed rational '" + std::string(text) + "'");
      std::size_t i = (s.front() == '-') ? 1 : 0;
      if (i == s.size()) throw ConfigError("malformed rational '" + std::string(text) + "'");
      for (std::size_t j = i; j < s.size(); ++j)
        if (s[j] < '0' || s[j] > '9') throw ConfigError("malformed rational '" + std::string(text) + "'");
      return Int(std::string(s));
    };
    auto parse_pow = [&](std::string_view s) -> Rational {
      s = trim(s);
      if (s.starts_with("2^")) {
        auto e = s.substr(2);
        bool neg = !e.empty() && e.front() == '-';
        if (neg) e.remove_prefix(1);
        if (e.empty() || e.size() > 4) throw ConfigError("malformed exponent in '" + std::string(text) + "'");
        unsigned k = static_cast<unsigned>(std::stoul(std::string(parse_int(e).str())));
        return neg ? pow2_inverse(k) : Rational(Int(1) << k, Int(1));
      }
      return Rational(parse_int(s), Int(1));
    };
    auto slash = text.find('/');
    if (slash == std::string_view::npos) return parse_pow(text);
    return parse_pow(text.substr(0, slash)) / parse_pow(text.substr(slash + 1));
  }

 private:
  Impl v_;
};

}  // namespace invlearn
