#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "invlearn/bitcore.hpp"
#include "invlearn/errors.hpp"
#include "invlearn/rational.hpp"

namespace invlearn {

/// Precision cap for "concise" biases.
inline constexpr unsigned kDefaultMaxPrecision = 16;

/// Largest coin space the exact enumerators will walk.
inline constexpr std::size_t kDefaultEnumerationCap = 24;

/// Bias p = s / 2^k with 0 < s < 2^k.
class DyadicProb {
 public:
  DyadicProb(std::uint64_t numerator, unsigned precision, unsigned max_precision = kDefaultMaxPrecision)
      : s_(numerator), k_(precision) {
    if (precision == 0 || precision > max_precision)
      throw ConfigError("dyadic precision " + std::to_string(precision) + " outside [1, " +
                        std::to_string(max_precision) + "]");
    if (numerator == 0 || numerator >= (std::uint64_t{1} << precision))
      throw ConfigError("dyadic bias " + std::to_string(numerator) + "/2^" + std::to_string(precision) +
                        " is not strictly inside (0,1)");
  }

  /// Accepts "s/2^k" or "s/d" with d a power of two.
  static DyadicProb parse(std::string_view text, unsigned max_precision = kDefaultMaxPrecision) {
    auto slash = text.find('/');
    if (slash == std::string_view::npos) throw ConfigError("dyadic bias needs the form s/2^k, got '" + std::string(text) + "'");
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
      return s;
    };
    auto num = trim(text.substr(0, slash));
    auto den = trim(text.substr(slash + 1));
    auto to_u64 = [&](std::string_view s) -> std::uint64_t {
      if (s.empty() || s.size() > 19) throw ConfigError("malformed dyadic bias '" + std::string(text) + "'");
      for (char c : s)
        if (c < '0' || c > '9') throw ConfigError("malformed dyadic bias '" + std::string(text) + "'");
      return std::stoull(std::string(s));
    };
    std::uint64_t s = to_u64(num);
    unsigned k = 0;
    if (den.starts_with("2^")) {
      k = static_cast<unsigned>(to_u64(den.substr(2)));
    } else {
      std::uint64_t d = to_u64(den);
      if (d == 0 || (d & (d - 1)) != 0) throw ConfigError("denominator of '" + std::string(text) + "' is not a power of two");
      k = static_cast<unsigned>(std::countr_zero(d));
    }
    return DyadicProb(s, k, max_precision);
  }

  std::uint64_t numerator() const { return s_; }
  unsigned precision() const { return k_; }
  Rational value() const { return Rational(Rational::Int(s_), Rational::Int(1) << k_); }
  /// k-bit big-endian numerator.
  BitString bin() const { return BitString::from_uint(s_, k_); }

  std::string str() const { return std::to_string(s_) + "/2^" + std::to_string(k_); }

  friend bool operator==(const DyadicProb&, const DyadicProb&) = default;

 private:
  std::uint64_t s_;
  unsigned k_;
};

/// 1 iff integer(r) < s. Reads exactly k coins.
inline bool samp(const DyadicProb& p, const BitString& r) {
  if (r.size() != p.precision())
    throw CoinLengthError("samp needs " + std::to_string(p.precision()) + " coins, got " + std::to_string(r.size()));
  return r.to_uint() < p.numerator();
}

/// Independent biased coordinates, each driven by its own block of coins.
class ProductDistribution {
 public:
  explicit ProductDistribution(std::vector<DyadicProb> biases) : biases_(std::move(biases)) {
    if (biases_.empty()) throw ConfigError("product distribution needs at least one coordinate");
  }

  /// One `s/2^k` per non-empty line; '#' starts a comment.
  static ProductDistribution parse(std::string_view text, unsigned max_precision = kDefaultMaxPrecision) {
    std::vector<DyadicProb> biases;
    std::istringstream is{std::string(text)};
    std::string line;
    while (std::getline(is, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (auto eq = line.find('='); eq != std::string::npos) {
        auto key = line.substr(0, eq);
        key.erase(std::remove_if(key.begin(), key.end(), [](char c) { return c == ' ' || c == '\t'; }), key.end());
        if (key != "p") throw ConfigError("expected 'p = s/2^k', got '" + line + "'");
        line.erase(0, eq + 1);
      }
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      biases.push_back(DyadicProb::parse(line, max_precision));
    }
    return ProductDistribution(std::move(biases));
  }

  std::size_t dimension() const { return biases_.size(); }
  const std::vector<DyadicProb>& biases() const { return biases_; }
  const DyadicProb& operator[](std::size_t i) const { return biases_[i]; }

  std::size_t coin_length() const {
    std::size_t total = 0;
    for (const auto& p : biases_) total += p.precision();
    return total;
  }
  unsigned max_precision() const {
    unsigned k = 0;
    for (const auto& p : biases_) k = std::max(k, p.precision());
    return k;
  }

  /// Exact mass of x.
  Rational probability(const BitString& x) const {
    if (x.size() != biases_.size()) throw ConfigError("point has wrong dimension for product distribution");
    Rational out(1);
    for (std::size_t i = 0; i < biases_.size(); ++i) out *= x[i] ? biases_[i].value() : Rational(1) - biases_[i].value();
    return out;
  }

  std::string str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < biases_.size(); ++i) s += (i ? ", " : "") + biases_[i].str();
    return s + ")";
  }

 private:
  std::vector<DyadicProb> biases_;
};

/// Coordinate i is samp(p_i, block i of r).
inline BitString prod_samp(const ProductDistribution& d, const BitString& r) {
  if (r.size() != d.coin_length())
    throw CoinLengthError("prod_samp needs " + std::to_string(d.coin_length()) + " coins, got " + std::to_string(r.size()));
  BitString out(d.dimension());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < d.dimension(); ++i) {
    unsigned k = d[i].precision();
    out.set(i, samp(d[i], r.slice(offset, k)));
    offset += k;
  }
  return out;
}

/// Deterministic map from uniform coins to samples.
class Sampler {
 public:
  using Fn = std::function<BitString(const BitString&)>;

  Sampler(std::size_t coin_length, std::size_t output_length, Fn fn, std::string name = "sampler")
      : coin_length_(coin_length), output_length_(output_length), fn_(std::make_shared<Fn>(std::move(fn))),
        name_(std::move(name)) {}

  static Sampler product(ProductDistribution d) {
    auto shared = std::make_shared<const ProductDistribution>(std::move(d));
    return Sampler(shared->coin_length(), shared->dimension(),
                   [shared](const BitString& r) { return prod_samp(*shared, r); }, "product" + shared->str());
  }
  static Sampler identity(std::size_t n) {
    return Sampler(n, n, [](const BitString& r) { return r; }, "identity");
  }
  static Sampler constant(BitString x, std::size_t coin_length = 0) {
    std::size_t len = x.size();
    return Sampler(coin_length, len, [x = std::move(x)](const BitString&) { return x; }, "constant");
  }
  static Sampler from_table(TruthTable table) {
    auto shared = std::make_shared<const TruthTable>(std::move(table));
    return Sampler(shared->arity(), shared->out_len(),
                   [shared](const BitString& r) { return (*shared)(r); }, "table");
  }

  BitString operator()(const BitString& coins) const {
    if (coins.size() != coin_length_)
      throw CoinLengthError(name_ + " needs " + std::to_string(coin_length_) + " coins, got " + std::to_string(coins.size()));
    return (*fn_)(coins);
  }

  std::size_t coin_length() const { return coin_length_; }
  std::size_t output_length() const { return output_length_; }
  const std::string& name() const { return name_; }

  /// Materializes the sampler as a coins -> sample table.
  TruthTable table(std::size_t cap = kDefaultEnumerationCap) const {
    if (coin_length_ > cap)
      throw SizeError(name_ + ": coin length " + std::to_string(coin_length_) + " exceeds enumeration cap " + std::to_string(cap));
    return TruthTable::tabulate(coin_length_, output_length_,
                                [&](std::uint64_t w) { return (*this)(BitString::from_uint(w, coin_length_)).to_uint(); }, cap);
  }

 private:
  std::size_t coin_length_;
  std::size_t output_length_;
  std::shared_ptr<Fn> fn_;
  std::string name_;
};

/// Finite distribution with exact rational masses.
class ExactDistribution {
 public:
  using Map = std::map<BitString, Rational>;

  ExactDistribution() = default;
  explicit ExactDistribution(Map masses) : masses_(std::move(masses)) {}

  static ExactDistribution point(const BitString& x) { return ExactDistribution(Map{{x, Rational(1)}}); }
  static ExactDistribution uniform(std::size_t m) {
    if (m > kDefaultEnumerationCap) throw SizeError("uniform distribution over " + std::to_string(m) + " bits exceeds cap");
    Map out;
    Rational mass = Rational::pow2_inverse(static_cast<unsigned>(m));
    for (std::uint64_t x = 0; x < (std::uint64_t{1} << m); ++x) out.emplace(BitString::from_uint(x, m), mass);
    return ExactDistribution(std::move(out));
  }

  void add(const BitString& x, const Rational& mass) {
    if (mass.is_zero()) return;
    auto [it, inserted] = masses_.try_emplace(x, mass);
    if (!inserted) it->second += mass;
  }

  Rational operator()(const BitString& x) const {
    auto it = masses_.find(x);
    return it == masses_.end() ? Rational(0) : it->second;
  }

  Rational total() const {
    Rational t(0);
    for (const auto& [x, m] : masses_) t += m;
    return t;
  }

  /// Nonnegative masses summing exactly to one.
  bool is_valid() const {
    for (const auto& [x, m] : masses_)
      if (m < Rational(0)) return false;
    return total() == Rational(1);
  }

  const Map& masses() const { return masses_; }
  std::size_t support_size() const { return masses_.size(); }
  auto begin() const { return masses_.begin(); }
  auto end() const { return masses_.end(); }

  friend bool operator==(const ExactDistribution&, const ExactDistribution&) = default;

 private:
  Map masses_;
};

/// Pushforward of the uniform distribution on coins through the sampler.
inline ExactDistribution exact_output_distribution(const Sampler& sampler, std::size_t cap = kDefaultEnumerationCap) {
  if (sampler.coin_length() > cap)
    throw SizeError(sampler.name() + ": coin length " + std::to_string(sampler.coin_length()) +
                    " exceeds enumeration cap " + std::to_string(cap));
  std::map<BitString, std::uint64_t> counts;
  std::uint64_t space = std::uint64_t{1} << sampler.coin_length();
  for (std::uint64_t w = 0; w < space; ++w) ++counts[sampler(BitString::from_uint(w, sampler.coin_length()))];
  ExactDistribution::Map out;
  for (const auto& [x, c] : counts)
    out.emplace(x, Rational(Rational::Int(c), Rational::Int(space)));
  return ExactDistribution(std::move(out));
}

}  // namespace invlearn
