#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "invlearn/bitcore.hpp"
#include "invlearn/coins.hpp"
#include "invlearn/errors.hpp"
#include "invlearn/rational.hpp"

namespace invlearn {

/// sign(sum_S c_S chi_S(x)) read as a bit: positive -> 0, negative -> 1, zero -> 0.
struct ParityExpansion {
  std::size_t arity = 0;
  std::vector<std::pair<std::uint64_t, double>> terms;  // (subset mask over input bits, coefficient)

  bool operator()(std::uint64_t x) const {
    double sum = 0.0;
    for (const auto& [mask, c] : terms) sum += (std::popcount(x & mask) & 1) ? -c : c;
    return sum < 0.0;
  }
};

/// Deterministic Boolean hypothesis on m-bit inputs.
class Hypothesis {
 public:
  explicit Hypothesis(TruthTable table) : arity_(table.arity()), repr_(std::move(table)) {
    if (std::get<TruthTable>(repr_).out_len() != 1) throw ConfigError("hypothesis table must be Boolean");
  }
  explicit Hypothesis(ParityExpansion expansion) : arity_(expansion.arity), repr_(std::move(expansion)) {}

  std::size_t arity() const { return arity_; }

  bool operator()(std::uint64_t x) const {
    if (const auto* t = std::get_if<TruthTable>(&repr_)) return t->bit(x);
    return std::get<ParityExpansion>(repr_)(x);
  }
  bool operator()(const BitString& x) const {
    if (x.size() != arity_)
      throw ConfigError("hypothesis of arity " + std::to_string(arity_) + " given input of length " + std::to_string(x.size()));
    return (*this)(x.to_uint());
  }

  TruthTable table(std::size_t cap = kDefaultTableCap) const {
    return TruthTable::tabulate(arity_, 1, [this](std::uint64_t x) { return (*this)(x) ? 1U : 0U; }, cap);
  }

  bool is_table() const { return std::holds_alternative<TruthTable>(repr_); }
  const ParityExpansion* expansion() const { return std::get_if<ParityExpansion>(&repr_); }

 private:
  std::size_t arity_;
  std::variant<TruthTable, ParityExpansion> repr_;
};

/// A membership-query learner over the uniform distribution on m bits.
class UniformLearner {
 public:
  virtual ~UniformLearner() = default;
  virtual std::string name() const = 0;
  /// Membership queries one call will make.
  virtual std::uint64_t query_budget(std::size_t m, const Rational& epsilon, const Rational& delta) const = 0;
  virtual Hypothesis learn(const QueryOracle& oracle, std::size_t m, const Rational& epsilon, const Rational& delta,
                           RandomStream& coins) const = 0;
};

using LearnerPtr = std::shared_ptr<const UniformLearner>;

/// Copies the target by querying every input; zero error.
inline Hypothesis brute_force_learn(const QueryOracle& oracle, std::size_t m, std::size_t cap = kDefaultTableCap) {
  return Hypothesis(tt_from_oracle(oracle, m, cap));
}

class BruteForceLearner final : public UniformLearner {
 public:
  explicit BruteForceLearner(std::size_t cap = kDefaultTableCap) : cap_(cap) {}
  std::string name() const override { return "brute_force"; }
  std::uint64_t query_budget(std::size_t m, const Rational&, const Rational&) const override {
    if (m > cap_) throw SizeError("brute_force learner: arity " + std::to_string(m) + " exceeds cap " + std::to_string(cap_));
    return std::uint64_t{1} << m;
  }
  Hypothesis learn(const QueryOracle& oracle, std::size_t m, const Rational&, const Rational&, RandomStream&) const override {
    if (m > cap_) throw SizeError("brute_force learner: arity " + std::to_string(m) + " exceeds cap " + std::to_string(cap_));
    return brute_force_learn(oracle, m, cap_);
  }

 private:
  std::size_t cap_;
};

/// Number of parity characters of degree at most d on m variables.
inline std::uint64_t low_degree_terms(std::size_t m, std::size_t d) {
  std::uint64_t total = 0, binom = 1;
  for (std::size_t j = 0; j <= d && j <= m; ++j) {
    total += binom;
    binom = binom * (m - j) / (j + 1);
  }
  return total;
}

/// Sample size for the low-degree learner.
///
/// With M characters, each estimated to within tau with probability
/// 1 - delta/M by two-sided Hoeffding on [-1,1]-valued samples, N >= 2 ln(2M/delta) / tau^2.
/// The sign of the truncated expansion g errs with probability at most
/// E[(F - g)^2] <= (mass above degree d) + M tau^2, so tau^2 = epsilon / (2M)
/// gives error <= epsilon on targets with at most epsilon/2 mass above d:
/// N = ceil(4 M ln(2M / delta) / epsilon).
inline std::uint64_t low_degree_sample_size(std::size_t m, std::size_t d, double epsilon, double delta) {
  double terms = static_cast<double>(low_degree_terms(m, d));
  return static_cast<std::uint64_t>(std::ceil(4.0 * terms * std::log(2.0 * terms / delta) / epsilon));
}

/// Estimates every Fourier coefficient of degree <= d from uniformly random
/// membership queries and outputs the sign of the truncated expansion.
inline Hypothesis low_degree_learn(const QueryOracle& oracle, std::size_t m, std::size_t degree, const Rational& epsilon,
                                   const Rational& delta, RandomStream& coins) {
  if (degree > m) throw ConfigError("low_degree_learn: degree exceeds arity");
  if (m > 63) throw SizeError("low_degree_learn: arity above 63");
  std::vector<std::uint64_t> masks;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask)
    if (static_cast<std::size_t>(std::popcount(mask)) <= degree) masks.push_back(mask);
  std::uint64_t n = low_degree_sample_size(m, degree, epsilon.to_double(), delta.to_double());
  std::vector<double> sums(masks.size(), 0.0);
  for (std::uint64_t s = 0; s < n; ++s) {
    std::uint64_t x = m == 0 ? 0 : (coins.next() >> (64 - m));
    double fx = oracle(BitString::from_uint(x, m)) ? -1.0 : 1.0;
    for (std::size_t j = 0; j < masks.size(); ++j) sums[j] += (std::popcount(x & masks[j]) & 1) ? -fx : fx;
  }
  ParityExpansion g;
  g.arity = m;
  for (std::size_t j = 0; j < masks.size(); ++j) g.terms.emplace_back(masks[j], sums[j] / static_cast<double>(n));
  return Hypothesis(std::move(g));
}

class LowDegreeLearner final : public UniformLearner {
 public:
  explicit LowDegreeLearner(std::size_t degree) : degree_(degree) {}
  std::string name() const override { return "low_degree(" + std::to_string(degree_) + ")"; }
  std::uint64_t query_budget(std::size_t m, const Rational& epsilon, const Rational& delta) const override {
    return low_degree_sample_size(m, degree_, epsilon.to_double(), delta.to_double());
  }
  Hypothesis learn(const QueryOracle& oracle, std::size_t m, const Rational& epsilon, const Rational& delta,
                   RandomStream& coins) const override {
    return low_degree_learn(oracle, m, std::min(degree_, m), epsilon, delta, coins);
  }
  std::size_t degree() const { return degree_; }

 private:
  std::size_t degree_;
};

/// Exact Pr_{w~U_m}[h(w) != f(w)].
inline Rational uniform_error(const Hypothesis& h, const TruthTable& f) {
  if (h.arity() != f.arity() || f.out_len() != 1) throw ConfigError("uniform_error: arity mismatch");
  std::uint64_t wrong = 0;
  for (std::uint64_t x = 0; x < f.rows(); ++x) wrong += (h(x) != f.bit(x)) ? 1 : 0;
  return Rational(Rational::Int(wrong), Rational::Int(f.rows()));
}

}  // namespace invlearn
