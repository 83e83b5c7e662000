#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "invlearn/bitcore.hpp"
#include "invlearn/coins.hpp"
#include "invlearn/distributions.hpp"
#include "invlearn/errors.hpp"
#include "invlearn/inverters.hpp"
#include "invlearn/learners.hpp"
#include "invlearn/rational.hpp"
#include "invlearn/stats.hpp"

namespace invlearn {

/// f composed with a sampler: f_mu(w) = f(S(w)).
struct ComposedTarget {
  QueryOracle base;
  Sampler sampler;
  QueryOracle oracle;  // on sampler.coin_length() bits; one base query per call
};

inline ComposedTarget compose_target(const QueryOracle& f, const Sampler& s) {
  if (s.output_length() != f.arity())
    throw ConfigError("sampler emits " + std::to_string(s.output_length()) + " bits but target has arity " +
                      std::to_string(f.arity()));
  QueryOracle composed(s.coin_length(), [f, s](const BitString& w) { return f(s(w)); });
  return ComposedTarget{f, s, std::move(composed)};
}

/// C'(x; z) = C(I(x; z)), or the default label when I fails.
class ComposedHypothesis {
 public:
  ComposedHypothesis(Hypothesis uniform_hypothesis, InverterPtr inverter, bool fail_label = false)
      : c_(std::move(uniform_hypothesis)), inv_(std::move(inverter)), fail_label_(fail_label) {
    if (inv_->preimage_length() != c_.arity())
      throw ConfigError("inverter preimages have " + std::to_string(inv_->preimage_length()) +
                        " bits but hypothesis arity is " + std::to_string(c_.arity()));
  }

  std::size_t input_length() const { return inv_->image_length(); }
  std::size_t coin_length() const { return inv_->coin_length(); }
  bool fail_label() const { return fail_label_; }
  const Hypothesis& uniform_hypothesis() const { return c_; }
  const DistributionalInverter& inverter() const { return *inv_; }

  bool label(const InversionOutcome& o) const { return o.failed() ? fail_label_ : c_(o.preimage()); }

  bool evaluate(const BitString& x, const BitString& z) const { return label(inv_->invert(x, z)); }
  bool evaluate(const BitString& x, RandomStream& z) const { return label(inv_->invert(x, z)); }

  /// Majority over an odd number of independent evaluations; a deterministic
  /// hypothesis for a fixed stream.
  bool evaluate_majority(const BitString& x, RandomStream& z, unsigned votes) const {
    if (votes % 2 == 0) throw ConfigError("majority vote needs an odd number of votes");
    unsigned ones = 0;
    for (unsigned v = 0; v < votes; ++v) ones += evaluate(x, z) ? 1U : 0U;
    return 2 * ones > votes;
  }

 private:
  Hypothesis c_;
  InverterPtr inv_;
  bool fail_label_;
};

inline bool evaluate(const ComposedHypothesis& h, const BitString& x, const BitString& z) { return h.evaluate(x, z); }

struct ReductionOptions {
  /// Fraction of alpha given to the learner; the rest is the inverter's.
  Rational learner_share{1, 2};
  bool fail_label = false;
  /// Reject inverters whose declared bounds overrun the inverter's share.
  bool enforce_budget = true;
};

struct LearnOverMuResult {
  ComposedHypothesis hypothesis;
  Rational learner_error;
  Rational inverter_budget;
  std::uint64_t target_queries = 0;
  std::uint64_t composed_queries = 0;
};

/// Learns f over the distribution sampled by S: learn f∘S over uniform coins
/// with error alpha*share, then answer through the inverter.
///
/// The inverter's share is split evenly between its FAIL mass and its
/// declared statistical distance.
inline LearnOverMuResult learn_over_mu(const QueryOracle& f, const Sampler& s, InverterPtr inverter,
                                       const UniformLearner& learner, const Rational& alpha, const Rational& beta,
                                       RandomStream& coins, const ReductionOptions& options = {}) {
  if (alpha <= Rational(0) || alpha >= Rational(1)) throw ConfigError("alpha must lie in (0,1)");
  if (beta <= Rational(0) || beta >= Rational(1)) throw ConfigError("beta must lie in (0,1)");
  if (options.learner_share <= Rational(0) || options.learner_share >= Rational(1))
    throw ConfigError("learner share must lie in (0,1)");
  if (inverter->image_length() != s.output_length() || inverter->preimage_length() != s.coin_length())
    throw ConfigError("inverter " + inverter->name() + " does not invert sampler " + s.name());

  Rational learner_error = alpha * options.learner_share;
  Rational inverter_budget = alpha - learner_error;
  Rational half = inverter_budget / Rational(2);
  if (options.enforce_budget) {
    if (inverter->declared_fail_bound() > half)
      throw ConfigError("inverter FAIL bound " + inverter->declared_fail_bound().str() + " exceeds budget " + half.str());
    if (inverter->declared_distance_bound() > half)
      throw ConfigError("inverter distance bound " + inverter->declared_distance_bound().str() + " exceeds budget " +
                        half.str());
  }

  auto target = compose_target(f, s);
  std::uint64_t before = f.queries();
  auto c = learner.learn(target.oracle, s.coin_length(), learner_error, beta, coins);
  return LearnOverMuResult{ComposedHypothesis(std::move(c), std::move(inverter), options.fail_label), learner_error,
                           inverter_budget, f.queries() - before, target.oracle.queries()};
}

/// Exact Pr_{x~mu, z}[C'(x; z) != f(x)] with mu the output law of s.
inline Rational exact_mu_error(const ComposedHypothesis& h, const TruthTable& f, const Sampler& s,
                               std::size_t cap = kDefaultEnumerationCap) {
  if (f.out_len() != 1 || f.arity() != s.output_length()) throw ConfigError("exact_mu_error: arity mismatch");
  auto mu = exact_output_distribution(s, cap);
  Rational err(0);
  for (const auto& [y, my] : mu) {
    bool truth = f.bit(y.to_uint());
    auto law = h.inverter().exact_outcomes(y, cap);
    Rational wrong(0);
    for (const auto& [x, m] : law.success)
      if (h.uniform_hypothesis()(x) != truth) wrong += m;
    if (h.fail_label() != truth) wrong += law.fail;
    err += my * wrong;
  }
  return err;
}

/// Exact Pr_{w~U}[C(w) != f(S(w))].
inline Rational exact_uniform_error(const Hypothesis& c, const TruthTable& f, const Sampler& s,
                                    std::size_t cap = kDefaultEnumerationCap) {
  auto composed = TruthTable::tabulate(s.coin_length(), 1, [&](std::uint64_t w) {
    return f.bit(s(BitString::from_uint(w, s.coin_length())).to_uint()) ? 1U : 0U;
  }, cap);
  return uniform_error(c, composed);
}

/// The three quantities related by the reduction's error inequality.
struct ErrorDecomposition {
  Rational mu_error;       // Pr[C'(x;z) != f(x)]
  Rational uniform_error;  // Pr[C(w) != f(S(w))]
  Rational distance;       // SD(w∘S(w), I(S(w))∘S(w))

  bool holds() const { return abs(mu_error - uniform_error) <= distance; }
};

inline ErrorDecomposition decompose_error(const ComposedHypothesis& h, const TruthTable& f, const Sampler& s,
                                          std::size_t cap = kDefaultEnumerationCap) {
  return ErrorDecomposition{
      exact_mu_error(h, f, s, cap),
      exact_uniform_error(h.uniform_hypothesis(), f, s, cap),
      statistical_distance(sampler_joint_distribution(s, cap), joint_preimage_distribution(s, h.inverter(), cap)),
  };
}

}  // namespace invlearn
