#include <gtest/gtest.h>

#include "invlearn/reduction.hpp"

using namespace invlearn;

namespace {

BitString B(const char* s) { return BitString::parse(s); }
Rational Q(std::int64_t a, std::int64_t b) { return Rational(Rational::Int(a), Rational::Int(b)); }

ProductDistribution three_quarters(std::size_t n) { return ProductDistribution(std::vector<DyadicProb>(n, DyadicProb(3, 2))); }

TEST(ComposeTargetTest, ProductSampler) {
  auto f = QueryOracle::from_table(tables::conjunction(2));
  auto target = compose_target(f, Sampler::product(three_quarters(2)));
  EXPECT_EQ(target.oracle.arity(), 4U);
  EXPECT_TRUE(target.oracle(B("0000")));   // both coordinates sample 1
  EXPECT_FALSE(target.oracle(B("1111")));  // both sample 0
  EXPECT_FALSE(target.oracle(B("0011")));
  EXPECT_EQ(f.queries(), 3U);
  EXPECT_EQ(target.oracle.queries(), 3U);
}

TEST(ComposeTargetTest, IdentityAndConstant) {
  auto par = tables::parity(3);
  auto target = compose_target(QueryOracle::from_table(par), Sampler::identity(3));
  EXPECT_EQ(tt_from_oracle(target.oracle, 3), par);
  auto zero = compose_target(QueryOracle::from_table(tables::constant(2, false)), Sampler::product(three_quarters(2)));
  EXPECT_EQ(tt_from_oracle(zero.oracle, 4), tables::constant(4, false));
}

TEST(ComposeTargetTest, ArityMismatch) {
  EXPECT_THROW(compose_target(QueryOracle::from_table(tables::parity(3)), Sampler::identity(2)), ConfigError);
}

TEST(LearnOverMuTest, ConjunctionUnderThreeQuarters) {
  auto f_table = tables::conjunction(2);
  auto f = QueryOracle::from_table(f_table);
  auto d = three_quarters(2);
  auto s = Sampler::product(d);
  auto gamma = Rational::pow2_inverse(8);
  RandomStream coins(1);
  auto result = learn_over_mu(f, s, std::make_shared<ProductInverter>(d, gamma), BruteForceLearner(), Q(1, 8), Q(1, 8), coins);
  auto err = exact_mu_error(result.hypothesis, f_table, s);
  EXPECT_LE(err, Rational(4) * gamma);
  // Only FAIL on x = "11" (default label 0) costs anything.
  auto law = result.hypothesis.inverter().exact_outcomes(B("11"));
  EXPECT_EQ(err, Q(9, 16) * law.fail);
  EXPECT_EQ(result.target_queries, 16U);
  EXPECT_EQ(result.composed_queries, result.target_queries);
}

TEST(LearnOverMuTest, IdentityCompositionsPreserveError) {
  auto f_table = tables::majority(5);
  auto f = QueryOracle::from_table(f_table);
  auto s = Sampler::identity(5);
  RandomStream coins(4);
  auto result = learn_over_mu(f, s, std::make_shared<IdentityInverter>(5), LowDegreeLearner(1), Q(1, 4), Q(1, 4), coins);
  auto mu_err = exact_mu_error(result.hypothesis, f_table, s);
  EXPECT_EQ(mu_err, uniform_error(result.hypothesis.uniform_hypothesis(), f_table));
}

TEST(LearnOverMuTest, UniformSpecialCase) {
  auto f_table = tables::disjunction(3);
  auto d = ProductDistribution(std::vector<DyadicProb>(3, DyadicProb(1, 1)));
  auto s = Sampler::product(d);
  RandomStream coins(5);
  auto result = learn_over_mu(QueryOracle::from_table(f_table), s, std::make_shared<UniformPreimageInverter>(s.table()),
                              BruteForceLearner(), Q(1, 8), Q(1, 8), coins);
  EXPECT_EQ(exact_mu_error(result.hypothesis, f_table, s), Rational(0));
}

TEST(LearnOverMuTest, BudgetViolationsRejected) {
  auto f = QueryOracle::from_table(tables::conjunction(2));
  auto d = three_quarters(2);
  auto s = Sampler::product(d);
  RandomStream coins(1);
  EXPECT_THROW(learn_over_mu(f, s, std::make_shared<ProductInverter>(d, Q(1, 4)), BruteForceLearner(), Q(1, 8), Q(1, 8), coins),
               ConfigError);
  ReductionOptions relaxed;
  relaxed.enforce_budget = false;
  EXPECT_NO_THROW(learn_over_mu(f, s, std::make_shared<ProductInverter>(d, Q(1, 4)), BruteForceLearner(), Q(1, 8), Q(1, 8),
                                coins, relaxed));
  EXPECT_THROW(learn_over_mu(f, s, std::make_shared<IdentityInverter>(2), BruteForceLearner(), Q(1, 8), Q(1, 8), coins),
               ConfigError);
  EXPECT_THROW(learn_over_mu(f, s, std::make_shared<ProductInverter>(d, Q(1, 1024)), BruteForceLearner(), Q(0, 1), Q(1, 8), coins),
               ConfigError);
}

TEST(EvaluateTest, Examples) {
  auto par = Hypothesis(tables::parity(3));
  ComposedHypothesis identity(par, std::make_shared<IdentityInverter>(3));
  for (std::uint64_t x = 0; x < 8; ++x)
    EXPECT_EQ(evaluate(identity, BitString::from_uint(x, 3), BitString()), tables::parity(3).bit(x));
  EXPECT_THROW(evaluate(identity, B("000"), B("1")), CoinLengthError);

  ComposedHypothesis never(par, std::make_shared<AlwaysFailInverter>(3, 3));
  for (std::uint64_t x = 0; x < 8; ++x) EXPECT_FALSE(evaluate(never, BitString::from_uint(x, 3), BitString()));

  // Learned AND over (3/4, 3/4): every succeeding coin string gives 1 on "11".
  auto f = QueryOracle::from_table(tables::conjunction(2));
  auto d = three_quarters(2);
  RandomStream coins(2);
  auto result = learn_over_mu(f, Sampler::product(d), std::make_shared<ProductInverter>(d, Rational::pow2_inverse(4)),
                              BruteForceLearner(), Q(1, 2), Q(1, 8), coins);
  const auto& h = result.hypothesis;
  int successes = 0;
  for (std::uint64_t z = 0; z < (std::uint64_t{1} << h.coin_length()); ++z) {
    auto zs = BitString::from_uint(z, h.coin_length());
    if (h.inverter().invert(B("11"), zs).failed()) continue;
    ++successes;
    ASSERT_TRUE(evaluate(h, B("11"), zs));
  }
  EXPECT_GT(successes, 0);
}

TEST(EvaluateTest, MajorityVoteIsDeterministicPerStream) {
  auto d = three_quarters(3);
  auto s = Sampler::product(d);
  auto f = QueryOracle::from_table(tables::majority(3));
  RandomStream coins(3);
  auto result = learn_over_mu(f, s, std::make_shared<ProductInverter>(d, Rational::pow2_inverse(8)), BruteForceLearner(),
                              Q(1, 8), Q(1, 8), coins);
  for (std::uint64_t x = 0; x < 8; ++x) {
    RandomStream a(77), b(77);
    auto point = BitString::from_uint(x, 3);
    bool va = result.hypothesis.evaluate_majority(point, a, 5);
    EXPECT_EQ(va, result.hypothesis.evaluate_majority(point, b, 5));
    EXPECT_EQ(va, tables::majority(3).bit(x));
  }
  RandomStream z(1);
  EXPECT_THROW(result.hypothesis.evaluate_majority(B("000"), z, 4), ConfigError);
}

// |mu-error(C') - U-error(C)| <= SD(w∘S(w), I(S(w))∘S(w)) on random small instances.
TEST(ErrorDecompositionTest, HoldsOnRandomInstances) {
  RandomStream rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 1 + rng.below(3);
    std::vector<DyadicProb> biases;
    for (std::size_t i = 0; i < n; ++i) {
      unsigned k = 1 + static_cast<unsigned>(rng.below(3));
      biases.emplace_back(1 + rng.below((1U << k) - 1), k);
    }
    ProductDistribution d(biases);
    auto s = Sampler::product(d);
    auto f = TruthTable::tabulate(n, 1, [&](std::uint64_t) { return rng.bit() ? 1U : 0U; });
    // Arbitrary (not learned) uniform hypothesis to keep both sides nonzero.
    auto c = Hypothesis(TruthTable::tabulate(s.coin_length(), 1, [&](std::uint64_t) { return rng.bit() ? 1U : 0U; }));
    ComposedHypothesis h(c, std::make_shared<ProductInverter>(d, Q(1, 2)), rng.bit());
    auto e = decompose_error(h, f, s);
    ASSERT_TRUE(e.holds()) << d.str() << " mu=" << e.mu_error << " U=" << e.uniform_error << " SD=" << e.distance;
  }
}

}  // namespace
