#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "invlearn/bitcore.hpp"
#include "invlearn/coins.hpp"
#include "invlearn/distributions.hpp"
#include "invlearn/stats.hpp"
#include "invlearn/errors.hpp"
#include "invlearn/rational.hpp"

namespace invlearn {

/// Either a preimage or the failure symbol.
class InversionOutcome {
 public:
  static InversionOutcome fail() { return InversionOutcome(); }
  static InversionOutcome success(BitString preimage) {
    InversionOutcome o;
    o.preimage_ = std::move(preimage);
    return o;
  }

  bool failed() const { return !preimage_.has_value(); }
  bool succeeded() const { return preimage_.has_value(); }
  const BitString& preimage() const { return preimage_.value(); }

  friend bool operator==(const InversionOutcome&, const InversionOutcome&) = default;

 private:
  InversionOutcome() = default;
  std::optional<BitString> preimage_;
};

/// Exact law of an inverter's answer on one image.
struct OutcomeDistribution {
  std::map<BitString, Rational> success;
  Rational fail{0};

  Rational success_mass() const {
    Rational t(0);
    for (const auto& [x, m] : success) t += m;
    return t;
  }
};

/// Number of rejection rounds R = ceil(log2(1/gamma)), i.e. the least R with 2^-R <= gamma.
inline unsigned rounds_for(const Rational& gamma) {
  if (gamma <= Rational(0) || gamma >= Rational(1)) throw ConfigError("gamma must lie in (0,1), got " + gamma.str());
  unsigned r = 0;
  while (Rational::pow2_inverse(r) > gamma) ++r;
  return r;
}

/// Width C of the rejection window: the unique C with 2^(C-1) <= s' < 2^C,
/// where s' = s for bit 1 and s' = 2^k - s for bit 0.
inline unsigned window_width(const DyadicProb& p, bool target_bit) {
  std::uint64_t s = target_bit ? p.numerator() : (std::uint64_t{1} << p.precision()) - p.numerator();
  return static_cast<unsigned>(std::bit_width(s));
}

inline std::size_t bit_inv_coin_length(const DyadicProb& p, bool b, const Rational& gamma) {
  return static_cast<std::size_t>(window_width(p, b)) * rounds_for(gamma);
}

/// bit_inv with the round count already resolved.
inline InversionOutcome bit_inv_rounds(const DyadicProb& p, bool b, unsigned rounds, const BitString& coins) {
  unsigned c = window_width(p, b);
  if (coins.size() != static_cast<std::size_t>(c) * rounds)
    throw CoinLengthError("bit_inv needs " + std::to_string(c * rounds) + " coins, got " + std::to_string(coins.size()));
  std::uint64_t limit = b ? p.numerator() : (std::uint64_t{1} << p.precision()) - p.numerator();
  std::uint64_t base = b ? 0 : p.numerator();
  for (unsigned round = 0; round < rounds; ++round) {
    std::uint64_t y = coins.slice(static_cast<std::size_t>(round) * c, c).to_uint();
    if (y < limit) return InversionOutcome::success(BitString::from_uint(base + y, p.precision()));
  }
  return InversionOutcome::fail();
}

/// Rejection-samples a uniform element of samp^-1(p, b).
///
/// Each round reads a C-bit block y. For b = 1 the candidate is y itself
/// (zero padded to k bits), accepted iff y < s. For b = 0 the round draws
/// y < 2^k - s the same way and answers s + y. Fails after R rounds.
inline InversionOutcome bit_inv(const DyadicProb& p, bool b, const Rational& gamma, const BitString& coins) {
  return bit_inv_rounds(p, b, rounds_for(gamma), coins);
}

/// Walks every C*R-bit coin string of bit_inv and tallies the answers.
inline OutcomeDistribution bit_inv_outcomes(const DyadicProb& p, bool b, const Rational& gamma,
                                            std::size_t cap = kDefaultEnumerationCap) {
  std::size_t len = bit_inv_coin_length(p, b, gamma);
  if (len > cap) throw SizeError("bit_inv coin space of " + std::to_string(len) + " bits exceeds cap " + std::to_string(cap));
  std::map<BitString, std::uint64_t> counts;
  std::uint64_t fails = 0;
  std::uint64_t space = std::uint64_t{1} << len;
  unsigned rounds = rounds_for(gamma);
  for (std::uint64_t z = 0; z < space; ++z) {
    auto o = bit_inv_rounds(p, b, rounds, BitString::from_uint(z, len));
    if (o.failed()) ++fails;
    else ++counts[o.preimage()];
  }
  OutcomeDistribution out;
  for (const auto& [r, c] : counts) out.success.emplace(r, Rational(Rational::Int(c), Rational::Int(space)));
  out.fail = Rational(Rational::Int(fails), Rational::Int(space));
  return out;
}

/// Inverter coins per coordinate: k_i * R, of which bit_inv reads the first C * R.
inline std::size_t prod_inv_block_length(const DyadicProb& p, const Rational& gamma) {
  return static_cast<std::size_t>(p.precision()) * rounds_for(gamma);
}

inline std::size_t prod_inv_coin_length(const ProductDistribution& d, const Rational& gamma) {
  std::size_t total = 0;
  for (const auto& p : d.biases()) total += prod_inv_block_length(p, gamma);
  return total;
}

/// prod_inv with the round count already resolved.
inline InversionOutcome prod_inv_rounds(const BitString& x, const ProductDistribution& d, unsigned rounds,
                                        const BitString& coins) {
  if (x.size() != d.dimension())
    throw ConfigError("prod_inv: image of length " + std::to_string(x.size()) + " for dimension " + std::to_string(d.dimension()));
  std::size_t expected = static_cast<std::size_t>(d.coin_length()) * rounds;
  if (coins.size() != expected)
    throw CoinLengthError("prod_inv needs " + std::to_string(expected) + " coins, got " + std::to_string(coins.size()));
  BitString out;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < d.dimension(); ++i) {
    std::size_t used = static_cast<std::size_t>(window_width(d[i], x[i])) * rounds;
    auto o = bit_inv_rounds(d[i], x[i], rounds, coins.slice(offset, used));
    if (o.failed()) return o;
    out.append(o.preimage());
    offset += static_cast<std::size_t>(d[i].precision()) * rounds;
  }
  return InversionOutcome::success(std::move(out));
}

/// Inverts every coordinate with bit_inv on its own coin block; any failure fails the whole call.
inline InversionOutcome prod_inv(const BitString& x, const ProductDistribution& d, const Rational& gamma,
                                 const BitString& coins) {
  return prod_inv_rounds(x, d, rounds_for(gamma), coins);
}

/// A randomized map from an image (plus explicit coins) to a preimage or FAIL.
class DistributionalInverter {
 public:
  virtual ~DistributionalInverter() = default;

  virtual std::size_t preimage_length() const = 0;
  virtual std::size_t image_length() const = 0;
  /// Coins consumed by one call (upper bound for stream-driven inverters).
  virtual std::size_t coin_length() const = 0;
  virtual std::string name() const = 0;

  /// Probability of FAIL the inverter promises on any image of its sampler.
  virtual Rational declared_fail_bound() const { return Rational(0); }
  /// Statistical-distance bound the inverter promises for the joint law.
  virtual Rational declared_distance_bound() const { return Rational(0); }

  virtual InversionOutcome invert_tape(const BitString& y, CoinTape& coins) const = 0;

  InversionOutcome invert(const BitString& y, const BitString& coins) const {
    if (coins.size() != coin_length())
      throw CoinLengthError(name() + " needs " + std::to_string(coin_length()) + " coins, got " + std::to_string(coins.size()));
    CoinTape tape(coins);
    return invert_tape(y, tape);
  }

  InversionOutcome invert(const BitString& y, RandomStream& stream) const {
    CoinTape tape(stream);
    return invert_tape(y, tape);
  }

  /// Exact outcome law on `y`; the default walks the full coin space.
  virtual OutcomeDistribution exact_outcomes(const BitString& y, std::size_t cap = kDefaultEnumerationCap) const {
    std::size_t len = coin_length();
    if (len > cap) throw SizeError(name() + ": coin space of " + std::to_string(len) + " bits exceeds cap " + std::to_string(cap));
    std::map<BitString, std::uint64_t> counts;
    std::uint64_t fails = 0;
    std::uint64_t space = std::uint64_t{1} << len;
    for (std::uint64_t z = 0; z < space; ++z) {
      auto o = invert(y, BitString::from_uint(z, len));
      if (o.failed()) ++fails;
      else ++counts[o.preimage()];
    }
    OutcomeDistribution out;
    for (const auto& [r, c] : counts) out.success.emplace(r, Rational(Rational::Int(c), Rational::Int(space)));
    out.fail = Rational(Rational::Int(fails), Rational::Int(space));
    return out;
  }
};

using InverterPtr = std::shared_ptr<const DistributionalInverter>;

/// ProdInv as a distributional inverter for Sampler::product(d).
class ProductInverter final : public DistributionalInverter {
 public:
  ProductInverter(ProductDistribution d, Rational gamma)
      : d_(std::move(d)), gamma_(std::move(gamma)), rounds_(rounds_for(gamma_)) {}

  std::size_t preimage_length() const override { return d_.coin_length(); }
  std::size_t image_length() const override { return d_.dimension(); }
  std::size_t coin_length() const override { return d_.coin_length() * rounds_; }
  std::string name() const override { return "prod_inv" + d_.str() + " gamma=" + gamma_.str(); }

  /// 1 - (1 - 2^-R)^n: every coordinate rejects at most half its window per round.
  Rational declared_fail_bound() const override {
    Rational keep = Rational(1) - Rational::pow2_inverse(rounds_);
    Rational all(1);
    for (std::size_t i = 0; i < d_.dimension(); ++i) all *= keep;
    return Rational(1) - all;
  }
  Rational declared_distance_bound() const override { return declared_fail_bound(); }

  /// gamma * n, the union bound, meaningful when gamma < 1/n.
  Rational union_fail_bound() const { return gamma_ * Rational(static_cast<std::int64_t>(d_.dimension())); }

  const ProductDistribution& distribution() const { return d_; }
  const Rational& gamma() const { return gamma_; }

  InversionOutcome invert_tape(const BitString& y, CoinTape& coins) const override {
    auto z = coins.take(coin_length());
    if (!z) return InversionOutcome::fail();
    return prod_inv_rounds(y, d_, rounds_, *z);
  }

  /// Product of per-coordinate laws; each is tallied over bit_inv's coin block.
  /// The coordinates read disjoint coin blocks, so their answers are independent.
  OutcomeDistribution exact_outcomes(const BitString& y, std::size_t cap = kDefaultEnumerationCap) const override {
    if (y.size() != d_.dimension()) throw ConfigError("image has wrong dimension");
    OutcomeDistribution acc;
    acc.success.emplace(BitString(), Rational(1));
    for (std::size_t i = 0; i < d_.dimension(); ++i) {
      const auto& coord = coordinate_law(i, y[i], cap);
      OutcomeDistribution next;
      for (const auto& [prefix_r, m] : acc.success)
        for (const auto& [r, mr] : coord.success) next.success.emplace(concat(prefix_r, r), m * mr);
      next.fail = acc.fail + acc.success_mass() * coord.fail;
      acc = std::move(next);
    }
    return acc;
  }

 private:
  const OutcomeDistribution& coordinate_law(std::size_t i, bool b, std::size_t cap) const {
    std::lock_guard lock(cache_mutex_);
    auto key = std::make_pair(i, b);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, bit_inv_outcomes(d_[i], b, gamma_, cap)).first;
    return it->second;
  }

  ProductDistribution d_;
  Rational gamma_;
  unsigned rounds_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::size_t, bool>, OutcomeDistribution> cache_;
};

/// Inverter of the identity sampler: answers y itself, no coins.
class IdentityInverter final : public DistributionalInverter {
 public:
  explicit IdentityInverter(std::size_t n) : n_(n) {}
  std::size_t preimage_length() const override { return n_; }
  std::size_t image_length() const override { return n_; }
  std::size_t coin_length() const override { return 0; }
  std::string name() const override { return "identity"; }
  InversionOutcome invert_tape(const BitString& y, CoinTape&) const override { return InversionOutcome::success(y); }

 private:
  std::size_t n_;
};

/// Never succeeds.
class AlwaysFailInverter final : public DistributionalInverter {
 public:
  AlwaysFailInverter(std::size_t preimage_length, std::size_t image_length)
      : in_(preimage_length), out_(image_length) {}
  std::size_t preimage_length() const override { return in_; }
  std::size_t image_length() const override { return out_; }
  std::size_t coin_length() const override { return 0; }
  std::string name() const override { return "always_fail"; }
  Rational declared_fail_bound() const override { return Rational(1); }
  Rational declared_distance_bound() const override { return Rational(1); }
  InversionOutcome invert_tape(const BitString&, CoinTape&) const override { return InversionOutcome::fail(); }

 private:
  std::size_t in_, out_;
};

/// Uniform preimage of a tabulated sampler by exhaustive search.
///
/// With `attempts > 0` the index is drawn by rejection over
/// ceil(log2 K)-bit blocks and the call fails after that many rejections;
/// exact_outcomes then reports that literal law. With `attempts == 0` the
/// inverter is the ideal one: exact_outcomes is exactly uniform and a call
/// keeps drawing until the tape accepts (a finite tape may still run dry).
class UniformPreimageInverter final : public DistributionalInverter {
 public:
  explicit UniformPreimageInverter(TruthTable sampler_table, unsigned attempts = 0)
      : table_(std::move(sampler_table)), index_(table_), attempts_(attempts) {}

  std::size_t preimage_length() const override { return table_.arity(); }
  std::size_t image_length() const override { return table_.out_len(); }
  std::size_t coin_length() const override { return attempts_ == 0 ? 0 : static_cast<std::size_t>(attempts_) * table_.arity(); }
  std::string name() const override { return attempts_ == 0 ? "uniform_preimage" : "uniform_preimage/" + std::to_string(attempts_); }

  InversionOutcome invert_tape(const BitString& y, CoinTape& coins) const override {
    const auto& xs = index_.of(y.to_uint());
    if (xs.empty()) return InversionOutcome::fail();
    unsigned limit = attempts_ == 0 ? ~0U : attempts_;
    auto pick = coins.below(xs.size(), limit);
    if (!pick) return InversionOutcome::fail();
    return InversionOutcome::success(BitString::from_uint(xs[*pick], table_.arity()));
  }

  OutcomeDistribution exact_outcomes(const BitString& y, std::size_t = kDefaultEnumerationCap) const override {
    OutcomeDistribution out;
    const auto& xs = index_.of(y.to_uint());
    if (xs.empty()) {
      out.fail = Rational(1);
      return out;
    }
    Rational::Int k(xs.size());
    Rational success(1);
    if (attempts_ != 0) {
      unsigned w = ceil_log2(xs.size());
      Rational reject(Rational::Int((std::uint64_t{1} << w) - xs.size()), Rational::Int(1) << w);
      Rational all_reject(1);
      for (unsigned a = 0; a < attempts_; ++a) all_reject *= reject;
      out.fail = all_reject;
      success = Rational(1) - all_reject;
    }
    for (auto x : xs) out.success.emplace(BitString::from_uint(x, table_.arity()), success / Rational(k, 1));
    return out;
  }

 private:
  TruthTable table_;
  PreimageIndex index_;
  unsigned attempts_;
};

/// Stands in for FAIL in joint laws: one bit longer than any real preimage.
inline BitString fail_sentinel(std::size_t preimage_length) {
  BitString s(preimage_length + 1);
  for (std::size_t i = 0; i < s.size(); ++i) s.set(i, true);
  return s;
}

/// Law of w ∘ S(w) for uniform coins w.
inline ExactDistribution sampler_joint_distribution(const Sampler& sampler, std::size_t cap = kDefaultEnumerationCap) {
  if (sampler.coin_length() > cap)
    throw SizeError(sampler.name() + ": coin length " + std::to_string(sampler.coin_length()) + " exceeds enumeration cap");
  ExactDistribution out;
  Rational mass = Rational::pow2_inverse(static_cast<unsigned>(sampler.coin_length()));
  for (std::uint64_t w = 0; w < (std::uint64_t{1} << sampler.coin_length()); ++w) {
    auto coins = BitString::from_uint(w, sampler.coin_length());
    out.add(concat(coins, sampler(coins)), mass);
  }
  return out;
}

/// Law of I(S(w); z) ∘ S(w) for uniform (w, z), FAIL written as fail_sentinel.
inline ExactDistribution joint_preimage_distribution(const Sampler& sampler, const DistributionalInverter& inv,
                                                     std::size_t cap = kDefaultEnumerationCap) {
  if (inv.image_length() != sampler.output_length() || inv.preimage_length() != sampler.coin_length())
    throw ConfigError("inverter " + inv.name() + " does not match sampler " + sampler.name());
  auto images = exact_output_distribution(sampler, cap);
  auto sentinel = fail_sentinel(sampler.coin_length());
  ExactDistribution out;
  for (const auto& [y, my] : images) {
    auto law = inv.exact_outcomes(y, cap);
    for (const auto& [x, m] : law.success) out.add(concat(x, y), my * m);
    out.add(concat(sentinel, y), my * law.fail);
  }
  return out;
}

/// Histogram of I(S(w); z) ∘ S(w) over `trials` draws; w from substream
/// "input", inverter coins from substream "inverter".
inline std::map<BitString, std::uint64_t> sample_joint_preimages(const Sampler& sampler, const DistributionalInverter& inv,
                                                                 std::uint64_t trials, const RandomStream& coins) {
  if (inv.image_length() != sampler.output_length() || inv.preimage_length() != sampler.coin_length())
    throw ConfigError("inverter " + inv.name() + " does not match sampler " + sampler.name());
  auto inputs = coins.substream("input");
  auto inverter_coins = coins.substream("inverter");
  auto sentinel = fail_sentinel(sampler.coin_length());
  std::map<BitString, std::uint64_t> histogram;
  for (std::uint64_t t = 0; t < trials; ++t) {
    auto y = sampler(inputs.bits(sampler.coin_length()));
    auto o = inv.invert(y, inverter_coins);
    ++histogram[concat(o.failed() ? sentinel : o.preimage(), y)];
  }
  return histogram;
}

/// Monte-Carlo estimate of SD(w ∘ S(w), I(S(w)) ∘ S(w)) for a tabulated
/// sampler, from a histogram of sample_joint_preimages.
///
/// Both laws share the marginal of S(w), so the estimate weighs, per sampled
/// image y, the half-L1 gap between the inverter's answers on y and the
/// uniform law on S^-1(y) (FAIL counts in full). Its error is at most the L1
/// error of the empirical joint histogram, hence the full multinomial radius.
inline DistanceReport inversion_distance_from_histogram(const TruthTable& sampler,
                                                        const std::map<BitString, std::uint64_t>& histogram,
                                                        std::uint64_t trials, double alpha = 0.05) {
  if (trials == 0) throw ConfigError("empirical distance needs at least one trial");
  PreimageIndex index(sampler);
  const std::size_t l = sampler.out_len();
  struct Tally {
    std::uint64_t total = 0, fails = 0;
    std::vector<std::uint64_t> hits;
  };
  std::map<std::uint64_t, Tally> per_image;
  for (const auto& [cell, count] : histogram) {
    auto& t = per_image[cell.slice(cell.size() - l, l).to_uint()];
    t.total += count;
    if (cell.size() - l == sampler.arity() + 1) t.fails += count;
    else t.hits.push_back(count);
  }
  double sum = 0.0;
  for (const auto& [y, t] : per_image) {
    const auto& xs = index.of(y);
    if (xs.empty()) throw ConfigError("histogram holds a value outside the sampler's image");
    double uniform = 1.0 / static_cast<double>(xs.size());
    double n_y = static_cast<double>(t.total);
    double gap = static_cast<double>(t.fails) / n_y;
    for (auto c : t.hits) gap += std::fabs(static_cast<double>(c) / n_y - uniform);
    gap += static_cast<double>(xs.size() - t.hits.size()) * uniform;
    sum += n_y / static_cast<double>(trials) * 0.5 * gap;
  }
  DistanceReport r;
  r.exact = false;
  r.value = sum;
  r.samples = trials;
  r.radius = l1_confidence_radius(trials, static_cast<std::size_t>(sampler.rows() + index.image_size()), alpha);
  r.confidence = 1.0 - alpha;
  return r;
}

inline DistanceReport empirical_inversion_distance(const TruthTable& sampler, const DistributionalInverter& inv,
                                                   std::uint64_t trials, const RandomStream& coins, double alpha = 0.05) {
  if (trials == 0) throw ConfigError("empirical distance needs at least one trial");
  return inversion_distance_from_histogram(sampler, sample_joint_preimages(Sampler::from_table(sampler), inv, trials, coins),
                                           trials, alpha);
}

}  // namespace invlearn
