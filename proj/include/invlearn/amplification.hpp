#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "invlearn/bitcore.hpp"
#include "invlearn/coins.hpp"
#include "invlearn/errors.hpp"
#include "invlearn/inverters.hpp"
#include "invlearn/rational.hpp"

namespace invlearn {

// ---------------------------------------------------------------------------
// Hash family

/// h(x) = A x + b over GF(2), A an m x n matrix and b an m-bit offset.
/// Output bit j is row j, so the first i output bits form the hash given by
/// the first i rows: prefixes of a uniform member are uniform members of the
/// smaller family.
class AffineHash {
 public:
  AffineHash(std::size_t n, std::size_t m, std::vector<std::uint64_t> rows, std::uint64_t offset)
      : n_(n), m_(m), rows_(std::move(rows)), offset_(offset) {
    if (n > 63 || m > 63) throw SizeError("affine hash dimensions above 63");
    if (rows_.size() != m) throw ConfigError("affine hash needs one row per output bit");
  }

  static std::size_t description_length(std::size_t n, std::size_t m) { return m * n + m; }

  /// Row-major A, then b.
  static AffineHash decode(const BitString& description, std::size_t n, std::size_t m) {
    if (description.size() != description_length(n, m))
      throw ConfigError("hash description of " + std::to_string(description.size()) + " bits, expected " +
                        std::to_string(description_length(n, m)));
    std::vector<std::uint64_t> rows(m);
    for (std::size_t j = 0; j < m; ++j) rows[j] = description.slice(j * n, n).to_uint();
    return AffineHash(n, m, std::move(rows), description.slice(m * n, m).to_uint());
  }

  /// The family member whose description is the integer `index`.
  static AffineHash from_index(std::uint64_t index, std::size_t n, std::size_t m) {
    return decode(BitString::from_uint(index, description_length(n, m)), n, m);
  }

  static AffineHash random(std::size_t n, std::size_t m, RandomStream& rng) {
    return decode(rng.bits(description_length(n, m)), n, m);
  }

  BitString encode() const {
    BitString out;
    for (auto r : rows_) out.append(BitString::from_uint(r, n_));
    out.append(BitString::from_uint(offset_, m_));
    return out;
  }

  std::uint64_t operator()(std::uint64_t x) const {
    std::uint64_t v = 0;
    for (std::size_t j = 0; j < m_; ++j) {
      std::uint64_t bit = static_cast<std::uint64_t>(std::popcount(rows_[j] & x) & 1) ^ ((offset_ >> (m_ - 1 - j)) & 1U);
      v = (v << 1) | bit;
    }
    return v;
  }
  BitString operator()(const BitString& x) const { return BitString::from_uint((*this)(x.to_uint()), m_); }

  /// First i output bits as an integer.
  std::uint64_t truncated(std::uint64_t x, std::size_t i) const { return i == 0 ? 0 : (*this)(x) >> (m_ - i); }

  std::size_t input_length() const { return n_; }
  std::size_t output_length() const { return m_; }

 private:
  std::size_t n_, m_;
  std::vector<std::uint64_t> rows_;
  std::uint64_t offset_;
};

// ---------------------------------------------------------------------------
// Parameter formulas (logs base 2, rounded up)

/// m = n + (6c + 6) * ceil(log2 n).
inline std::size_t truncating_hash_length(std::size_t n, std::size_t c) { return n + (6 * c + 6) * ceil_log2(n); }

/// t = n^(6c), saturating.
inline std::uint64_t direct_product_length(std::size_t n, std::size_t c) {
  long double v = std::pow(static_cast<long double>(n), static_cast<long double>(6 * c));
  return v > 1e18L ? std::uint64_t{1000000000000000000ULL} : static_cast<std::uint64_t>(v + 0.5L);
}

/// Smallest c >= 1 with 2 / n^c <= target distance.
inline std::size_t hash_precision_for(std::size_t n, const Rational& target_distance) {
  if (target_distance <= Rational(0)) throw ConfigError("target distance must be positive");
  if (n < 2) return 1;
  Rational bound(2);
  for (std::size_t c = 1; c < 64; ++c) {
    bound /= Rational(static_cast<std::int64_t>(n));
    if (bound <= target_distance) return c;
  }
  throw ConfigError("no hash precision reaches distance " + target_distance.str());
}

/// Repetitions R with (1 - eta)^R <= failure: R = ceil(ln(1/failure) / -ln(1 - eta)).
inline std::size_t amplification_repetitions(double eta, double failure) {
  if (eta <= 0.0 || eta > 1.0) throw ConfigError("weak success probability must lie in (0,1]");
  if (failure <= 0.0 || failure >= 1.0) throw ConfigError("target failure must lie in (0,1)");
  if (eta == 1.0) return 1;
  return static_cast<std::size_t>(std::ceil(std::log(1.0 / failure) / -std::log1p(-eta)));
}

// ---------------------------------------------------------------------------
// Functions on bit strings

class BitFunction {
 public:
  virtual ~BitFunction() = default;
  virtual std::size_t input_length() const = 0;
  virtual std::size_t output_length() const = 0;
  virtual BitString operator()(const BitString& x) const = 0;
  virtual std::string name() const = 0;
};

using FunctionPtr = std::shared_ptr<const BitFunction>;

class TableFunction final : public BitFunction {
 public:
  explicit TableFunction(TruthTable table) : table_(std::move(table)) {}
  std::size_t input_length() const override { return table_.arity(); }
  std::size_t output_length() const override { return table_.out_len(); }
  BitString operator()(const BitString& x) const override { return table_(x); }
  std::string name() const override { return "table"; }
  const TruthTable& table() const { return table_; }

 private:
  TruthTable table_;
};

/// f'(x_1 ... x_t) = f(x_1) ∘ ... ∘ f(x_t).
class DirectProductFunction final : public BitFunction {
 public:
  DirectProductFunction(FunctionPtr base, std::size_t t) : base_(std::move(base)), t_(t) {
    if (t == 0) throw ConfigError("direct product needs t >= 1");
  }
  std::size_t input_length() const override { return t_ * base_->input_length(); }
  std::size_t output_length() const override { return t_ * base_->output_length(); }
  BitString operator()(const BitString& x) const override {
    if (x.size() != input_length()) throw ConfigError("direct product input has wrong length");
    BitString out;
    std::size_t n = base_->input_length();
    for (std::size_t b = 0; b < t_; ++b) out.append((*base_)(x.slice(b * n, n)));
    return out;
  }
  std::string name() const override { return std::to_string(t_) + "-fold " + base_->name(); }
  const FunctionPtr& base() const { return base_; }
  std::size_t copies() const { return t_; }

 private:
  FunctionPtr base_;
  std::size_t t_;
};

/// Bit layout of the truncating hash of f : {0,1}^n -> {0,1}^l.
///
/// Input:  A (m*n bits, row-major) ∘ b (m) ∘ i (w bits) ∘ x (n)
/// Output: A ∘ b ∘ i (w, canonical) ∘ f(x) ∘ h(x)[0..i) ∘ 0^(m-i)
///
/// w = ceil(log2(m + 1)); an i field above m decodes as i mod (m + 1). The
/// truncated hash is zero padded to m bits so every output has one length.
struct TruncatingHashLayout {
  std::size_t n = 0, m = 0, image = 0;

  std::size_t description() const { return AffineHash::description_length(n, m); }
  std::size_t index_width() const { return ceil_log2(m + 1); }
  std::size_t input_length() const { return description() + index_width() + n; }
  std::size_t output_length() const { return description() + index_width() + image + m; }
  std::size_t decode_index(std::uint64_t field) const { return static_cast<std::size_t>(field % (m + 1)); }
};

class TruncatingHashFunction final : public BitFunction {
 public:
  TruncatingHashFunction(std::shared_ptr<const TruthTable> base, std::size_t m)
      : base_(std::move(base)), layout_{base_->arity(), m, base_->out_len()} {
    if (m == 0) throw ConfigError("truncating hash needs m >= 1");
  }

  std::size_t input_length() const override { return layout_.input_length(); }
  std::size_t output_length() const override { return layout_.output_length(); }
  std::string name() const override { return "truncating_hash(m=" + std::to_string(layout_.m) + ")"; }

  BitString operator()(const BitString& in) const override {
    if (in.size() != input_length()) throw ConfigError("truncating hash input has wrong length");
    const auto& L = layout_;
    auto description = in.slice(0, L.description());
    std::size_t i = L.decode_index(in.slice(L.description(), L.index_width()).to_uint());
    std::uint64_t x = in.slice(L.description() + L.index_width(), L.n).to_uint();
    return assemble(description, i, base_->word(x), AffineHash::decode(description, L.n, L.m).truncated(x, i));
  }

  /// Output for given parts; `prefix` holds the i truncated hash bits.
  BitString assemble(const BitString& description, std::size_t i, std::uint64_t image, std::uint64_t prefix) const {
    const auto& L = layout_;
    BitString out = description;
    out.append(BitString::from_uint(i, L.index_width()));
    out.append(BitString::from_uint(image, L.image));
    out.append(BitString::from_uint(i == L.m ? prefix : prefix << (L.m - i), L.m));
    return out;
  }

  BitString encode_input(const BitString& description, std::size_t i, std::uint64_t x) const {
    BitString out = description;
    out.append(BitString::from_uint(i, layout_.index_width()));
    out.append(BitString::from_uint(x, layout_.n));
    return out;
  }

  /// x component of an input.
  BitString input_point(const BitString& in) const { return in.slice(layout_.description() + layout_.index_width(), layout_.n); }

  const TruncatingHashLayout& layout() const { return layout_; }
  const TruthTable& base() const { return *base_; }
  const std::shared_ptr<const TruthTable>& base_ptr() const { return base_; }

 private:
  std::shared_ptr<const TruthTable> base_;
  TruncatingHashLayout layout_;
};

/// Materialized t-fold direct product.
inline TruthTable direct_product(const TruthTable& f, std::size_t t, std::size_t cap = kDefaultTableCap) {
  if (t == 0) throw ConfigError("direct product needs t >= 1");
  if (t * f.arity() > cap)
    throw SizeError("direct product arity " + std::to_string(t * f.arity()) + " exceeds cap " + std::to_string(cap));
  if (t * f.out_len() > 64) throw SizeError("direct product output above 64 bits");
  std::size_t n = f.arity(), l = f.out_len();
  std::uint64_t in_mask = (std::uint64_t{1} << n) - 1;
  return TruthTable::tabulate(t * n, t * l, [&](std::uint64_t x) {
    std::uint64_t y = 0;
    for (std::size_t b = 0; b < t; ++b) y = (y << l) | f.word((x >> ((t - 1 - b) * n)) & in_mask);
    return y;
  }, cap);
}

/// Materialized truncating hash with explicit m.
inline TruthTable truncating_hash(const TruthTable& f, std::size_t m, std::size_t cap = kDefaultTableCap) {
  TruncatingHashFunction fn(std::make_shared<const TruthTable>(f), m);
  if (fn.input_length() > cap)
    throw SizeError("truncating hash arity " + std::to_string(fn.input_length()) + " exceeds cap " + std::to_string(cap));
  if (fn.output_length() > 64) throw SizeError("truncating hash output above 64 bits");
  return TruthTable::tabulate(fn.input_length(), fn.output_length(), [&](std::uint64_t x) {
    return fn(BitString::from_uint(x, fn.input_length())).to_uint();
  }, cap);
}

/// Materialized truncating hash with m from the precision c (or an override).
inline TruthTable truncating_hash(const TruthTable& f, std::size_t c, std::optional<std::size_t> m_override,
                                  std::size_t cap = kDefaultTableCap) {
  return truncating_hash(f, m_override.value_or(truncating_hash_length(f.arity(), c)), cap);
}

// ---------------------------------------------------------------------------
// Inverter oracles

/// Finds some preimage of an image, or FAILs. Coins come from a tape.
class InverterOracle {
 public:
  virtual ~InverterOracle() = default;
  virtual std::size_t input_length() const = 0;
  virtual std::size_t output_length() const = 0;
  virtual InversionOutcome invert(const BitString& y, CoinTape& coins) const = 0;
  /// Upper bound on coins one call reads.
  virtual std::size_t max_coins() const = 0;
  virtual std::string name() const = 0;
  /// Promised success probability over a uniform input, when known.
  virtual double declared_success() const { return 1.0; }
};

using OraclePtr = std::shared_ptr<const InverterOracle>;

/// Which preimage an exhaustive search returns.
enum class PreimageChoice {
  uniform,    // uniformly random candidate
  canonical,  // smallest candidate; a perfect inverter with no randomness at all
};

inline constexpr unsigned kSelectionAttempts = 64;

/// Picks one of `candidates` (sorted) per `choice`; nullopt when empty or the tape runs dry.
inline std::optional<std::uint64_t> choose_candidate(const std::vector<std::uint64_t>& candidates, PreimageChoice choice,
                                                     CoinTape& coins, unsigned attempts = kSelectionAttempts) {
  if (candidates.empty()) return std::nullopt;
  if (choice == PreimageChoice::canonical) return candidates.front();
  auto pick = coins.below(candidates.size(), attempts);
  if (!pick) return std::nullopt;
  return candidates[*pick];
}

/// Exhaustive search over a truth table's preimage index.
inline InversionOutcome brute_force_invert(const TruthTable& f, const PreimageIndex& index, const BitString& y,
                                           CoinTape& coins, PreimageChoice choice = PreimageChoice::uniform,
                                           unsigned attempts = kSelectionAttempts) {
  if (y.size() != f.out_len()) return InversionOutcome::fail();
  auto x = choose_candidate(index.of(y.to_uint()), choice, coins, attempts);
  if (!x) return InversionOutcome::fail();
  return InversionOutcome::success(BitString::from_uint(*x, f.arity()));
}

/// Uniform (or canonical) preimage of f by exhaustive search.
///
/// Uniform choice is by rejection over ceil(log2 K)-bit coin blocks, at most
/// `attempts` of them; so besides an empty preimage set the call also FAILs
/// with probability at most 2^-attempts.
class BruteForceOracle final : public InverterOracle {
 public:
  explicit BruteForceOracle(TruthTable f, PreimageChoice choice = PreimageChoice::uniform,
                            unsigned attempts = kSelectionAttempts)
      : f_(std::move(f)), index_(f_), choice_(choice), attempts_(attempts) {}

  std::size_t input_length() const override { return f_.arity(); }
  std::size_t output_length() const override { return f_.out_len(); }
  InversionOutcome invert(const BitString& y, CoinTape& coins) const override {
    return brute_force_invert(f_, index_, y, coins, choice_, attempts_);
  }
  std::size_t max_coins() const override { return choice_ == PreimageChoice::canonical ? 0 : attempts_ * f_.arity(); }
  std::string name() const override { return choice_ == PreimageChoice::canonical ? "brute_force(canonical)" : "brute_force"; }

  const TruthTable& table() const { return f_; }
  const PreimageIndex& index() const { return index_; }

 private:
  TruthTable f_;
  PreimageIndex index_;
  PreimageChoice choice_;
  unsigned attempts_;
};

/// Answers only on a fixed subset of f's images: exactly floor(|Im f| * fraction)
/// of them, picked by ranking images under a keyed hash. FAILs elsewhere.
class RestrictedOracle final : public InverterOracle {
 public:
  RestrictedOracle(std::shared_ptr<const BruteForceOracle> base, const Rational& fraction, std::uint64_t key)
      : base_(std::move(base)), fraction_(fraction.to_double()) {
    if (fraction <= Rational(0) || fraction > Rational(1)) throw ConfigError("restriction fraction must lie in (0,1]");
    auto images = base_->index().images();
    std::sort(images.begin(), images.end(), [key](std::uint64_t a, std::uint64_t b) {
      auto ha = splitmix64(a ^ key), hb = splitmix64(b ^ key);
      return ha != hb ? ha < hb : a < b;
    });
    Rational::Int keep_big = (Rational(static_cast<std::int64_t>(images.size())) * fraction).numerator() /
                             (Rational(static_cast<std::int64_t>(images.size())) * fraction).denominator();
    std::size_t keep = static_cast<std::size_t>(keep_big);
    allowed_.insert(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(keep));
    image_count_ = images.size();
  }

  std::size_t input_length() const override { return base_->input_length(); }
  std::size_t output_length() const override { return base_->output_length(); }
  InversionOutcome invert(const BitString& y, CoinTape& coins) const override {
    if (y.size() != output_length() || !allowed_.count(y.to_uint())) return InversionOutcome::fail();
    return base_->invert(y, coins);
  }
  std::size_t max_coins() const override { return base_->max_coins(); }
  std::string name() const override { return "restricted(" + base_->name() + ")"; }
  double declared_success() const override { return fraction_; }

  std::size_t allowed_images() const { return allowed_.size(); }
  std::size_t image_count() const { return image_count_; }

 private:
  std::shared_ptr<const BruteForceOracle> base_;
  double fraction_;
  std::unordered_set<std::uint64_t> allowed_;
  std::size_t image_count_ = 0;
};

/// Answers only on images whose keyed hash falls below `fraction`; about that
/// fraction of any large image set, without enumerating it.
class KeyedRestrictionOracle final : public InverterOracle {
 public:
  KeyedRestrictionOracle(OraclePtr base, double fraction, std::uint64_t key)
      : base_(std::move(base)), fraction_(fraction), key_(key) {
    if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("restriction fraction must lie in (0,1]");
  }

  std::size_t input_length() const override { return base_->input_length(); }
  std::size_t output_length() const override { return base_->output_length(); }
  std::size_t max_coins() const override { return base_->max_coins(); }
  std::string name() const override { return "keyed_restricted(" + base_->name() + ")"; }
  double declared_success() const override { return fraction_ * base_->declared_success(); }

  bool allows(const BitString& y) const {
    std::uint64_t h = splitmix64(key_ ^ y.size());
    for (std::size_t i = 0; i < y.size(); i += 64) h = splitmix64(h ^ y.slice(i, std::min<std::size_t>(64, y.size() - i)).to_uint());
    return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction_;
  }

  InversionOutcome invert(const BitString& y, CoinTape& coins) const override {
    if (!allows(y)) return InversionOutcome::fail();
    return base_->invert(y, coins);
  }

 private:
  OraclePtr base_;
  double fraction_;
  std::uint64_t key_;
};

class AlwaysFailOracle final : public InverterOracle {
 public:
  AlwaysFailOracle(std::size_t input_length, std::size_t output_length) : in_(input_length), out_(output_length) {}
  std::size_t input_length() const override { return in_; }
  std::size_t output_length() const override { return out_; }
  InversionOutcome invert(const BitString&, CoinTape&) const override { return InversionOutcome::fail(); }
  std::size_t max_coins() const override { return 0; }
  std::string name() const override { return "always_fail"; }
  double declared_success() const override { return 0.0; }

 private:
  std::size_t in_, out_;
};

/// Exhaustive inversion of a truncating hash: the image fixes the hash and
/// i, so only x is searched: candidates are f^-1(y) whose truncated hash
/// matches the image's hash bits.
class TruncatingHashOracle final : public InverterOracle {
 public:
  TruncatingHashOracle(std::shared_ptr<const TruncatingHashFunction> fn, PreimageChoice choice,
                       unsigned attempts = kSelectionAttempts)
      : fn_(std::move(fn)), index_(fn_->base()), choice_(choice), attempts_(attempts) {}

  std::size_t input_length() const override { return fn_->input_length(); }
  std::size_t output_length() const override { return fn_->output_length(); }
  std::size_t max_coins() const override {
    return choice_ == PreimageChoice::canonical ? 0 : attempts_ * fn_->layout().n;
  }
  std::string name() const override {
    return std::string("hash_brute_force") + (choice_ == PreimageChoice::canonical ? "(canonical)" : "");
  }

  InversionOutcome invert(const BitString& out, CoinTape& coins) const override {
    const auto& L = fn_->layout();
    if (out.size() != L.output_length()) return InversionOutcome::fail();
    std::size_t pos = 0;
    auto description = out.slice(pos, L.description());
    pos += L.description();
    std::uint64_t i = out.slice(pos, L.index_width()).to_uint();
    pos += L.index_width();
    if (i > L.m) return InversionOutcome::fail();
    std::uint64_t y = out.slice(pos, L.image).to_uint();
    pos += L.image;
    std::uint64_t tail = out.slice(pos, L.m).to_uint();
    std::uint64_t w = i == L.m ? tail : tail >> (L.m - i);
    if (i < L.m && (tail & ((std::uint64_t{1} << (L.m - i)) - 1)) != 0) return InversionOutcome::fail();
    auto h = AffineHash::decode(description, L.n, L.m);
    std::vector<std::uint64_t> candidates;
    for (auto x : index_.of(y))
      if (h.truncated(x, i) == w) candidates.push_back(x);
    auto x = choose_candidate(candidates, choice_, coins, attempts_);
    if (!x) return InversionOutcome::fail();
    return InversionOutcome::success(fn_->encode_input(description, static_cast<std::size_t>(i), *x));
  }

 private:
  std::shared_ptr<const TruncatingHashFunction> fn_;
  PreimageIndex index_;
  PreimageChoice choice_;
  unsigned attempts_;
};

/// Inverts a direct product block by block with an oracle for the base function.
class BlockwiseOracle final : public InverterOracle {
 public:
  BlockwiseOracle(std::shared_ptr<const DirectProductFunction> product, OraclePtr block_oracle)
      : product_(std::move(product)), block_(std::move(block_oracle)) {}

  std::size_t input_length() const override { return product_->input_length(); }
  std::size_t output_length() const override { return product_->output_length(); }
  std::size_t max_coins() const override { return product_->copies() * block_->max_coins(); }
  std::string name() const override { return "blockwise(" + block_->name() + ")"; }
  double declared_success() const override { return std::pow(block_->declared_success(), static_cast<double>(product_->copies())); }

  InversionOutcome invert(const BitString& y, CoinTape& coins) const override {
    if (y.size() != output_length()) return InversionOutcome::fail();
    std::size_t l = product_->base()->output_length();
    BitString out;
    for (std::size_t b = 0; b < product_->copies(); ++b) {
      auto o = block_->invert(y.slice(b * l, l), coins);
      if (o.failed()) return o;
      out.append(o.preimage());
    }
    return InversionOutcome::success(std::move(out));
  }

 private:
  std::shared_ptr<const DirectProductFunction> product_;
  OraclePtr block_;
};

/// An oracle for a tabulated sampler, seen as a distributional inverter.
class OracleInverter final : public DistributionalInverter {
 public:
  explicit OracleInverter(OraclePtr oracle) : oracle_(std::move(oracle)) {}
  std::size_t preimage_length() const override { return oracle_->input_length(); }
  std::size_t image_length() const override { return oracle_->output_length(); }
  std::size_t coin_length() const override { return oracle_->max_coins(); }
  std::string name() const override { return oracle_->name(); }
  InversionOutcome invert_tape(const BitString& y, CoinTape& coins) const override { return oracle_->invert(y, coins); }

 private:
  OraclePtr oracle_;
};

// ---------------------------------------------------------------------------
// Weak to strong inversion

inline constexpr unsigned kPositionAttempts = 64;

/// Strong inverter for f from a weak inverter for its t-fold direct product.
///
/// Each repetition plants y at a uniformly random block among t - 1 fresh
/// images f(x_2), ..., f(x_t), asks the weak inverter for the whole
/// product, and keeps the planted block if it maps back to y. Repetitions
/// read the coin tape in order, so success within R repetitions implies
/// success within any R' >= R on the same tape.
class StrongInverter final : public InverterOracle {
 public:
  StrongInverter(FunctionPtr f, std::size_t t, OraclePtr weak, std::size_t repetitions)
      : f_(std::move(f)), t_(t), weak_(std::move(weak)), repetitions_(repetitions) {
    if (t == 0 || repetitions == 0) throw ConfigError("weak_to_strong needs t >= 1 and at least one repetition");
    if (weak_->input_length() != t * f_->input_length() || weak_->output_length() != t * f_->output_length())
      throw ConfigError("weak inverter " + weak_->name() + " is not for the " + std::to_string(t) + "-fold product");
  }

  std::size_t input_length() const override { return f_->input_length(); }
  std::size_t output_length() const override { return f_->output_length(); }
  std::size_t max_coins() const override {
    return repetitions_ * (kPositionAttempts * ceil_log2(t_) + (t_ - 1) * f_->input_length() + weak_->max_coins());
  }
  std::string name() const override {
    return "strong(t=" + std::to_string(t_) + ", R=" + std::to_string(repetitions_) + ", " + weak_->name() + ")";
  }

  InversionOutcome invert(const BitString& y, CoinTape& coins) const override {
    return invert_within(y, coins, repetitions_);
  }

  /// Same procedure capped at `repetitions` (<= the configured count).
  InversionOutcome invert_within(const BitString& y, CoinTape& coins, std::size_t repetitions) const {
    if (y.size() != output_length()) return InversionOutcome::fail();
    std::size_t n = f_->input_length(), l = f_->output_length();
    for (std::size_t r = 0; r < repetitions; ++r) {
      auto j = coins.below(t_, kPositionAttempts);
      if (!j) return InversionOutcome::fail();
      BitString image;
      for (std::size_t b = 0; b < t_; ++b) {
        if (b == *j) {
          image.append(y);
          continue;
        }
        auto x = coins.take(n);
        if (!x) return InversionOutcome::fail();
        image.append((*f_)(*x));
      }
      auto o = weak_->invert(image, coins);
      if (o.failed() || o.preimage().size() != t_ * n) continue;
      auto candidate = o.preimage().slice(*j * n, n);
      if ((*f_)(candidate).size() == l && (*f_)(candidate) == y) return InversionOutcome::success(candidate);
    }
    return InversionOutcome::fail();
  }

  std::size_t repetitions() const { return repetitions_; }
  std::size_t copies() const { return t_; }

 private:
  FunctionPtr f_;
  std::size_t t_;
  OraclePtr weak_;
  std::size_t repetitions_;
};

/// Strong inverter for f with success at least 1 - failure, given a weak
/// inverter for its t-fold product of declared success eta (measured or promised).
inline std::shared_ptr<const StrongInverter> weak_to_strong(FunctionPtr f, std::size_t t, OraclePtr weak, double failure,
                                                            std::optional<std::size_t> repetitions_override = std::nullopt) {
  std::size_t r = repetitions_override.value_or(0);
  if (r == 0) {
    double eta = weak->declared_success();
    r = eta <= 0.0 ? 1 : amplification_repetitions(eta, failure);
  }
  return std::make_shared<const StrongInverter>(std::move(f), t, std::move(weak), r);
}

// ---------------------------------------------------------------------------
// Strong to distributional inversion

/// How the distributional inverter walks the truncation length i.
enum class LevelSchedule {
  descending,  // i = m, m-1, ..., 0; first success wins
  random,      // m + 1 attempts, each at a uniformly random i
};

/// Distributional inverter for a tabulated sampler S built from a strong
/// inverter for its truncating hash.
///
/// One attempt at level i draws a fresh hash h and a uniform i-bit w, asks
/// the strong inverter for a preimage of h ∘ i ∘ y ∘ w, and returns the x
/// component if S maps it to y.
class HashingInverter final : public DistributionalInverter {
 public:
  HashingInverter(std::shared_ptr<const TruncatingHashFunction> hash_fn, OraclePtr strong,
                  LevelSchedule schedule = LevelSchedule::descending)
      : fn_(std::move(hash_fn)), strong_(std::move(strong)), schedule_(schedule) {
    if (strong_->input_length() != fn_->input_length() || strong_->output_length() != fn_->output_length())
      throw ConfigError("strong inverter " + strong_->name() + " does not match the truncating hash");
  }

  std::size_t preimage_length() const override { return fn_->layout().n; }
  std::size_t image_length() const override { return fn_->layout().image; }
  std::size_t coin_length() const override {
    const auto& L = fn_->layout();
    std::size_t per_attempt = L.description() + L.m + strong_->max_coins();
    if (schedule_ == LevelSchedule::random) per_attempt += kPositionAttempts * L.index_width();
    return (L.m + 1) * per_attempt;
  }
  std::string name() const override {
    return std::string("hashing_inverter(") + (schedule_ == LevelSchedule::descending ? "descending" : "random") + ", " +
           strong_->name() + ")";
  }

  InversionOutcome invert_tape(const BitString& y, CoinTape& coins) const override {
    const auto& L = fn_->layout();
    if (y.size() != L.image) return InversionOutcome::fail();
    for (std::size_t attempt = 0; attempt <= L.m; ++attempt) {
      std::size_t i = L.m - attempt;
      if (schedule_ == LevelSchedule::random) {
        auto drawn = coins.below(L.m + 1, kPositionAttempts);
        if (!drawn) return InversionOutcome::fail();
        i = static_cast<std::size_t>(*drawn);
      }
      auto description = coins.take(L.description());
      auto w = coins.bits(i);
      if (!description || !w) return InversionOutcome::fail();
      auto query = fn_->assemble(*description, i, y.to_uint(), *w);
      auto o = strong_->invert(query, coins);
      if (o.failed()) continue;
      auto x = fn_->input_point(o.preimage());
      if (fn_->base()(x) == y) return InversionOutcome::success(x);
    }
    return InversionOutcome::fail();
  }

  const TruncatingHashFunction& hash_function() const { return *fn_; }

 private:
  std::shared_ptr<const TruncatingHashFunction> fn_;
  OraclePtr strong_;
  LevelSchedule schedule_;
};

/// Distributional inverter for the sampler table `f` from a strong inverter
/// for its truncating hash `hash_fn`.
inline std::shared_ptr<const HashingInverter> strong_to_distributional(std::shared_ptr<const TruncatingHashFunction> hash_fn,
                                                                       OraclePtr strong_inv,
                                                                       LevelSchedule schedule = LevelSchedule::descending) {
  return std::make_shared<const HashingInverter>(std::move(hash_fn), std::move(strong_inv), schedule);
}

// ---------------------------------------------------------------------------
// The full chain

/// Builds the oracle for the t-fold product of the truncating hash.
using ProductOracleFactory =
    std::function<OraclePtr(const std::shared_ptr<const TruncatingHashFunction>&, const std::shared_ptr<const DirectProductFunction>&)>;

/// Exhaustive search on every block of the product.
inline ProductOracleFactory brute_force_product_oracle(PreimageChoice choice) {
  return [choice](const std::shared_ptr<const TruncatingHashFunction>& h, const std::shared_ptr<const DirectProductFunction>& g) {
    return std::make_shared<const BlockwiseOracle>(g, std::make_shared<const TruncatingHashOracle>(h, choice));
  };
}

inline ProductOracleFactory failing_product_oracle() {
  return [](const std::shared_ptr<const TruncatingHashFunction>&, const std::shared_ptr<const DirectProductFunction>& g) {
    return std::make_shared<const AlwaysFailOracle>(g->input_length(), g->output_length());
  };
}

/// Parameters of the chain. Unset fields come from the formulas; desk-scale
/// runs override them and the chosen values are reported back.
struct ChainParams {
  std::optional<std::size_t> c;
  std::optional<std::size_t> m;
  std::optional<std::size_t> t;
  std::optional<std::size_t> repetitions;
  LevelSchedule schedule = LevelSchedule::descending;
  /// Largest direct product the chain will build from the formula before
  /// asking for an override.
  std::size_t max_copies = 64;
};

struct ChainInverter {
  std::size_t c = 0, m = 0, t = 0, repetitions = 0;
  bool m_from_formula = false, t_from_formula = false;
  std::shared_ptr<const TruncatingHashFunction> hash;       // h
  std::shared_ptr<const DirectProductFunction> product;     // g
  OraclePtr weak;                                           // oracle for g
  std::shared_ptr<const StrongInverter> strong;             // for h
  std::shared_ptr<const HashingInverter> distributional;    // for S
};

/// Truncating hash -> direct product -> oracle -> weak_to_strong -> strong_to_distributional.
inline ChainInverter chain_distributional_inverter(const TruthTable& sampler, const Rational& target_distance,
                                                   const ProductOracleFactory& oracle, const ChainParams& params = {}) {
  ChainInverter chain;
  std::size_t n = sampler.arity();
  chain.c = params.c.value_or(hash_precision_for(n, target_distance));
  chain.m_from_formula = !params.m.has_value();
  chain.m = params.m.value_or(truncating_hash_length(n, chain.c));
  chain.t_from_formula = !params.t.has_value();
  chain.t = params.t ? *params.t : static_cast<std::size_t>(direct_product_length(n, chain.c));
  if (chain.t > params.max_copies)
    throw SizeError("direct product of " + std::to_string(chain.t) + " copies exceeds cap " + std::to_string(params.max_copies) +
                    "; override t");
  if (chain.m > 63 || n > 63) throw SizeError("hash length " + std::to_string(chain.m) + " exceeds 63; override m");

  auto base = std::make_shared<const TruthTable>(sampler);
  chain.hash = std::make_shared<const TruncatingHashFunction>(base, chain.m);
  chain.product = std::make_shared<const DirectProductFunction>(chain.hash, chain.t);
  chain.weak = oracle(chain.hash, chain.product);
  // Strong inversion target 1 - 1/n^(6c).
  double failure = std::pow(static_cast<double>(std::max<std::size_t>(n, 2)), -6.0 * static_cast<double>(chain.c));
  chain.strong = weak_to_strong(chain.hash, chain.t, chain.weak, std::max(failure, 1e-12), params.repetitions);
  chain.repetitions = chain.strong->repetitions();
  chain.distributional = strong_to_distributional(chain.hash, chain.strong, params.schedule);
  return chain;
}

}  // namespace invlearn
