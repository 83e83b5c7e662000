#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "invlearn/errors.hpp"

namespace invlearn {

/// Largest arity a materialized truth table may have unless the caller
/// raises the cap explicitly.
inline constexpr std::size_t kDefaultTableCap = 24;

/// Finite string over {0,1}. Integer interpretation is most-significant bit
/// first: "01" is 1, "10" is 2.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t length) : bits_(length, 0) {}

  /// Parses a literal made of '0' and '1'.
  static BitString parse(std::string_view text) {
    BitString out;
    out.bits_.reserve(text.size());
    for (char c : text) {
      if (c != '0' && c != '1') throw std::invalid_argument("not a bit string: '" + std::string(text) + "'");
      out.bits_.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return out;
  }

  /// `length`-bit big-endian encoding of `value`; high bits beyond length are dropped.
  static BitString from_uint(std::uint64_t value, std::size_t length) {
    BitString out(length);
    for (std::size_t i = 0; i < length; ++i) {
      std::size_t shift = length - 1 - i;
      out.bits_[i] = shift < 64 ? static_cast<std::uint8_t>((value >> shift) & 1U) : 0;
    }
    return out;
  }

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  bool at(std::size_t i) const {
    if (i >= bits_.size()) throw std::out_of_range("bit index out of range");
    return bits_[i] != 0;
  }
  void set(std::size_t i, bool v) { bits_.at(i) = v ? 1 : 0; }
  void push_back(bool v) { bits_.push_back(v ? 1 : 0); }

  /// Requires size() <= 64.
  std::uint64_t to_uint() const {
    if (bits_.size() > 64) throw SizeError("bit string longer than 64 bits has no integer form");
    std::uint64_t v = 0;
    for (auto b : bits_) v = (v << 1) | b;
    return v;
  }

  BitString slice(std::size_t offset, std::size_t length) const {
    if (offset > bits_.size() || length > bits_.size() - offset)
      throw std::out_of_range("slice [" + std::to_string(offset) + ", +" + std::to_string(length) +
                              ") outside bit string of length " + std::to_string(bits_.size()));
    BitString out;
    out.bits_.assign(bits_.begin() + static_cast<std::ptrdiff_t>(offset),
                     bits_.begin() + static_cast<std::ptrdiff_t>(offset + length));
    return out;
  }

  BitString& append(const BitString& other) {
    bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
    return *this;
  }

  std::string str() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
    return s;
  }

  std::size_t popcount() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

  friend bool operator==(const BitString&, const BitString&) = default;
  /// Shorter strings order first, then lexicographic (equal to numeric order).
  friend std::strong_ordering operator<=>(const BitString& a, const BitString& b) {
    if (auto c = a.bits_.size() <=> b.bits_.size(); c != 0) return c;
    return a.bits_ <=> b.bits_;
  }

  friend std::ostream& operator<<(std::ostream& os, const BitString& s) { return os << '"' << s.str() << '"'; }

  const std::vector<std::uint8_t>& raw() const { return bits_; }

 private:
  std::vector<std::uint8_t> bits_;
};

/// a ∘ b
inline BitString concat(const BitString& a, const BitString& b) {
  BitString out = a;
  out.append(b);
  return out;
}

inline BitString prefix(const BitString& a, std::size_t i) {
  if (i > a.size())
    throw std::out_of_range("prefix length " + std::to_string(i) + " exceeds string length " +
                            std::to_string(a.size()));
  return a.slice(0, i);
}

struct BitStringHash {
  std::size_t operator()(const BitString& s) const {
    std::uint64_t h = 1469598103934665603ULL ^ s.size();
    for (auto b : s.raw()) h = (h ^ b) * 1099511628211ULL;
    return static_cast<std::size_t>(h);
  }
};

/// Smallest w with 2^w >= v (0 for v <= 1).
inline unsigned ceil_log2(std::uint64_t v) {
  unsigned w = 0;
  while (w < 64 && (std::uint64_t{1} << w) < v) ++w;
  return w;
}

/// Total function {0,1}^n -> {0,1}^out_len, stored as one word per input.
class TruthTable {
 public:
  TruthTable() = default;
  TruthTable(std::size_t arity, std::size_t out_len, std::size_t cap = kDefaultTableCap)
      : arity_(arity), out_len_(out_len) {
    if (arity > cap)
      throw SizeError("truth table arity " + std::to_string(arity) + " exceeds cap " + std::to_string(cap));
    if (out_len > 64) throw SizeError("truth table output length " + std::to_string(out_len) + " exceeds 64");
    words_.assign(std::size_t{1} << arity, 0);
  }

  /// Builds a table by evaluating `fn` on every input in integer order.
  template <class Fn>
  static TruthTable tabulate(std::size_t arity, std::size_t out_len, Fn&& fn, std::size_t cap = kDefaultTableCap) {
    TruthTable t(arity, out_len, cap);
    for (std::uint64_t x = 0; x < t.words_.size(); ++x) t.set_word(x, fn(x));
    return t;
  }

  static TruthTable from_bits(std::size_t arity, std::string_view bits) {
    TruthTable t(arity, 1);
    if (bits.size() != t.words_.size())
      throw ConfigError("expected " + std::to_string(t.words_.size()) + " table entries, got " +
                        std::to_string(bits.size()));
    for (std::size_t i = 0; i < bits.size(); ++i) t.set_word(i, bits[i] == '1' ? 1 : 0);
    return t;
  }

  std::size_t arity() const { return arity_; }
  std::size_t out_len() const { return out_len_; }
  std::size_t rows() const { return words_.size(); }

  std::uint64_t word(std::uint64_t x) const { return words_[x]; }
  void set_word(std::uint64_t x, std::uint64_t y) {
    std::uint64_t mask = out_len_ == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << out_len_) - 1);
    words_.at(x) = y & mask;
  }

  BitString operator()(const BitString& x) const {
    if (x.size() != arity_)
      throw ConfigError("input of length " + std::to_string(x.size()) + " for table of arity " +
                        std::to_string(arity_));
    return BitString::from_uint(words_[x.to_uint()], out_len_);
  }
  bool bit(std::uint64_t x) const { return (words_[x] & 1U) != 0; }

  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const TruthTable&, const TruthTable&) = default;

  /// Header line `n=<arity> out=<out_len>` followed by the concatenated
  /// outputs (row 0 first, each MSB first) in lowercase hex, zero padded to
  /// a whole nibble.
  std::string to_hex() const {
    std::ostringstream os;
    os << "n=" << arity_ << " out=" << out_len_ << "\n";
    static constexpr char kDigits[] = "0123456789abcdef";
    unsigned nibble = 0, filled = 0;
    std::string hex;
    for (auto w : words_) {
      for (std::size_t i = 0; i < out_len_; ++i) {
        nibble = (nibble << 1) | static_cast<unsigned>((w >> (out_len_ - 1 - i)) & 1U);
        if (++filled == 4) {
          hex.push_back(kDigits[nibble]);
          nibble = filled = 0;
        }
      }
    }
    if (filled != 0) hex.push_back(kDigits[nibble << (4 - filled)]);
    os << hex << "\n";
    return os.str();
  }

  static TruthTable from_hex(std::string_view text, std::size_t cap = kDefaultTableCap) {
    std::istringstream is{std::string(text)};
    std::string header_n, header_out, body;
    if (!(is >> header_n >> header_out)) throw ConfigError("truth table: missing header");
    auto field = [](const std::string& tok, std::string_view key) -> std::size_t {
      if (!tok.starts_with(key)) throw ConfigError("truth table: expected '" + std::string(key) + "...' got '" + tok + "'");
      try {
        return static_cast<std::size_t>(std::stoul(tok.substr(key.size())));
      } catch (const std::exception&) {
        throw ConfigError("truth table: bad header field '" + tok + "'");
      }
    };
    std::size_t n = field(header_n, "n=");
    std::size_t out = field(header_out, "out=");
    TruthTable t(n, out, cap);
    std::string chunk;
    while (is >> chunk) body += chunk;
    std::size_t total_bits = t.rows() * out;
    if (body.size() != (total_bits + 3) / 4)
      throw ConfigError("truth table: expected " + std::to_string((total_bits + 3) / 4) + " hex digits, got " +
                        std::to_string(body.size()));
    std::size_t bit_index = 0;
    std::uint64_t cur = 0;
    std::size_t row = 0, in_row = 0;
    for (char c : body) {
      unsigned v;
      if (c >= '0' && c <= '9') v = static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') v = static_cast<unsigned>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v = static_cast<unsigned>(c - 'A' + 10);
      else throw ConfigError(std::string("truth table: bad hex digit '") + c + "'");
      for (int j = 3; j >= 0; --j, ++bit_index) {
        unsigned b = (v >> j) & 1U;
        if (bit_index >= total_bits) {
          if (b != 0) throw ConfigError("truth table: nonzero padding bits");
          continue;
        }
        cur = (cur << 1) | b;
        if (++in_row == out) {
          t.words_[row++] = cur;
          cur = 0;
          in_row = 0;
        }
      }
    }
    if (out == 0) std::fill(t.words_.begin(), t.words_.end(), 0);
    return t;
  }

 private:
  std::size_t arity_ = 0;
  std::size_t out_len_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Membership-query access to a Boolean function with an exact call count.
/// Copies share the underlying function and counter.
class QueryOracle {
 public:
  using Fn = std::function<bool(const BitString&)>;

  QueryOracle(std::size_t arity, Fn fn)
      : arity_(arity), fn_(std::make_shared<Fn>(std::move(fn))), count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}

  static QueryOracle from_table(TruthTable table) {
    if (table.out_len() != 1) throw ConfigError("membership oracle needs a Boolean table");
    auto shared = std::make_shared<const TruthTable>(std::move(table));
    return QueryOracle(shared->arity(), [shared](const BitString& x) { return shared->bit(x.to_uint()); });
  }

  bool operator()(const BitString& x) const {
    if (x.size() != arity_)
      throw ConfigError("query of length " + std::to_string(x.size()) + " to oracle of arity " + std::to_string(arity_));
    count_->fetch_add(1, std::memory_order_relaxed);
    return (*fn_)(x);
  }

  std::size_t arity() const { return arity_; }
  std::uint64_t queries() const { return count_->load(std::memory_order_relaxed); }
  void reset_count() const { count_->store(0, std::memory_order_relaxed); }

 private:
  std::size_t arity_;
  std::shared_ptr<Fn> fn_;
  std::shared_ptr<std::atomic<std::uint64_t>> count_;
};

/// Queries every input once, in integer order.
inline TruthTable tt_from_oracle(const QueryOracle& oracle, std::size_t n, std::size_t cap = kDefaultTableCap) {
  if (oracle.arity() != n) throw ConfigError("oracle arity does not match requested table arity");
  TruthTable t(n, 1, cap);
  for (std::uint64_t x = 0; x < t.rows(); ++x) t.set_word(x, oracle(BitString::from_uint(x, n)) ? 1 : 0);
  return t;
}

/// {x : f(x) = y} in increasing order.
inline std::vector<BitString> preimages(const TruthTable& f, const BitString& y) {
  if (y.size() != f.out_len()) throw ConfigError("image length does not match table output length");
  std::uint64_t target = y.to_uint();
  std::vector<BitString> out;
  for (std::uint64_t x = 0; x < f.rows(); ++x)
    if (f.word(x) == target) out.push_back(BitString::from_uint(x, f.arity()));
  return out;
}

/// Image -> sorted preimage list, built once per table.
class PreimageIndex {
 public:
  PreimageIndex() = default;
  explicit PreimageIndex(const TruthTable& f) : arity_(f.arity()) {
    for (std::uint64_t x = 0; x < f.rows(); ++x) index_[f.word(x)].push_back(x);
  }

  const std::vector<std::uint64_t>& of(std::uint64_t y) const {
    static const std::vector<std::uint64_t> kEmpty;
    auto it = index_.find(y);
    return it == index_.end() ? kEmpty : it->second;
  }

  std::size_t image_size() const { return index_.size(); }
  std::size_t arity() const { return arity_; }

  std::vector<std::uint64_t> images() const {
    std::vector<std::uint64_t> out;
    out.reserve(index_.size());
    for (const auto& [y, xs] : index_) out.push_back(y);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t arity_ = 0;
  std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> index_;
};

namespace tables {

inline TruthTable constant(std::size_t n, bool v) {
  return TruthTable::tabulate(n, 1, [v](std::uint64_t) { return v ? 1U : 0U; });
}
inline TruthTable conjunction(std::size_t n) {
  std::uint64_t all = (std::uint64_t{1} << n) - 1;
  return TruthTable::tabulate(n, 1, [all](std::uint64_t x) { return x == all ? 1U : 0U; });
}
inline TruthTable disjunction(std::size_t n) {
  return TruthTable::tabulate(n, 1, [](std::uint64_t x) { return x != 0 ? 1U : 0U; });
}
inline TruthTable parity(std::size_t n) {
  return TruthTable::tabulate(n, 1, [](std::uint64_t x) { return static_cast<std::uint64_t>(std::popcount(x) & 1); });
}
inline TruthTable majority(std::size_t n) {
  return TruthTable::tabulate(n, 1, [n](std::uint64_t x) { return 2 * static_cast<std::size_t>(std::popcount(x)) > n ? 1U : 0U; });
}
inline TruthTable identity(std::size_t n) {
  return TruthTable::tabulate(n, n, [](std::uint64_t x) { return x; });
}

}  // namespace tables

}  // namespace invlearn
