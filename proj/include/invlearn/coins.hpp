#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

#include "invlearn/bitcore.hpp"

namespace invlearn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded pseudorandom stream. `substream(name)` derives an independent
/// stream keyed by name, so adding draws in one component never shifts the
/// randomness another component sees.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  RandomStream substream(std::string_view name) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    return RandomStream(splitmix64(seed_ ^ splitmix64(h)));
  }
  RandomStream substream(std::uint64_t index) const { return RandomStream(splitmix64(seed_ + splitmix64(index + 1))); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next() { return engine_(); }
  bool bit() { return (engine_() >> 63) != 0; }

  BitString bits(std::size_t n) {
    BitString out(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) word = engine_();
      out.set(i, ((word >> (63 - i % 64)) & 1U) != 0);
    }
    return out;
  }

  /// Uniform integer in [0, bound) by rejection on the smallest covering power of two.
  std::uint64_t below(std::uint64_t bound) {
    unsigned w = ceil_log2(bound);
    if (w == 0) return 0;
    std::uint64_t mask = w == 64 ? ~0ULL : ((1ULL << w) - 1);
    for (;;) {
      std::uint64_t v = engine_() & mask;
      if (v < bound) return v;
    }
  }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Sequential reader over inverter coins. Backed either by an explicit,
/// finite coin string (exhaustion reads as nullopt) or by a RandomStream
/// that never runs dry.
class CoinTape {
 public:
  explicit CoinTape(const BitString& coins) : fixed_(&coins) {}
  explicit CoinTape(RandomStream& stream) : stream_(&stream) {}

  std::optional<bool> bit() {
    if (fixed_ != nullptr) {
      if (pos_ >= fixed_->size()) return std::nullopt;
      return (*fixed_)[pos_++];
    }
    ++pos_;
    return stream_->bit();
  }

  /// Next `w` coins as a big-endian integer (w <= 64).
  std::optional<std::uint64_t> bits(std::size_t w) {
    if (fixed_ != nullptr && fixed_->size() - pos_ < w) {
      pos_ = fixed_->size();
      return std::nullopt;
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < w; ++i) v = (v << 1) | (*bit() ? 1U : 0U);
    return v;
  }

  std::optional<BitString> take(std::size_t n) {
    if (fixed_ != nullptr && fixed_->size() - pos_ < n) {
      pos_ = fixed_->size();
      return std::nullopt;
    }
    if (fixed_ != nullptr) {
      auto out = fixed_->slice(pos_, n);
      pos_ += n;
      return out;
    }
    pos_ += n;
    return stream_->bits(n);
  }

  /// Uniform value in [0, bound) by rejection over ceil(log2 bound)-bit
  /// draws, at most `attempts` tries. Exactly uniform conditioned on success.
  std::optional<std::uint64_t> below(std::uint64_t bound, unsigned attempts) {
    if (bound == 0) return std::nullopt;
    unsigned w = ceil_log2(bound);
    if (w == 0) return 0;
    for (unsigned a = 0; a < attempts; ++a) {
      auto v = bits(w);
      if (!v) return std::nullopt;
      if (*v < bound) return v;
    }
    return std::nullopt;
  }

  std::size_t consumed() const { return pos_; }
  bool finite() const { return fixed_ != nullptr; }

 private:
  const BitString* fixed_ = nullptr;
  RandomStream* stream_ = nullptr;
  std::size_t pos_ = 0;
};

}  // namespace invlearn
