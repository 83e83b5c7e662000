#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>

#include "invlearn/bitcore.hpp"
#include "invlearn/coins.hpp"
#include "invlearn/distributions.hpp"
#include "invlearn/rational.hpp"

namespace invlearn {

/// A distance value that is either exact or an estimate with a confidence radius.
struct DistanceReport {
  bool exact = true;
  Rational exact_value{0};
  double value = 0.0;
  std::uint64_t samples = 0;
  double radius = 0.0;
  double confidence = 1.0;

  static DistanceReport from_exact(const Rational& d) {
    DistanceReport r;
    r.exact = true;
    r.exact_value = d;
    r.value = d.to_double();
    return r;
  }
};

/// Half the L1 distance; equal to the largest gap |D0(T) - D1(T)| over events T.
inline Rational statistical_distance(const ExactDistribution& d0, const ExactDistribution& d1) {
  Rational sum(0);
  auto a = d0.begin(), b = d1.begin();
  while (a != d0.end() || b != d1.end()) {
    if (b == d1.end() || (a != d0.end() && a->first < b->first)) {
      sum += abs(a->second);
      ++a;
    } else if (a == d0.end() || b->first < a->first) {
      sum += abs(b->second);
      ++b;
    } else {
      sum += abs(a->second - b->second);
      ++a;
      ++b;
    }
  }
  return sum / Rational(2);
}

/// D0(T) - D1(T) for T = {x : D0(x) > D1(x)}.
inline Rational max_event_gap(const ExactDistribution& d0, const ExactDistribution& d1) {
  Rational gap(0);
  for (const auto& [x, m] : d0) {
    Rational other = d1(x);
    if (m > other) gap += m - other;
  }
  return gap;
}

/// Exact disagreement mass Pr_{x~D}[h(x) != f(x)].
inline Rational error_rate(const std::function<bool(const BitString&)>& h, const TruthTable& f, const ExactDistribution& d) {
  if (f.out_len() != 1) throw ConfigError("error_rate needs a Boolean target");
  Rational err(0);
  for (const auto& [x, m] : d) {
    if (x.size() != f.arity())
      throw ConfigError("distribution point of length " + std::to_string(x.size()) + " for target arity " +
                        std::to_string(f.arity()));
    if (h(x) != f.bit(x.to_uint())) err += m;
  }
  return err;
}

/// Radius r with Pr[||p_hat - p||_1 >= r] <= alpha for an N-sample
/// histogram over K cells (multinomial L1 bound, the histogram analogue of DKW):
/// Pr >= r is at most (2^K - 2) exp(-N r^2 / 2).
inline double l1_confidence_radius(std::uint64_t samples, std::size_t cells, double alpha) {
  double k = static_cast<double>(std::max<std::size_t>(cells, 2));
  return std::sqrt(2.0 * (k * std::log(2.0) + std::log(1.0 / alpha)) / static_cast<double>(samples));
}

/// Plug-in half-L1 distance between the empirical output histograms of two
/// samplers, each fed `trials` coin strings drawn from its own substream.
inline DistanceReport empirical_distance(const Sampler& s0, const Sampler& s1, std::uint64_t trials,
                                         const RandomStream& coins, double alpha = 0.05) {
  if (trials == 0) throw ConfigError("empirical_distance needs at least one trial");
  std::map<BitString, std::uint64_t> h0, h1;
  auto r0 = coins.substream("sampler0");
  auto r1 = coins.substream("sampler1");
  for (std::uint64_t t = 0; t < trials; ++t) {
    ++h0[s0(r0.bits(s0.coin_length()))];
    ++h1[s1(r1.bits(s1.coin_length()))];
  }
  std::set<BitString> cells;
  for (const auto& [x, c] : h0) cells.insert(x);
  for (const auto& [x, c] : h1) cells.insert(x);
  double sum = 0.0;
  for (const auto& x : cells) {
    auto a = h0.count(x) ? h0.at(x) : 0;
    auto b = h1.count(x) ? h1.at(x) : 0;
    sum += std::fabs(static_cast<double>(a) - static_cast<double>(b));
  }
  DistanceReport r;
  r.exact = false;
  r.value = 0.5 * sum / static_cast<double>(trials);
  r.samples = trials;
  // Half of the sum of the two histograms' L1 radii, alpha split between them.
  r.radius = l1_confidence_radius(trials, cells.size(), alpha / 2);
  r.confidence = 1.0 - alpha;
  return r;
}

/// Plug-in half-L1 distance between an empirical histogram and an exact law.
inline DistanceReport empirical_distance_to(const std::map<BitString, std::uint64_t>& histogram, std::uint64_t trials,
                                            const ExactDistribution& reference, double alpha = 0.05) {
  if (trials == 0) throw ConfigError("empirical distance needs at least one trial");
  std::set<BitString> cells;
  for (const auto& [x, c] : histogram) cells.insert(x);
  for (const auto& [x, m] : reference) cells.insert(x);
  double sum = 0.0;
  for (const auto& x : cells) {
    double a = histogram.count(x) ? static_cast<double>(histogram.at(x)) / static_cast<double>(trials) : 0.0;
    sum += std::fabs(a - reference(x).to_double());
  }
  DistanceReport r;
  r.exact = false;
  r.value = 0.5 * sum;
  r.samples = trials;
  r.radius = 0.5 * l1_confidence_radius(trials, cells.size(), alpha);
  r.confidence = 1.0 - alpha;
  return r;
}

}  // namespace invlearn
