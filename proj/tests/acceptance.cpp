// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "invlearn/amplification.hpp"
#include "invlearn/harness.hpp"
#include "invlearn/learners.hpp"
#include "invlearn/reduction.hpp"

using namespace invlearn;

namespace {

Rational Q(std::int64_t a, std::int64_t b) { return Rational(Rational::Int(a), Rational::Int(b)); }

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& check) {
  auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s  criterion %d  %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

// All dyadic biases s/2^k with 1 <= k <= k_max.
std::vector<DyadicProb> dyadic_grid(unsigned k_max) {
  std::vector<DyadicProb> out;
  for (unsigned k = 1; k <= k_max; ++k)
    for (std::uint64_t s = 1; s < (std::uint64_t{1} << k); ++s) out.emplace_back(s, k);
  return out;
}

// Closed-form BitInv failure mass: each round rejects (2^C - s') of 2^C windows.
Rational bit_fail_closed_form(const DyadicProb& p, bool b, unsigned rounds) {
  std::uint64_t target = b ? p.numerator() : (std::uint64_t{1} << p.precision()) - p.numerator();
  std::uint64_t window = 1;
  while (window <= target) window <<= 1;
  Rational per_round = Q(static_cast<std::int64_t>(window - target), static_cast<std::int64_t>(window));
  Rational out(1);
  for (unsigned r = 0; r < rounds; ++r) out *= per_round;
  return out;
}

unsigned rounds_of(const Rational& gamma) {
  unsigned r = 0;
  while (Rational::pow2_inverse(r) > gamma) ++r;
  return r;
}

// ---------------------------------------------------------------------------

Outcome bit_inv_exactness() {
  std::size_t cells = 0, bad = 0;
  for (const auto& p : dyadic_grid(6))
    for (bool b : {false, true})
      for (const auto& gamma : {Q(1, 2), Q(1, 4), Q(1, 8)}) {
        ++cells;
        auto law = bit_inv_outcomes(p, b, gamma);
        // Preimages by running samp on every k-bit string.
        std::vector<BitString> pre;
        for (std::uint64_t r = 0; r < (std::uint64_t{1} << p.precision()); ++r) {
          auto coins = BitString::from_uint(r, p.precision());
          if (samp(p, coins) == b) pre.push_back(coins);
        }
        bool ok = law.success.size() == pre.size();
        Rational share = law.success_mass() / Rational(static_cast<std::int64_t>(pre.size()));
        for (const auto& r : pre) ok = ok && law.success.count(r) && law.success.at(r) == share;
        ok = ok && law.fail == bit_fail_closed_form(p, b, rounds_of(gamma)) && law.fail <= gamma;
        if (!ok) ++bad;
      }
  return {bad == 0, std::to_string(cells) + " (p, b, gamma) cells over k <= 6; " + std::to_string(bad) +
                        " deviate from exact uniformity (tolerance 0)"};
}

Outcome prod_inv_bound() {
  std::size_t cells = 0, enumerated = 0, bad = 0;
  Rational worst_ratio(0);
  auto grid = dyadic_grid(3);
  for (std::size_t n = 1; n <= 3; ++n) {
    std::vector<std::size_t> idx(n, 0);
    for (;;) {
      std::vector<DyadicProb> biases;
      for (auto i : idx) biases.push_back(grid[i]);
      ProductDistribution d(biases);
      for (const auto& gamma : {Q(1, 2), Q(1, 4), Q(1, 8)}) {
        if (!(gamma * Rational(static_cast<std::int64_t>(n)) < Rational(1))) continue;
        ProductInverter inv(d, gamma);
        unsigned rounds = rounds_of(gamma);
        bool full = inv.coin_length() <= 12;
        for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
          ++cells;
          auto y = BitString::from_uint(x, n);
          auto law = full ? inv.DistributionalInverter::exact_outcomes(y) : inv.exact_outcomes(y);
          enumerated += full ? 1 : 0;
          Rational keep(1);
          for (std::size_t i = 0; i < n; ++i) keep *= Rational(1) - bit_fail_closed_form(d[i], y[i], rounds);
          Rational bound = gamma * Rational(static_cast<std::int64_t>(n));
          if (law.fail != Rational(1) - keep || law.fail > bound) ++bad;
          if (law.fail / bound > worst_ratio) worst_ratio = law.fail / bound;
        }
      }
      std::size_t pos = 0;
      while (pos < n && ++idx[pos] == grid.size()) idx[pos++] = 0;
      if (pos == n) break;
    }
  }
  return {bad == 0, std::to_string(cells) + " (distribution, gamma, image) cells, " + std::to_string(enumerated) +
                        " by full coin enumeration; " + std::to_string(bad) + " violate FAIL = 1 - prod(1 - f_i) <= gamma*n; " +
                        "max FAIL/(gamma*n) = " + std::to_string(worst_ratio.to_double())};
}

Outcome error_decomposition_grid() {
  RandomStream rng(2024);
  auto grid = dyadic_grid(3);
  struct Setup {
    Sampler sampler;
    InverterPtr inverter;
  };
  std::vector<Setup> setups;
  for (std::size_t n = 1; n <= 3; ++n) {
    setups.push_back({Sampler::identity(n), std::make_shared<IdentityInverter>(n)});
    std::vector<ProductDistribution> dists;
    if (n == 1) {
      for (const auto& p : grid) dists.emplace_back(std::vector<DyadicProb>{p});
    } else if (n == 2) {
      for (const auto& p : grid)
        for (const auto& q : grid) dists.emplace_back(std::vector<DyadicProb>{p, q});
    } else {
      for (const auto& p : grid) dists.emplace_back(std::vector<DyadicProb>(3, p));
      for (int i = 0; i < 24; ++i)
        dists.emplace_back(std::vector<DyadicProb>{grid[rng.below(grid.size())], grid[rng.below(grid.size())],
                                                   grid[rng.below(grid.size())]});
    }
    for (const auto& d : dists)
      for (const auto& gamma : {Q(1, 2), Q(1, 8)}) setups.push_back({Sampler::product(d), std::make_shared<ProductInverter>(d, gamma)});
  }

  std::size_t triples = 0, bad = 0;
  for (const auto& setup : setups) {
    const auto& s = setup.sampler;
    std::size_t n = s.output_length();
    auto distance = statistical_distance(sampler_joint_distribution(s), joint_preimage_distribution(s, *setup.inverter));
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << (std::uint64_t{1} << n)); ++code) {
      auto f = TruthTable::tabulate(n, 1, [&](std::uint64_t x) { return (code >> x) & 1U; });
      auto learned = Hypothesis(TruthTable::tabulate(s.coin_length(), 1, [&](std::uint64_t w) {
        return f.bit(s(BitString::from_uint(w, s.coin_length())).to_uint()) ? 1U : 0U;
      }));
      auto arbitrary = Hypothesis(TruthTable::tabulate(s.coin_length(), 1, [&](std::uint64_t) { return rng.bit() ? 1U : 0U; }));
      for (const auto& c : {learned, arbitrary})
        for (bool label : {false, true}) {
          ++triples;
          ComposedHypothesis h(c, setup.inverter, label);
          auto mu = exact_mu_error(h, f, s);
          auto u = exact_uniform_error(c, f, s);
          if (abs(mu - u) > distance) ++bad;
        }
    }
  }
  return {bad == 0, std::to_string(setups.size()) + " (S, I) pairs x all f on n <= 3 x 2 hypotheses x 2 FAIL labels = " +
                        std::to_string(triples) + " checks; " + std::to_string(bad) + " violate |mu-err - U-err| <= SD"};
}

Outcome end_to_end_learning() {
  ProductDistribution d(std::vector<DyadicProb>(3, DyadicProb(3, 2)));
  auto s = Sampler::product(d);
  auto gamma = Rational::pow2_inverse(10);
  auto inverter = std::make_shared<ProductInverter>(d, gamma);
  auto alpha = Q(1, 16);
  std::size_t runs = 0, bad = 0, oracle_mismatch = 0;
  Rational worst(0);
  std::vector<std::pair<std::string, TruthTable>> targets = {{"AND", tables::conjunction(3)},
                                                             {"OR", tables::disjunction(3)},
                                                             {"PARITY", tables::parity(3)},
                                                             {"MAJ", tables::majority(3)}};
  auto mu = exact_output_distribution(s);
  for (const auto& [name, f] : targets) {
    // Independent value: the learned C equals f∘S, so only FAIL on images where f = 1 errs (label 0).
    Rational expected(0);
    for (const auto& [y, my] : mu) {
      if (!f.bit(y.to_uint())) continue;
      Rational keep(1);
      for (std::size_t i = 0; i < 3; ++i) keep *= Rational(1) - bit_fail_closed_form(d[i], y[i], 10);
      expected += my * (Rational(1) - keep);
    }
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      RandomStream coins(seed);
      auto result = learn_over_mu(QueryOracle::from_table(f), s, inverter, BruteForceLearner(), alpha, Q(1, 16), coins);
      auto err = exact_mu_error(result.hypothesis, f, s);
      ++runs;
      if (err > alpha) ++bad;
      if (err != expected) ++oracle_mismatch;
      if (err > worst) worst = err;
    }
  }
  return {bad == 0 && oracle_mismatch == 0,
          std::to_string(runs) + " seeded runs over AND/OR/PARITY/MAJ; max exact mu-error " + std::to_string(worst.to_double()) +
              " <= 1/16 in all but " + std::to_string(bad) + "; " + std::to_string(oracle_mismatch) +
              " disagree with the closed-form FAIL oracle"};
}

Outcome learner_contract() {
  const std::size_t m = 6;
  auto bit = [](std::uint64_t x, std::size_t i) { return (x >> (5 - i)) & 1U; };
  std::vector<std::pair<std::string, TruthTable>> targets = {
      {"x0", TruthTable::tabulate(m, 1, [&](std::uint64_t x) { return bit(x, 0); })},
      {"x1^x4", TruthTable::tabulate(m, 1, [&](std::uint64_t x) { return bit(x, 1) ^ bit(x, 4); })},
      {"x0&x3", TruthTable::tabulate(m, 1, [&](std::uint64_t x) { return bit(x, 0) & bit(x, 3); })},
      {"x2|x5", TruthTable::tabulate(m, 1, [&](std::uint64_t x) { return bit(x, 2) | bit(x, 5); })},
  };
  const std::size_t runs = 200;
  std::ostringstream detail;
  bool pass = true;
  for (auto [eps, delta] : {std::pair{Q(1, 10), Q(1, 10)}, std::pair{Q(1, 20), Q(1, 20)}}) {
    double e = eps.to_double(), dl = delta.to_double();
    double allowed = dl + 3.0 * std::sqrt(dl * (1 - dl) / static_cast<double>(runs));
    for (const auto& [name, f] : targets) {
      std::size_t fails = 0;
      for (std::size_t r = 0; r < runs; ++r) {
        RandomStream coins = RandomStream(77).substream(name).substream(r);
        auto h = low_degree_learn(QueryOracle::from_table(f), m, 2, eps, delta, coins);
        if (uniform_error(h, f).to_double() > e) ++fails;
      }
      double fraction = static_cast<double>(fails) / static_cast<double>(runs);
      pass = pass && fraction <= allowed;
      detail << name << "@" << e << ":" << fails << "/" << runs << " ";
    }
    detail << "(allowed " << allowed << ") ";
  }
  return {pass, "failures per target and cell: " + detail.str()};
}

Outcome hash_family() {
  std::size_t checks = 0, bad = 0;
  for (std::size_t n = 1; n <= 4; ++n)
    for (std::size_t m = 1; m <= 4; ++m) {
      std::uint64_t members = std::uint64_t{1} << AffineHash::description_length(n, m);
      std::size_t points = std::size_t{1} << n;
      // counts[i][pair][cell]
      std::vector<std::vector<std::uint64_t>> counts(m + 1);
      for (std::size_t i = 0; i <= m; ++i) counts[i].assign(points * points << (2 * i), 0);
      std::vector<std::uint64_t> v(points);
      for (std::uint64_t idx = 0; idx < members; ++idx) {
        auto h = AffineHash::from_index(idx, n, m);
        for (std::size_t x = 0; x < points; ++x) v[x] = h(x);
        for (std::size_t a = 0; a < points; ++a)
          for (std::size_t b = 0; b < points; ++b) {
            if (a == b) continue;
            for (std::size_t i = 0; i <= m; ++i) {
              std::uint64_t va = v[a] >> (m - i), vb = v[b] >> (m - i);
              ++counts[i][((a * points + b) << (2 * i)) + (va << i) + vb];
            }
          }
      }
      for (std::size_t i = 0; i <= m; ++i) {
        std::uint64_t expected = members >> (2 * i);
        for (std::size_t a = 0; a < points; ++a)
          for (std::size_t b = 0; b < points; ++b) {
            if (a == b) continue;
            for (std::uint64_t cell = 0; cell < (std::uint64_t{1} << (2 * i)); ++cell) {
              ++checks;
              if (counts[i][((a * points + b) << (2 * i)) + cell] != expected) ++bad;
            }
          }
      }
    }
  return {bad == 0, std::to_string(checks) + " (n, m, i, x, x', a, b) probabilities over full families n, m <= 4; " +
                        std::to_string(bad) + " differ from 2^-2i"};
}

Outcome amplification_chain() {
  std::ostringstream detail;
  bool pass = true;

  // Part 1: weak oracle answering on a quarter of the 4-fold product's images.
  RandomStream rng(4242);
  const std::size_t t = 4;
  const double target_failure = 0.05;
  double min_success = 1.0, min_eta = 1.0, max_eta = 0.0;
  std::size_t repetitions = 0;
  for (int fi = 0; fi < 20; ++fi) {
    auto f = harness::random_function(4, 4, rng);
    auto g = direct_product(f, t);
    auto base = std::make_shared<const BruteForceOracle>(g);
    auto weak = std::make_shared<const RestrictedOracle>(base, Q(1, 4), splitmix64(static_cast<std::uint64_t>(fi)));
    auto strong = weak_to_strong(std::make_shared<TableFunction>(f), t, weak, target_failure);
    repetitions = strong->repetitions();
    // Measured weak success over uniform product inputs.
    std::uint64_t weak_hits = 0;
    for (std::uint64_t u = 0; u < g.rows(); ++u)
      if (weak->invert(BitString::from_uint(g.word(u), g.out_len()), *std::make_unique<CoinTape>(rng)).succeeded()) ++weak_hits;
    double eta = static_cast<double>(weak_hits) / static_cast<double>(g.rows());
    min_eta = std::min(min_eta, eta);
    max_eta = std::max(max_eta, eta);
    std::uint64_t ok = 0, total = 0;
    for (std::uint64_t x = 0; x < 16; ++x) {
      auto y = f(BitString::from_uint(x, 4));
      for (int trial = 0; trial < 200; ++trial) {
        CoinTape tape(rng);
        auto o = strong->invert(y, tape);
        ++total;
        if (o.succeeded() && f(o.preimage()) == y) ++ok;
      }
    }
    double success = static_cast<double>(ok) / static_cast<double>(total);
    min_success = std::min(min_success, success);
  }
  pass = pass && min_success >= 0.9;
  detail << "weak_to_strong on 20 f:{0,1}^4->{0,1}^4, t=4, R=" << repetitions << ", measured weak success in [" << min_eta << ", "
         << max_eta << "], min strong success " << min_success << " (>= 0.9); ";

  // Part 2: full chain with a perfect (canonical, coin-free) oracle on 2-to-1 functions.
  harness::ExperimentConfig config;
  config.chain_m = 6;
  config.chain_t = 2;
  config.chain_oracle = "canonical";
  const std::uint64_t trials = 100000;
  double worst = 0.0, worst_radius = 0.0, worst_random = 0.0;
  for (int fi = 0; fi < 5; ++fi) {
    RandomStream frng = RandomStream(9000).substream(static_cast<std::uint64_t>(fi));
    auto s = harness::random_two_to_one(4, frng);
    config.chain_schedule = "descending";
    auto chain = harness::build_chain(config, s);
    auto report = empirical_inversion_distance(s, *chain.distributional, trials, frng.substream("trials"));
    worst = std::max(worst, report.value);
    worst_radius = report.radius;
    config.chain_schedule = "random";
    auto random_chain = harness::build_chain(config, s);
    worst_random = std::max(worst_random, empirical_inversion_distance(s, *random_chain.distributional, 20000, frng.substream("random")).value);
  }
  pass = pass && worst <= 0.15;
  detail << "chain on 5 two-to-one f (m=6, t=2, canonical oracle, 1e5 trials): max TV " << worst << " (+/- " << worst_radius
         << " at 95%) <= 0.15 engineering bound; random-level schedule reaches " << worst_random;
  return {pass, detail.str()};
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(INVLEARN_CLI_PATH) + " " + args + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  auto dir = std::filesystem::temp_directory_path() / ("invlearn_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  struct Case {
    std::string name, args;
  };
  std::vector<Case> cases = {
      {"learn", "learn --set 'target=majority(3)' --set runs=20 --set gamma=2^-10 --set alpha=1/16"},
      {"learn-csv", "learn --set 'learner=low_degree(2)' --set 'distribution=identity(4)' --set inverter=identity "
                    "--set 'target=and(4)' --set runs=10 --format csv"},
      {"invert-suite", "invert-suite --set suite_k_max=5"},
      {"amplify", "amplify --set chain_m=5 --set chain_t=2 --set trials=20000 --set rung_trials=1000"},
  };
  std::size_t identical = 0;
  std::ostringstream detail;
  bool pass = true;
  for (const auto& c : cases) {
    auto a = dir / (c.name + ".a"), b = dir / (c.name + ".b");
    int ca = run_cli(c.args + " --seed 11 --out " + a.string());
    int cb = run_cli("" + c.args + " --seed 11 --out " + b.string());
    bool same = ca == 0 && cb == 0 && slurp(a) == slurp(b) && !slurp(a).empty();
    identical += same ? 1 : 0;
    pass = pass && same;
  }
  // Worker count must not change anything but the echoed `workers` key.
  harness::ExperimentConfig cfg;
  cfg.runs = 16;
  cfg.workers = 1;
  auto one = harness::run_learn(cfg).to_json();
  cfg.workers = 4;
  auto four = harness::run_learn(cfg).to_json();
  one["config"].erase("workers");
  four["config"].erase("workers");
  bool workers_same = one.dump() == four.dump();
  int broken = run_cli("invert-suite --set suite_inverter=broken_bit_inv --out " + (dir / "broken.json").string());
  int healthy = run_cli("invert-suite --out " + (dir / "healthy.json").string());
  std::filesystem::remove_all(dir);
  pass = pass && workers_same && broken == 3 && healthy == 0;
  detail << identical << "/" << cases.size() << " subcommand reruns byte-identical; 1 vs 4 workers "
         << (workers_same ? "identical" : "DIFFER") << "; broken-inverter suite exit " << broken << " (want 3), healthy exit "
         << healthy << " (want 0)";
  return {pass, detail.str()};
}

}  // namespace

int main() {
  criterion(1, "BitInv exact uniformity", bit_inv_exactness);
  criterion(2, "ProdInv FAIL bound", prod_inv_bound);
  criterion(3, "error decomposition", error_decomposition_grid);
  criterion(4, "end-to-end learning", end_to_end_learning);
  criterion(5, "low-degree learner contract", learner_contract);
  criterion(6, "hash family independence", hash_family);
  criterion(7, "amplification chain", amplification_chain);
  criterion(8, "reproducibility and exit gate", reproducibility);
  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
