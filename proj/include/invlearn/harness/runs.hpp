#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "invlearn/amplification.hpp"
#include "invlearn/harness/config.hpp"
#include "invlearn/harness/report.hpp"
#include "invlearn/learners.hpp"
#include "invlearn/reduction.hpp"
#include "invlearn/stats.hpp"

namespace invlearn::harness {

inline constexpr const char* kWorkersEnv = "INVLEARN_WORKERS";

/// Configured count, else $INVLEARN_WORKERS, else the hardware thread count.
inline std::size_t resolve_workers(std::size_t configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv(kWorkersEnv)) {
    try {
      auto v = parse_u64(kWorkersEnv, env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const ConfigError&) {
    }
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, count) on a pool of threads. Callers write
/// results into slot i, so the merge order never depends on scheduling.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::string read_file(const std::string& field, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FieldError(field, "cannot read '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::size_t arg_size(const std::string& field, const CallSpec& spec, std::size_t i) {
  if (i >= spec.args.size()) throw FieldError(field, spec.name + " needs at least " + std::to_string(i + 1) + " argument(s)");
  return static_cast<std::size_t>(parse_u64(field, spec.args[i]));
}

// ---------------------------------------------------------------------------
// Builders

/// Random map with every image hit exactly twice (n >= 1).
inline TruthTable random_two_to_one(std::size_t n, RandomStream& rng, std::size_t cap = kDefaultTableCap) {
  if (n > cap) throw SizeError("arity " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
  std::vector<std::uint64_t> xs(std::size_t{1} << n), ys(std::size_t{1} << n);
  std::iota(xs.begin(), xs.end(), 0);
  std::iota(ys.begin(), ys.end(), 0);
  for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[rng.below(i)]);
  for (std::size_t i = ys.size(); i > 1; --i) std::swap(ys[i - 1], ys[rng.below(i)]);
  TruthTable f(n, n, cap);
  for (std::size_t i = 0; i < xs.size(); ++i) f.set_word(xs[i], ys[i / 2]);
  return f;
}

inline TruthTable random_function(std::size_t n, std::size_t out_len, RandomStream& rng, std::size_t cap = kDefaultTableCap) {
  return TruthTable::tabulate(n, out_len, [&](std::uint64_t) { return out_len == 64 ? rng.next() : rng.next() >> (64 - out_len); }, cap);
}

/// Boolean target: and(n), or(n), parity(n), majority(n), constant(n, b), dictator(n, i), table(path).
inline TruthTable build_target(const std::string& text, std::size_t cap) {
  const std::string field = "target";
  auto spec = CallSpec::parse(field, text);
  if (spec.name == "table") {
    if (spec.args.size() != 1) throw FieldError(field, "table(path) takes one path");
    auto t = TruthTable::from_hex(read_file(field, spec.args[0]), cap);
    if (t.out_len() != 1) throw FieldError(field, "target table must have one output bit");
    return t;
  }
  std::size_t n = arg_size(field, spec, 0);
  if (n > cap) throw SizeError("target arity " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
  if (spec.name == "and") return tables::conjunction(n);
  if (spec.name == "or") return tables::disjunction(n);
  if (spec.name == "parity") return tables::parity(n);
  if (spec.name == "majority") return tables::majority(n);
  if (spec.name == "constant") return tables::constant(n, spec.args.size() > 1 && parse_bool(field, spec.args[1]));
  if (spec.name == "dictator") {
    std::size_t i = arg_size(field, spec, 1);
    if (i >= n) throw FieldError(field, "dictator index out of range");
    return TruthTable::tabulate(n, 1, [&](std::uint64_t x) { return (x >> (n - 1 - i)) & 1U; }, cap);
  }
  throw FieldError(field, "unknown target '" + spec.name + "'");
}

struct SamplerBuild {
  Sampler sampler;
  std::optional<ProductDistribution> product;
  bool identity = false;
};

/// product(p1, ..., pn), product_file(path), identity(n), sampler(path).
inline SamplerBuild build_distribution(const std::string& text, std::size_t cap) {
  const std::string field = "distribution";
  auto spec = CallSpec::parse(field, text);
  try {
    if (spec.name == "product") {
      std::vector<DyadicProb> biases;
      for (const auto& a : spec.args) biases.push_back(DyadicProb::parse(a));
      ProductDistribution d(biases);
      return {Sampler::product(d), d, false};
    }
    if (spec.name == "product_file") {
      if (spec.args.size() != 1) throw FieldError(field, "product_file(path) takes one path");
      auto d = ProductDistribution::parse(read_file(field, spec.args[0]));
      return {Sampler::product(d), d, false};
    }
    if (spec.name == "identity") return {Sampler::identity(arg_size(field, spec, 0)), std::nullopt, true};
    if (spec.name == "sampler") {
      if (spec.args.size() != 1) throw FieldError(field, "sampler(path) takes one path");
      return {Sampler::from_table(TruthTable::from_hex(read_file(field, spec.args[0]), cap)), std::nullopt, false};
    }
  } catch (const FieldError&) {
    throw;
  } catch (const ConfigError& e) {
    throw FieldError(field, e.what());
  }
  throw FieldError(field, "unknown distribution '" + spec.name + "'");
}

inline std::unique_ptr<UniformLearner> build_learner(const std::string& text, std::size_t cap) {
  auto spec = CallSpec::parse("learner", text);
  if (spec.name == "brute_force") return std::make_unique<BruteForceLearner>(cap);
  if (spec.name == "low_degree") return std::make_unique<LowDegreeLearner>(arg_size("learner", spec, 0));
  throw FieldError("learner", "unknown learner '" + spec.name + "'");
}

inline LevelSchedule parse_schedule(const std::string& text) {
  if (text == "descending") return LevelSchedule::descending;
  if (text == "random") return LevelSchedule::random;
  throw FieldError("chain_schedule", "expected descending or random, got '" + text + "'");
}

/// Oracle for the product of the truncating hash, per chain_oracle and chain_weak_fraction.
inline ProductOracleFactory build_product_oracle(const ExperimentConfig& config) {
  ProductOracleFactory base;
  if (config.chain_oracle == "brute_force") base = brute_force_product_oracle(PreimageChoice::uniform);
  else if (config.chain_oracle == "canonical") base = brute_force_product_oracle(PreimageChoice::canonical);
  else if (config.chain_oracle == "always_fail") base = failing_product_oracle();
  else throw FieldError("chain_oracle", "expected brute_force, canonical or always_fail, got '" + config.chain_oracle + "'");
  if (config.chain_weak_fraction == Rational(1)) return base;
  double fraction = config.chain_weak_fraction.to_double();
  std::uint64_t key = splitmix64(config.seed ^ 0x5eedULL);
  return [base, fraction, key](const std::shared_ptr<const TruncatingHashFunction>& h,
                               const std::shared_ptr<const DirectProductFunction>& g) -> OraclePtr {
    return std::make_shared<const KeyedRestrictionOracle>(base(h, g), fraction, key);
  };
}

inline ChainInverter build_chain(const ExperimentConfig& config, const TruthTable& sampler) {
  ChainParams params;
  params.c = config.chain_c;
  params.m = config.chain_m;
  params.t = config.chain_t;
  params.repetitions = config.chain_repetitions;
  params.schedule = parse_schedule(config.chain_schedule);
  return chain_distributional_inverter(sampler, config.chain_distance, build_product_oracle(config), params);
}

// ---------------------------------------------------------------------------
// learn

inline RunReport run_learn(const ExperimentConfig& config) {
  auto started = std::chrono::steady_clock::now();
  RunReport report;
  report.command = "learn";
  report.config = config_json(config);
  const std::size_t cap = config.enumeration_cap;

  auto f = build_target(config.target, cap);
  auto dist = build_distribution(config.distribution, cap);
  const Sampler& s = dist.sampler;
  if (f.arity() != s.output_length())
    throw FieldError("target", "arity " + std::to_string(f.arity()) + " does not match the distribution's dimension " +
                                   std::to_string(s.output_length()));
  auto learner = build_learner(config.learner, cap);
  if (config.runs == 0) throw FieldError("runs", "need at least one run");

  const std::size_t n = s.output_length();
  ReductionOptions options;
  options.fail_label = config.fail_label;
  options.enforce_budget = !config.allow_budget_override;

  auto inv_spec = CallSpec::parse("inverter", config.inverter);
  InverterPtr inverter;
  std::optional<bool> union_applicable;
  if (inv_spec.name == "prod_inv") {
    if (!dist.product) throw FieldError("inverter", "prod_inv needs a product distribution");
    auto scaled = config.gamma * Rational(static_cast<std::int64_t>(n));
    auto quarter = config.alpha / Rational(4);
    if (scaled > quarter) {
      std::string msg = "gamma*n = " + scaled.str() + " exceeds alpha/4 = " + quarter.str();
      if (!config.allow_budget_override) throw FieldError("gamma", msg + " (set allow_budget_override = true to run anyway)");
      report.warn(msg + "; budget rule overridden");
    }
    union_applicable = config.gamma * Rational(static_cast<std::int64_t>(n)) < Rational(1);
    if (!*union_applicable) report.warn("gamma >= 1/n: the FAIL bound gamma*n is vacuous and flagged inapplicable");
    inverter = std::make_shared<const ProductInverter>(*dist.product, config.gamma);
  } else if (inv_spec.name == "identity") {
    if (!dist.identity) throw FieldError("inverter", "identity inverter needs the identity distribution");
    inverter = std::make_shared<const IdentityInverter>(n);
  } else if (inv_spec.name == "uniform_preimage") {
    inverter = std::make_shared<const UniformPreimageInverter>(s.table(cap));
  } else if (inv_spec.name == "chained") {
    auto chain = build_chain(config, s.table(cap));
    inverter = chain.distributional;
    options.enforce_budget = false;
    report.warn("chained inverter declares no exact bounds; its distance is measured, not budgeted");
  } else {
    throw FieldError("inverter", "unknown inverter '" + inv_spec.name + "'");
  }

  // Quantities that depend on the sampler and inverter only.
  std::optional<Rational> fail_mass, joint_distance;
  try {
    auto mu = exact_output_distribution(s, cap);
    Rational mass(0);
    for (const auto& [y, my] : mu) mass += my * inverter->exact_outcomes(y, cap).fail;
    fail_mass = mass;
    joint_distance = statistical_distance(sampler_joint_distribution(s, cap), joint_preimage_distribution(s, *inverter, cap));
  } catch (const SizeError& e) {
    report.warn(std::string("exact inverter measurement skipped: ") + e.what());
  }

  struct RunResult {
    std::optional<Rational> mu_error;
    double mu_estimate = 0.0, mu_radius = 0.0;
    Rational uniform_error;
    std::uint64_t target_queries = 0, composed_queries = 0;
  };
  std::vector<RunResult> results(config.runs);
  RandomStream root(config.seed);
  auto learner_root = root.substream("learner");
  auto inverter_root = root.substream("inverter");
  auto trials_root = root.substream("trials");

  parallel_for(config.runs, resolve_workers(config.workers), [&](std::size_t r) {
    auto coins = learner_root.substream(r);
    auto out = learn_over_mu(QueryOracle::from_table(f), s, inverter, *learner, config.alpha, config.beta, coins, options);
    RunResult res;
    res.uniform_error = exact_uniform_error(out.hypothesis.uniform_hypothesis(), f, s, cap);
    res.target_queries = out.target_queries;
    res.composed_queries = out.composed_queries;
    if (joint_distance) {
      res.mu_error = exact_mu_error(out.hypothesis, f, s, cap);
    } else {
      auto inputs = trials_root.substream(r);
      auto z = inverter_root.substream(r);
      std::uint64_t wrong = 0;
      for (std::uint64_t t = 0; t < config.trials; ++t) {
        auto y = s(inputs.bits(s.coin_length()));
        if (out.hypothesis.evaluate(y, z) != f.bit(y.to_uint())) ++wrong;
      }
      res.mu_estimate = static_cast<double>(wrong) / static_cast<double>(config.trials);
      res.mu_radius = std::sqrt(std::log(2.0 / 0.05) / (2.0 * static_cast<double>(config.trials)));
    }
    results[r] = std::move(res);
  });

  Json runs = Json::array();
  std::uint64_t failures = 0, decomposition_failures = 0, queries = 0;
  double worst = 0.0;
  std::optional<Rational> worst_exact;
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& res = results[r];
    Json entry;
    entry["run"] = r;
    entry["uniform_error"] = exact(res.uniform_error);
    double mu = res.mu_error ? res.mu_error->to_double() : res.mu_estimate;
    if (res.mu_error) {
      entry["mu_error"] = exact(*res.mu_error);
      if (*res.mu_error > config.alpha) ++failures;
      bool holds = abs(*res.mu_error - res.uniform_error) <= *joint_distance;
      entry["decomposition_holds"] = holds;
      if (!holds) ++decomposition_failures;
      if (!worst_exact || *res.mu_error > *worst_exact) worst_exact = *res.mu_error;
    } else {
      entry["mu_error"] = estimate(res.mu_estimate, res.mu_radius, config.trials, 0.95);
      if (res.mu_estimate > config.alpha.to_double()) ++failures;
    }
    worst = std::max(worst, mu);
    entry["target_queries"] = res.target_queries;
    entry["composed_queries"] = res.composed_queries;
    queries += res.target_queries;
    runs.push_back(entry);
  }

  double beta = config.beta.to_double();
  double allowed = beta + 3.0 * std::sqrt(beta * (1.0 - beta) / static_cast<double>(config.runs));
  double fraction = static_cast<double>(failures) / static_cast<double>(config.runs);

  auto& sum = report.summary;
  sum["runs"] = config.runs;
  sum["learner"] = learner->name();
  sum["inverter"] = inverter->name();
  sum["learner_error_target"] = exact(config.alpha * options.learner_share);
  sum["max_mu_error"] = worst_exact ? exact(*worst_exact) : Json(number(worst));
  sum["failures"] = failures;
  sum["failure_fraction"] = number(fraction);
  sum["allowed_failure_fraction"] = number(allowed);
  sum["decomposition_failures"] = decomposition_failures;
  sum["declared_fail_bound"] = exact(inverter->declared_fail_bound());
  sum["declared_distance_bound"] = exact(inverter->declared_distance_bound());
  if (fail_mass) sum["inverter_fail_mass"] = exact(*fail_mass);
  if (joint_distance) sum["joint_distance"] = exact(*joint_distance);
  if (union_applicable) {
    sum["union_fail_bound"] = exact(config.gamma * Rational(static_cast<std::int64_t>(n)));
    sum["union_bound_applicable"] = *union_applicable;
    if (*union_applicable && fail_mass && *fail_mass > config.gamma * Rational(static_cast<std::int64_t>(n)))
      report.violate("inverter FAIL mass exceeds gamma*n");
  }
  sum["target_queries"] = queries;
  report.details["runs"] = runs;

  if (decomposition_failures > 0) report.violate(std::to_string(decomposition_failures) + " run(s) break the error decomposition");
  if (fraction > allowed) report.violate("failure fraction " + std::to_string(fraction) + " exceeds beta + 3 sigma");
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// ---------------------------------------------------------------------------
// invert-suite

/// Rejection inverter with a planted bias: an accepted draw of the top
/// window value is answered with the bottom one, so that preimage comes up
/// twice as often. Fixture for the suite's violation gate.
inline OutcomeDistribution broken_bit_inv_outcomes(const DyadicProb& p, bool b, const Rational& gamma) {
  auto law = bit_inv_outcomes(p, b, gamma);
  if (law.success.size() < 2) return law;
  auto top = std::prev(law.success.end());
  auto mass = top->second;
  law.success.erase(top);
  law.success.begin()->second += mass;
  return law;
}

inline RunReport run_inverter_suite(const ExperimentConfig& config) {
  auto started = std::chrono::steady_clock::now();
  RunReport report;
  report.command = "invert-suite";
  report.config = config_json(config);
  if (config.suite_inverter != "bit_inv" && config.suite_inverter != "broken_bit_inv")
    throw FieldError("suite_inverter", "expected bit_inv or broken_bit_inv, got '" + config.suite_inverter + "'");
  if (config.suite_k_max > 16) throw FieldError("suite_k_max", "precision above 16");
  const bool broken = config.suite_inverter == "broken_bit_inv";

  struct Cell {
    unsigned k;
    std::uint64_t s;
    bool b;
    Rational gamma;
  };
  std::vector<Cell> cells;
  for (unsigned k = 1; k <= config.suite_k_max; ++k)
    for (std::uint64_t s = 1; s < (std::uint64_t{1} << k); ++s)
      for (bool b : {false, true})
        for (const auto& g : config.suite_gammas) cells.push_back({k, s, b, g});

  std::vector<Json> entries(cells.size());
  std::vector<std::string> problems(cells.size());
  parallel_for(cells.size(), resolve_workers(config.workers), [&](std::size_t i) {
    const auto& c = cells[i];
    DyadicProb p(c.s, c.k);
    std::size_t len = bit_inv_coin_length(p, c.b, c.gamma);
    if (len > config.enumeration_cap) {
      problems[i] = "skip";
      return;
    }
    auto law = broken ? broken_bit_inv_outcomes(p, c.b, c.gamma) : bit_inv_outcomes(p, c.b, c.gamma);
    std::uint64_t preimages = 0;
    bool exact_support = true;
    for (std::uint64_t r = 0; r < (std::uint64_t{1} << c.k); ++r) {
      auto coins = BitString::from_uint(r, c.k);
      bool in = samp(p, coins) == c.b;
      preimages += in ? 1 : 0;
      if (in != (law.success.count(coins) > 0)) exact_support = false;
    }
    Rational ok = law.success_mass();
    bool uniform = exact_support;
    for (const auto& [x, m] : law.success) uniform = uniform && m * Rational(static_cast<std::int64_t>(preimages)) == ok;
    std::uint64_t target = c.b ? c.s : (std::uint64_t{1} << c.k) - c.s;
    std::uint64_t window = std::uint64_t{1} << window_width(p, c.b);
    Rational per_round(Rational::Int(window - target), Rational::Int(window));
    Rational predicted(1);
    for (unsigned r = 0; r < rounds_for(c.gamma); ++r) predicted *= per_round;
    bool within = law.fail <= c.gamma;
    Json e;
    e["p"] = p.str();
    e["b"] = c.b ? 1 : 0;
    e["gamma"] = c.gamma.str();
    e["preimages"] = preimages;
    e["fail"] = exact(law.fail);
    e["fail_matches_rounds"] = law.fail == predicted;
    e["uniform"] = uniform;
    e["fail_within_gamma"] = within;
    entries[i] = e;
    if (!uniform) problems[i] = "BitInv(" + p.str() + ", b=" + std::to_string(c.b) + ", gamma=" + c.gamma.str() + ") is not uniform";
    else if (!within) problems[i] = "BitInv(" + p.str() + ") FAIL mass exceeds gamma";
    else if (law.fail != predicted) problems[i] = "BitInv(" + p.str() + ") FAIL mass differs from the per-round formula";
  });

  Json grid = Json::array();
  std::uint64_t skipped = 0, uniform_count = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (problems[i] == "skip") {
      ++skipped;
      continue;
    }
    grid.push_back(entries[i]);
    if (entries[i]["uniform"].get<bool>()) ++uniform_count;
    if (!problems[i].empty()) report.violate(problems[i]);
  }
  if (skipped > 0) report.warn(std::to_string(skipped) + " grid cell(s) skipped: coin space above enumeration_cap");
  report.details["bit_inv"] = grid;
  report.summary["bit_inv_cells"] = grid.size();
  report.summary["bit_inv_uniform"] = uniform_count;

  // ProdInv on the configured product distribution.
  if (config.suite_product) {
    auto dist = build_distribution(config.distribution, config.enumeration_cap);
    if (dist.product) {
      const auto& d = *dist.product;
      const std::size_t n = d.dimension();
      Json prod = Json::array();
      for (const auto& g : config.suite_gammas) {
        ProductInverter inv(d, g);
        bool applicable = g * Rational(static_cast<std::int64_t>(n)) < Rational(1);
        Rational worst(0);
        bool product_rule = true, uniform = true;
        for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
          auto y = BitString::from_uint(x, n);
          auto law = inv.exact_outcomes(y, config.enumeration_cap);
          Rational keep(1);
          for (std::size_t i = 0; i < n; ++i) keep *= Rational(1) - bit_inv_outcomes(d[i], y[i], g, config.enumeration_cap).fail;
          product_rule = product_rule && law.fail == Rational(1) - keep;
          if (law.fail > worst) worst = law.fail;
          Rational first = law.success.empty() ? Rational(0) : law.success.begin()->second;
          for (const auto& [r, m] : law.success) uniform = uniform && m == first && prod_samp(d, r) == y;
        }
        Json e;
        e["gamma"] = g.str();
        e["max_fail"] = exact(worst);
        e["union_bound"] = exact(g * Rational(static_cast<std::int64_t>(n)));
        e["union_bound_applicable"] = applicable;
        e["fail_equals_product_rule"] = product_rule;
        e["uniform"] = uniform;
        prod.push_back(e);
        if (!uniform) report.violate("ProdInv gamma=" + g.str() + " is not uniform on some preimage");
        if (!product_rule) report.violate("ProdInv gamma=" + g.str() + " FAIL mass differs from 1 - prod(1 - f_i)");
        if (applicable && worst > g * Rational(static_cast<std::int64_t>(n)))
          report.violate("ProdInv gamma=" + g.str() + " FAIL mass exceeds gamma*n");
      }
      report.details["prod_inv"] = prod;
      report.details["prod_inv_distribution"] = d.str();
      report.summary["prod_inv_cells"] = prod.size();
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// ---------------------------------------------------------------------------
// amplify

/// two_to_one(n), random(n, l), identity(n), product(p1, ...), table(path).
inline TruthTable build_amplify_sampler(const ExperimentConfig& config, RandomStream rng) {
  const std::string field = "sampler";
  auto spec = CallSpec::parse(field, config.sampler);
  auto check = [&](std::size_t n) {
    if (n > config.amplify_max_arity)
      throw SizeError("sampler arity " + std::to_string(n) + " exceeds amplify_max_arity " +
                      std::to_string(config.amplify_max_arity));
    return n;
  };
  if (spec.name == "two_to_one") return random_two_to_one(check(arg_size(field, spec, 0)), rng);
  if (spec.name == "random") {
    std::size_t n = check(arg_size(field, spec, 0));
    return random_function(n, spec.args.size() > 1 ? arg_size(field, spec, 1) : n, rng);
  }
  if (spec.name == "identity") return tables::identity(check(arg_size(field, spec, 0)));
  if (spec.name == "product") {
    std::vector<DyadicProb> biases;
    for (const auto& a : spec.args) biases.push_back(DyadicProb::parse(a));
    ProductDistribution d(biases);
    check(d.coin_length());
    return Sampler::product(d).table(config.amplify_max_arity);
  }
  if (spec.name == "table") {
    if (spec.args.size() != 1) throw FieldError(field, "table(path) takes one path");
    auto t = TruthTable::from_hex(read_file(field, spec.args[0]));
    check(t.arity());
    return t;
  }
  throw FieldError(field, "unknown sampler '" + spec.name + "'");
}

inline constexpr std::uint64_t kTrialBlock = 1000;

/// Success rate of `oracle` on images of `fn` at uniform inputs.
inline Json measure_inversion_rate(const BitFunction& fn, const InverterOracle& oracle, std::uint64_t trials,
                                   const RandomStream& coins, std::size_t workers) {
  std::uint64_t blocks = (trials + kTrialBlock - 1) / kTrialBlock;
  std::vector<std::uint64_t> hits(blocks, 0);
  parallel_for(blocks, workers, [&](std::size_t b) {
    auto stream = coins.substream(b);
    std::uint64_t count = std::min(kTrialBlock, trials - b * kTrialBlock);
    for (std::uint64_t t = 0; t < count; ++t) {
      auto y = fn(stream.bits(fn.input_length()));
      CoinTape tape(stream);
      auto o = oracle.invert(y, tape);
      if (o.succeeded() && fn(o.preimage()) == y) ++hits[b];
    }
  });
  std::uint64_t total = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
  double rate = trials ? static_cast<double>(total) / static_cast<double>(trials) : 0.0;
  double radius = trials ? std::sqrt(std::log(2.0 / 0.05) / (2.0 * static_cast<double>(trials))) : 1.0;
  return estimate(rate, radius, trials, 0.95);
}

/// Distance of a distributional inverter from uniform-preimage answers, in parallel blocks.
inline Json measure_inversion_distance(const TruthTable& sampler, const DistributionalInverter& inv, std::uint64_t trials,
                                       const RandomStream& coins, std::size_t workers, double* value_out = nullptr) {
  if (trials == 0) throw FieldError("trials", "need at least one trial");
  std::uint64_t blocks = (trials + kTrialBlock - 1) / kTrialBlock;
  std::vector<std::map<BitString, std::uint64_t>> parts(blocks);
  auto s = Sampler::from_table(sampler);
  parallel_for(blocks, workers, [&](std::size_t b) {
    std::uint64_t count = std::min(kTrialBlock, trials - b * kTrialBlock);
    parts[b] = sample_joint_preimages(s, inv, count, coins.substream(b));
  });
  std::map<BitString, std::uint64_t> histogram;
  for (const auto& part : parts)
    for (const auto& [cell, c] : part) histogram[cell] += c;
  std::uint64_t fails = 0;
  for (const auto& [cell, c] : histogram)
    if (cell.size() == sampler.arity() + 1 + sampler.out_len()) fails += c;
  auto report = inversion_distance_from_histogram(sampler, histogram, trials);
  if (value_out) *value_out = report.value;
  Json j;
  j["distance"] = to_json(report);
  j["fail_rate"] = number(static_cast<double>(fails) / static_cast<double>(trials));
  return j;
}

inline bool rung_selected(const std::string& rungs, const std::string& name) {
  if (rungs == "all") return true;
  std::stringstream ss(rungs);
  std::string part;
  while (std::getline(ss, part, ','))
    if (trim(part) == name) return true;
  return false;
}

inline RunReport run_amplification_demo(const ExperimentConfig& config) {
  auto started = std::chrono::steady_clock::now();
  RunReport report;
  report.command = "amplify";
  report.config = config_json(config);
  {
    std::stringstream ss(config.rungs);
    std::string part;
    while (std::getline(ss, part, ',')) {
      auto r = trim(part);
      if (r != "all" && r != "parameters" && r != "weak" && r != "strong" && r != "distributional" && r != "baseline")
        throw FieldError("rungs", "unknown rung '" + r + "'");
    }
  }
  const std::size_t workers = resolve_workers(config.workers);
  RandomStream root(config.seed);
  auto sampler = build_amplify_sampler(config, root.substream("sampler"));
  auto chain = build_chain(config, sampler);

  Json rungs = Json::object();
  {
    Json p;
    p["sampler_arity"] = sampler.arity();
    p["sampler_output"] = sampler.out_len();
    p["image_size"] = PreimageIndex(sampler).image_size();
    p["c"] = chain.c;
    p["m"] = chain.m;
    p["m_from_formula"] = chain.m_from_formula;
    p["m_formula"] = truncating_hash_length(sampler.arity(), chain.c);
    p["t"] = chain.t;
    p["t_from_formula"] = chain.t_from_formula;
    p["t_formula"] = direct_product_length(sampler.arity(), chain.c);
    p["repetitions"] = chain.repetitions;
    p["hash_input_length"] = chain.hash->input_length();
    p["hash_output_length"] = chain.hash->output_length();
    p["weak_oracle"] = chain.weak->name();
    p["declared_weak_success"] = number(chain.weak->declared_success());
    p["target_distance"] = exact(config.chain_distance);
    rungs["parameters"] = p;
    if (!chain.m_from_formula || !chain.t_from_formula)
      report.warn("desk-scale chain parameters: m = " + std::to_string(chain.m) + ", t = " + std::to_string(chain.t) +
                  " override the formulas");
  }
  if (rung_selected(config.rungs, "weak"))
    rungs["weak"] = Json{{"success", measure_inversion_rate(*chain.product, *chain.weak, config.rung_trials,
                                                            root.substream("weak"), workers)}};
  if (rung_selected(config.rungs, "strong"))
    rungs["strong"] = Json{{"success", measure_inversion_rate(*chain.hash, *chain.strong, config.rung_trials,
                                                              root.substream("strong"), workers)}};
  double distance = 0.0;
  if (rung_selected(config.rungs, "distributional")) {
    rungs["distributional"] =
        measure_inversion_distance(sampler, *chain.distributional, config.trials, root.substream("trials"), workers, &distance);
    rungs["distributional"]["schedule"] = config.chain_schedule;
  }
  if (rung_selected(config.rungs, "baseline")) {
    // Exhaustive search on S itself, no hashing: uniform and lowest preimage.
    std::uint64_t n = std::min<std::uint64_t>(config.trials, 20000);
    UniformPreimageInverter uniform(sampler);
    OracleInverter canonical(std::make_shared<const BruteForceOracle>(sampler, PreimageChoice::canonical));
    rungs["baseline"] = Json{
        {"uniform_preimage", measure_inversion_distance(sampler, uniform, n, root.substream("baseline"), workers)},
        {"canonical_preimage", measure_inversion_distance(sampler, canonical, n, root.substream("baseline"), workers)}};
  }
  report.details["rungs"] = rungs;
  report.summary["m"] = chain.m;
  report.summary["t"] = chain.t;
  report.summary["repetitions"] = chain.repetitions;
  if (rungs.contains("weak")) report.summary["weak_success"] = rungs["weak"]["success"]["value"];
  if (rungs.contains("strong")) report.summary["strong_success"] = rungs["strong"]["success"]["value"];
  if (rungs.contains("distributional")) {
    report.summary["distance"] = rungs["distributional"]["distance"]["value"];
    report.summary["distance_radius"] = rungs["distributional"]["distance"]["radius"];
    report.summary["fail_rate"] = rungs["distributional"]["fail_rate"];
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace invlearn::harness
