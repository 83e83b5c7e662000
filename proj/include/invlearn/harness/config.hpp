#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "invlearn/errors.hpp"
#include "invlearn/rational.hpp"

namespace invlearn::harness {

/// Configuration problem tied to one key.
class FieldError : public ConfigError {
 public:
  FieldError(const std::string& field, const std::string& message)
      : ConfigError(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

/// `name(arg1, arg2)` or bare `name`.
struct CallSpec {
  std::string name;
  std::vector<std::string> args;

  static CallSpec parse(const std::string& field, std::string_view text) {
    CallSpec spec;
    auto t = trim(text);
    auto open = t.find('(');
    if (open == std::string::npos) {
      spec.name = t;
    } else {
      if (t.back() != ')') throw FieldError(field, "unbalanced parentheses in '" + t + "'");
      spec.name = trim(t.substr(0, open));
      auto inner = t.substr(open + 1, t.size() - open - 2);
      std::stringstream ss(inner);
      std::string part;
      while (std::getline(ss, part, ',')) spec.args.push_back(trim(part));
      if (spec.args.size() == 1 && spec.args[0].empty()) spec.args.clear();
    }
    if (spec.name.empty()) throw FieldError(field, "empty specification");
    return spec;
  }

  std::string str() const {
    if (args.empty()) return name;
    std::string out = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) out += (i ? ", " : "") + args[i];
    return out + ")";
  }
};

inline std::uint64_t parse_u64(const std::string& field, std::string_view text) {
  auto t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw FieldError(field, "expected a non-negative integer, got '" + t + "'");
  return v;
}

inline bool parse_bool(const std::string& field, std::string_view text) {
  auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw FieldError(field, "expected true or false, got '" + t + "'");
}

inline Rational parse_rational(const std::string& field, std::string_view text) {
  try {
    return Rational::parse(trim(text));
  } catch (const std::exception& e) {
    throw FieldError(field, e.what());
  }
}

/// Rational strictly inside (0, 1).
inline Rational parse_probability(const std::string& field, std::string_view text) {
  auto r = parse_rational(field, text);
  if (r <= Rational(0) || r >= Rational(1)) throw FieldError(field, "must lie in (0,1), got " + r.str());
  return r;
}

/// Every knob of an experiment. Unset optional fields fall back to defaults
/// or formulas; `to_entries` echoes the resolved values.
struct ExperimentConfig {
  // Shared
  std::uint64_t seed = 1;
  std::uint64_t trials = 10000;
  std::size_t enumeration_cap = 24;
  std::size_t workers = 0;  // 0: environment or hardware
  bool allow_budget_override = false;

  // Learning
  std::string target = "and(3)";
  std::string distribution = "product(3/4, 3/4, 3/4)";
  std::string learner = "brute_force";
  std::string inverter = "prod_inv";
  Rational alpha{1, 8};
  Rational beta{1, 8};
  Rational gamma{1, 1024};
  std::uint64_t runs = 1;
  bool fail_label = false;

  // Inverter suite
  std::size_t suite_k_max = 4;
  std::vector<Rational> suite_gammas{Rational(1, 2), Rational(1, 4), Rational(1, 8)};
  std::string suite_inverter = "bit_inv";
  bool suite_product = true;

  // Amplification
  std::string sampler = "two_to_one(4)";
  std::size_t amplify_max_arity = 10;
  Rational chain_distance{1, 4};
  std::optional<std::size_t> chain_c, chain_m, chain_t, chain_repetitions;
  std::string chain_oracle = "brute_force";
  std::string chain_schedule = "descending";
  Rational chain_weak_fraction{1};
  std::uint64_t rung_trials = 2000;
  std::string rungs = "all";

  static const std::set<std::string>& keys() {
    static const std::set<std::string> k = {
        "seed", "trials", "enumeration_cap", "workers", "allow_budget_override", "target", "distribution", "learner",
        "inverter", "alpha", "beta", "gamma", "runs", "fail_label", "suite_k_max", "suite_gammas", "suite_inverter",
        "suite_product", "sampler", "amplify_max_arity", "chain_distance", "chain_c", "chain_m", "chain_t",
        "chain_repetitions", "chain_oracle", "chain_schedule", "chain_weak_fraction", "rung_trials", "rungs"};
    return k;
  }

  void set(const std::string& key, const std::string& raw) {
    auto value = trim(raw);
    auto optional_size = [&](std::optional<std::size_t>& slot) {
      if (value == "auto" || value.empty()) slot.reset();
      else slot = static_cast<std::size_t>(parse_u64(key, value));
    };
    if (key == "seed") seed = parse_u64(key, value);
    else if (key == "trials") trials = parse_u64(key, value);
    else if (key == "enumeration_cap") enumeration_cap = static_cast<std::size_t>(parse_u64(key, value));
    else if (key == "workers") workers = static_cast<std::size_t>(parse_u64(key, value));
    else if (key == "allow_budget_override") allow_budget_override = parse_bool(key, value);
    else if (key == "target") target = CallSpec::parse(key, value).str();
    else if (key == "distribution") distribution = CallSpec::parse(key, value).str();
    else if (key == "learner") learner = CallSpec::parse(key, value).str();
    else if (key == "inverter") inverter = CallSpec::parse(key, value).str();
    else if (key == "alpha") alpha = parse_probability(key, value);
    else if (key == "beta") beta = parse_probability(key, value);
    else if (key == "gamma") gamma = parse_probability(key, value);
    else if (key == "runs") runs = parse_u64(key, value);
    else if (key == "fail_label") fail_label = parse_bool(key, value);
    else if (key == "suite_k_max") suite_k_max = static_cast<std::size_t>(parse_u64(key, value));
    else if (key == "suite_gammas") {
      suite_gammas.clear();
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, ','))
        if (!trim(part).empty()) suite_gammas.push_back(parse_probability(key, part));
    } else if (key == "suite_inverter") suite_inverter = value;
    else if (key == "suite_product") suite_product = parse_bool(key, value);
    else if (key == "sampler") sampler = CallSpec::parse(key, value).str();
    else if (key == "amplify_max_arity") amplify_max_arity = static_cast<std::size_t>(parse_u64(key, value));
    else if (key == "chain_distance") chain_distance = parse_probability(key, value);
    else if (key == "chain_c") optional_size(chain_c);
    else if (key == "chain_m") optional_size(chain_m);
    else if (key == "chain_t") optional_size(chain_t);
    else if (key == "chain_repetitions") optional_size(chain_repetitions);
    else if (key == "chain_oracle") chain_oracle = value;
    else if (key == "chain_schedule") chain_schedule = value;
    else if (key == "chain_weak_fraction") {
      chain_weak_fraction = parse_rational(key, value);
      if (chain_weak_fraction <= Rational(0) || chain_weak_fraction > Rational(1))
        throw FieldError(key, "must lie in (0,1]");
    } else if (key == "rung_trials") rung_trials = parse_u64(key, value);
    else if (key == "rungs") rungs = value;
    else throw FieldError(key, "unknown key");
  }

  /// `key = value` lines; `#` starts a comment.
  void load_text(std::string_view text) {
    std::stringstream ss{std::string(text)};
    std::string line;
    std::size_t number = 0;
    while (std::getline(ss, line)) {
      ++number;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (trim(line).empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    load_text(buffer.str());
  }

  /// `key=value` from the command line.
  void apply_override(std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' needs key=value");
    set(trim(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
  }

  /// Resolved values, in key order.
  std::map<std::string, std::string> to_entries() const {
    auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("auto"); };
    std::string gammas;
    for (std::size_t i = 0; i < suite_gammas.size(); ++i) gammas += (i ? ", " : "") + suite_gammas[i].str();
    return {
        {"seed", std::to_string(seed)},
        {"trials", std::to_string(trials)},
        {"enumeration_cap", std::to_string(enumeration_cap)},
        {"workers", std::to_string(workers)},
        {"allow_budget_override", allow_budget_override ? "true" : "false"},
        {"target", target},
        {"distribution", distribution},
        {"learner", learner},
        {"inverter", inverter},
        {"alpha", alpha.str()},
        {"beta", beta.str()},
        {"gamma", gamma.str()},
        {"runs", std::to_string(runs)},
        {"fail_label", fail_label ? "true" : "false"},
        {"suite_k_max", std::to_string(suite_k_max)},
        {"suite_gammas", gammas},
        {"suite_inverter", suite_inverter},
        {"suite_product", suite_product ? "true" : "false"},
        {"sampler", sampler},
        {"amplify_max_arity", std::to_string(amplify_max_arity)},
        {"chain_distance", chain_distance.str()},
        {"chain_c", opt(chain_c)},
        {"chain_m", opt(chain_m)},
        {"chain_t", opt(chain_t)},
        {"chain_repetitions", opt(chain_repetitions)},
        {"chain_oracle", chain_oracle},
        {"chain_schedule", chain_schedule},
        {"chain_weak_fraction", chain_weak_fraction.str()},
        {"rung_trials", std::to_string(rung_trials)},
        {"rungs", rungs},
    };
  }
};

}  // namespace invlearn::harness
