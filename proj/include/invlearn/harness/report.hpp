#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "invlearn/harness/config.hpp"
#include "invlearn/rational.hpp"
#include "invlearn/stats.hpp"

namespace invlearn::harness {

using Json = nlohmann::ordered_json;

/// Exit status of a run, as the CLI reports it.
enum class Status { ok = 0, config_error = 2, violation = 3 };

inline Json number(double v) { return Json(v); }

inline Json exact(const Rational& r) { return Json{{"exact", true}, {"value", r.str()}, {"approx", number(r.to_double())}}; }

inline Json estimate(double value, double radius, std::uint64_t samples, double confidence) {
  return Json{{"exact", false}, {"value", number(value)}, {"radius", number(radius)}, {"samples", samples},
              {"confidence", number(confidence)}};
}

inline Json to_json(const DistanceReport& r) {
  if (r.exact) return exact(r.exact_value);
  return estimate(r.value, r.radius, r.samples, r.confidence);
}

/// One run's output: everything except wall time is a function of config and seed.
struct RunReport {
  std::string command;
  Json config = Json::object();
  std::vector<std::string> warnings;
  std::vector<std::string> violations;
  Json summary = Json::object();
  Json details = Json::object();
  double wall_seconds = 0.0;

  Status status() const { return violations.empty() ? Status::ok : Status::violation; }

  void warn(const std::string& w) { warnings.push_back(w); }
  void violate(const std::string& v) { violations.push_back(v); }

  Json to_json(bool include_timing = false) const {
    Json j;
    j["command"] = command;
    j["status"] = violations.empty() ? "ok" : "violation";
    j["config"] = config;
    j["warnings"] = warnings;
    j["violations"] = violations;
    j["summary"] = summary;
    j["details"] = details;
    if (include_timing) j["wall_seconds"] = number(wall_seconds);
    return j;
  }

  std::string json_text(bool include_timing = false) const { return to_json(include_timing).dump(2) + "\n"; }

  /// Flat `metric,value` rows for the summary block; nested keys join with '.'.
  std::string csv_text(bool include_timing = false) const {
    std::ostringstream out;
    out << "metric,value\n";
    out << "command," << command << "\n";
    out << "status," << (violations.empty() ? "ok" : "violation") << "\n";
    out << "warnings," << warnings.size() << "\n";
    out << "violations," << violations.size() << "\n";
    flatten(out, summary, "");
    if (include_timing) out << "wall_seconds," << number(wall_seconds).dump() << "\n";
    return out.str();
  }

 private:
  static void flatten(std::ostringstream& out, const Json& j, const std::string& prefix) {
    if (j.is_object()) {
      for (const auto& [k, v] : j.items()) flatten(out, v, prefix.empty() ? k : prefix + "." + k);
      return;
    }
    if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i) flatten(out, j[i], prefix + "." + std::to_string(i));
      return;
    }
    std::string cell = j.is_string() ? j.get<std::string>() : j.dump();
    if (cell.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : cell) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      cell = quoted + "\"";
    }
    out << prefix << "," << cell << "\n";
  }
};

inline Json config_json(const ExperimentConfig& config) {
  Json j = Json::object();
  for (const auto& [k, v] : config.to_entries()) j[k] = v;
  return j;
}

}  // namespace invlearn::harness
