// Command-line front end for the experiment harness.
//
//   invlearn_cli learn        --config run.cfg --seed 7 --out report.json
//   invlearn_cli invert-suite --set suite_k_max=6 --format csv
//   invlearn_cli amplify      --set sampler="two_to_one(4)" --rung strong
//
// Exit codes: 0 success, 2 configuration error, 3 bound violation.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "invlearn/harness.hpp"

namespace {

using invlearn::harness::ExperimentConfig;
using invlearn::harness::RunReport;
using invlearn::harness::Status;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string format = "json";
  std::vector<std::string> overrides;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Key-value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Seed (overrides the config)");
  cmd->add_option("--out", o.out_path, "Report path (default: stdout)");
  cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--set", o.overrides, "Config override key=value (repeatable)");
  cmd->add_flag("--timing", o.timing, "Include wall time in the report");
}

int execute(const std::string& command, const CommonOptions& o, const std::vector<std::string>& extra) {
  ExperimentConfig config;
  RunReport report;
  try {
    if (!o.config_path.empty()) config.load_file(o.config_path);
    for (const auto& kv : o.overrides) config.apply_override(kv);
    for (const auto& kv : extra) config.apply_override(kv);
    if (o.seed) config.seed = *o.seed;
    if (command == "learn") report = invlearn::harness::run_learn(config);
    else if (command == "invert-suite") report = invlearn::harness::run_inverter_suite(config);
    else report = invlearn::harness::run_amplification_demo(config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(Status::config_error);
  } catch (const std::length_error& e) {
    std::cerr << "size error: " << e.what() << "\n";
    return static_cast<int>(Status::config_error);
  }

  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  constexpr std::size_t kShown = 10;
  for (std::size_t i = 0; i < report.violations.size() && i < kShown; ++i)
    std::cerr << "violation: " << report.violations[i] << "\n";
  if (report.violations.size() > kShown)
    std::cerr << "... and " << report.violations.size() - kShown << " more violation(s) in the report\n";
  std::cerr << command << " finished in " << report.wall_seconds << " s\n";

  std::string body = o.format == "csv" ? report.csv_text(o.timing) : report.json_text(o.timing);
  if (o.out_path.empty()) {
    std::cout << body;
  } else {
    std::ofstream out(o.out_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write '" << o.out_path << "'\n";
      return static_cast<int>(Status::config_error);
    }
    out << body;
  }
  return static_cast<int>(report.status());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning over samplable distributions via distributional inversion"};
  app.require_subcommand(1);

  CommonOptions learn_opts, suite_opts, amplify_opts;
  auto* learn = app.add_subcommand("learn", "Learn a target over a distribution and measure the error");
  add_common(learn, learn_opts);
  auto* suite = app.add_subcommand("invert-suite", "Check BitInv and ProdInv exactly over a grid");
  add_common(suite, suite_opts);
  auto* amplify = app.add_subcommand("amplify", "Run the inverter amplification chain on a small sampler");
  add_common(amplify, amplify_opts);
  std::vector<std::string> rungs;
  amplify->add_option("--rung", rungs, "Rung(s) to run: parameters, weak, strong, distributional, baseline")
      ->check(CLI::IsMember({"parameters", "weak", "strong", "distributional", "baseline"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(Status::config_error);
  }

  if (learn->parsed()) return execute("learn", learn_opts, {});
  if (suite->parsed()) return execute("invert-suite", suite_opts, {});
  std::vector<std::string> extra;
  if (!rungs.empty()) {
    std::string joined;
    for (const auto& r : rungs) joined += (joined.empty() ? "" : ",") + r;
    extra.push_back("rungs=" + joined);
  }
  return execute("amplify", amplify_opts, extra);
}
