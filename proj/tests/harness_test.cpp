#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "invlearn/harness.hpp"

using namespace invlearn;
using namespace invlearn::harness;

namespace {

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / ("invlearn_harness_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(INVLEARN_CLI_PATH) + " " + args + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig and2_config() {
  ExperimentConfig c;
  c.target = "and(2)";
  c.distribution = "product(3/4, 3/4)";
  c.learner = "brute_force";
  c.gamma = Rational::pow2_inverse(8);
  c.alpha = Rational(Rational::Int(1), Rational::Int(8));
  c.beta = Rational(Rational::Int(1), Rational::Int(8));
  c.seed = 1;
  return c;
}

TEST(ConfigTest, ParsesKeyValueText) {
  ExperimentConfig c;
  c.load_text(R"(
# learning run
target = or(3)
distribution = product(3/4, 1/2, 5/2^3)   # trailing comment
alpha = 1/16
gamma = 2^-10
runs = 5
chain_m = 6
suite_gammas = 1/2, 1/8
)");
  EXPECT_EQ(c.target, "or(3)");
  EXPECT_EQ(c.distribution, "product(3/4, 1/2, 5/2^3)");
  EXPECT_EQ(c.alpha, Rational(Rational::Int(1), Rational::Int(16)));
  EXPECT_EQ(c.gamma, Rational::pow2_inverse(10));
  EXPECT_EQ(c.runs, 5U);
  EXPECT_EQ(c.chain_m, std::optional<std::size_t>(6));
  ASSERT_EQ(c.suite_gammas.size(), 2U);
  c.apply_override("chain_m=auto");
  EXPECT_FALSE(c.chain_m.has_value());
  EXPECT_EQ(c.to_entries().at("gamma"), "1/1024");
}

TEST(ConfigTest, ErrorsNameTheField) {
  ExperimentConfig c;
  try {
    c.load_text("alpha = 3/2\n");
    FAIL() << "expected a field error";
  } catch (const FieldError& e) {
    EXPECT_EQ(e.field(), "alpha");
  }
  try {
    c.apply_override("colour=blue");
    FAIL() << "expected a field error";
  } catch (const FieldError& e) {
    EXPECT_EQ(e.field(), "colour");
  }
  EXPECT_THROW(c.load_text("just words\n"), ConfigError);
  EXPECT_THROW(c.apply_override("runs=-1"), FieldError);
  EXPECT_THROW(c.apply_override("target=and(3"), FieldError);
}

TEST(CallSpecTest, Parses) {
  auto s = CallSpec::parse("f", " low_degree( 2 ) ");
  EXPECT_EQ(s.name, "low_degree");
  ASSERT_EQ(s.args.size(), 1U);
  EXPECT_EQ(s.args[0], "2");
  EXPECT_EQ(CallSpec::parse("f", "brute_force").str(), "brute_force");
  EXPECT_EQ(CallSpec::parse("f", "product(3/4,1/2)").str(), "product(3/4, 1/2)");
}

TEST(RunLearnTest, ConjunctionExample) {
  auto report = run_learn(and2_config());
  EXPECT_EQ(report.status(), Status::ok);
  const auto& mu = report.summary["max_mu_error"];
  ASSERT_TRUE(mu["exact"].get<bool>());
  EXPECT_LE(Rational::parse(mu["value"].get<std::string>()), Rational(Rational::Int(1), Rational::Int(8)));
  EXPECT_EQ(report.summary["decomposition_failures"].get<int>(), 0);
}

TEST(RunLearnTest, ReportsAreReproducibleAcrossWorkerCounts) {
  auto c = and2_config();
  c.runs = 12;
  c.workers = 1;
  auto a = run_learn(c).json_text();
  c.workers = 4;
  auto b = run_learn(c).json_text();
  c.workers = 1;
  auto again = run_learn(c).json_text();
  EXPECT_EQ(a, again);
  // The echoed config differs in `workers` only.
  auto strip = [](std::string s) {
    auto pos = s.find("\"workers\"");
    return s.erase(pos, s.find('\n', pos) - pos);
  };
  EXPECT_EQ(strip(a), strip(b));
  c.seed = 2;
  EXPECT_NE(run_learn(c).json_text(), a);
}

TEST(RunLearnTest, LargeGammaNeedsOverrideAndIsFlagged) {
  auto c = and2_config();
  c.target = "and(4)";
  c.distribution = "product(3/4, 3/4, 3/4, 3/4)";
  c.gamma = Rational(Rational::Int(1), Rational::Int(2));
  try {
    run_learn(c);
    FAIL() << "expected a budget error";
  } catch (const FieldError& e) {
    EXPECT_EQ(e.field(), "gamma");
  }
  c.allow_budget_override = true;
  auto report = run_learn(c);
  EXPECT_FALSE(report.warnings.empty());
  EXPECT_FALSE(report.summary["union_bound_applicable"].get<bool>());
}

TEST(RunLearnTest, ConfigurationMistakes) {
  auto c = and2_config();
  c.target = "and(3)";
  EXPECT_THROW(run_learn(c), FieldError);
  c = and2_config();
  c.inverter = "identity";
  EXPECT_THROW(run_learn(c), FieldError);
  c = and2_config();
  c.learner = "oracle_of_delphi";
  EXPECT_THROW(run_learn(c), FieldError);
}

TEST(RunLearnTest, LowDegreeOnIdentity) {
  auto c = and2_config();
  c.target = "majority(5)";
  c.distribution = "identity(5)";
  c.inverter = "identity";
  c.learner = "low_degree(1)";
  c.runs = 3;
  auto report = run_learn(c);
  EXPECT_EQ(report.status(), Status::ok);
  EXPECT_EQ(report.summary["joint_distance"]["value"], "0");
}

TEST(InverterSuiteTest, DefaultGridIsUniform) {
  ExperimentConfig c;
  auto report = run_inverter_suite(c);
  EXPECT_EQ(report.status(), Status::ok);
  EXPECT_EQ(report.summary["bit_inv_cells"], report.summary["bit_inv_uniform"]);
  bool found = false;
  for (const auto& e : report.details["bit_inv"]) {
    if (e["p"] == "3/2^2" && e["b"] == 1 && e["gamma"] == "1/4") {
      EXPECT_EQ(e["fail"]["value"], "1/16");
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(InverterSuiteTest, EmptyGridAndBrokenFixture) {
  ExperimentConfig c;
  c.suite_k_max = 0;
  c.suite_product = false;
  auto empty = run_inverter_suite(c);
  EXPECT_EQ(empty.status(), Status::ok);
  EXPECT_TRUE(empty.details["bit_inv"].empty());

  ExperimentConfig broken;
  broken.suite_inverter = "broken_bit_inv";
  EXPECT_EQ(run_inverter_suite(broken).status(), Status::violation);
}

TEST(AmplifyTest, IdentitySamplerHasZeroDistanceEverywhere) {
  ExperimentConfig c;
  c.sampler = "identity(3)";
  c.chain_m = 4;
  c.chain_t = 2;
  c.trials = 3000;
  c.rung_trials = 500;
  auto report = run_amplification_demo(c);
  EXPECT_EQ(report.summary["weak_success"].get<double>(), 1.0);
  EXPECT_EQ(report.summary["strong_success"].get<double>(), 1.0);
  EXPECT_EQ(report.summary["distance"].get<double>(), 0.0);
}

TEST(AmplifyTest, TwoToOneReportsEveryRung) {
  ExperimentConfig c;
  c.sampler = "two_to_one(4)";
  c.chain_m = 6;
  c.chain_t = 2;
  c.trials = 5000;
  c.rung_trials = 500;
  auto report = run_amplification_demo(c);
  const auto& rungs = report.details["rungs"];
  for (const char* r : {"parameters", "weak", "strong", "distributional", "baseline"}) EXPECT_TRUE(rungs.contains(r)) << r;
  EXPECT_EQ(rungs["parameters"]["m_formula"].get<int>(), 40);
  EXPECT_LE(report.summary["distance"].get<double>(), 0.15);
  c.rungs = "strong";
  auto only = run_amplification_demo(c);
  EXPECT_TRUE(only.details["rungs"].contains("strong"));
  EXPECT_FALSE(only.details["rungs"].contains("weak"));
}

TEST(AmplifyTest, OversizedSamplerNamesTheCap) {
  ExperimentConfig c;
  c.sampler = "two_to_one(12)";
  try {
    run_amplification_demo(c);
    FAIL() << "expected a size error";
  } catch (const SizeError& e) {
    EXPECT_NE(std::string(e.what()).find("amplify_max_arity 10"), std::string::npos);
  }
}

TEST(CliTest, ExitCodesAndByteIdenticalReruns) {
  auto dir = scratch_dir();
  auto cfg = dir / "learn.cfg";
  {
    std::ofstream out(cfg);
    out << "target = and(2)\ndistribution = product(3/4, 3/4)\ngamma = 2^-8\nruns = 4\n";
  }
  auto a = dir / "a.json", b = dir / "b.json";
  ASSERT_EQ(run_cli("learn --config " + cfg.string() + " --seed 5 --out " + a.string()), 0);
  ASSERT_EQ(run_cli("learn --config " + cfg.string() + " --seed 5 --out " + b.string()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a).find("\"seed\": \"5\""), std::string::npos);

  auto csv = dir / "s.csv";
  ASSERT_EQ(run_cli("invert-suite --format csv --out " + csv.string()), 0);
  EXPECT_EQ(slurp(csv).rfind("metric,value\n", 0), 0U);

  EXPECT_EQ(run_cli("invert-suite --set suite_inverter=broken_bit_inv --out " + (dir / "x.json").string()), 3);
  EXPECT_EQ(run_cli("learn --set colour=blue"), 2);
  EXPECT_EQ(run_cli("learn --format xml"), 2);
  EXPECT_EQ(run_cli("amplify --set 'sampler=two_to_one(12)'"), 2);
  EXPECT_EQ(run_cli("amplify --set chain_m=5 --set chain_t=2 --set trials=2000 --rung distributional --out " +
                    (dir / "amp.json").string()),
            0);
  std::filesystem::remove_all(dir);
}

}  // namespace
