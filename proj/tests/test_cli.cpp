#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "gradflow/config.hpp"

namespace fs = std::filesystem;
using gradflow::json;

namespace {

struct CliResult {
  int status;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("gradflow_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  CliResult cli(const std::string& args) {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + GRADFLOW_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
  }

  static std::string config(const std::string& name) { return std::string(GRADFLOW_CONFIG_DIR) + "/" + name; }

  fs::path dir_;
};

}  // namespace

TEST(ConfigValidation, DefaultsAreFilledIn) {
  const auto r = gradflow::validate_config(json{{"experiment", "jko"}});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.config->count("cells"), 400u);
  EXPECT_EQ(r.config->str("potential"), "none");
  EXPECT_EQ(r.config->seed, 0u);
  EXPECT_FALSE(r.config->output_dir.has_value());
  EXPECT_DOUBLE_EQ(r.config->constants.T, 1.0);
}

TEST(ConfigValidation, ReportsEveryProblemWithItsPath) {
  const json bad = {{"experiment", "jko"},
                    {"parameters", {{"stepz", 3}, {"h", "small"}, {"cells", -4}, {"potential", "cubic"}}},
                    {"constants", {{"T", "hot"}, {"q", 1}}},
                    {"extra", 1}};
  const auto r = gradflow::validate_config(bad);
  ASSERT_FALSE(r.ok());
  auto has = [&](const std::string& s) {
    for (const auto& e : r.errors)
      if (e.find(s) != std::string::npos) return true;
    return false;
  };
  EXPECT_TRUE(has("parameters.stepz: unknown key"));
  EXPECT_TRUE(has("parameters.h: expected number, got string"));
  EXPECT_TRUE(has("parameters.cells: expected nonnegative integer, got negative integer"));
  EXPECT_TRUE(has("parameters.potential: invalid value 'cubic'"));
  EXPECT_TRUE(has("constants.T: expected number, got string"));
  EXPECT_TRUE(has("constants.q: unknown key"));
  EXPECT_TRUE(has("extra: unknown key"));
  EXPECT_EQ(r.errors.size(), 7u);
}

TEST(ConfigValidation, ExperimentIsRequiredAndChecked) {
  EXPECT_FALSE(gradflow::validate_config(json::object()).ok());
  EXPECT_FALSE(gradflow::validate_config(json{{"experiment", "nope"}}).ok());
  EXPECT_FALSE(gradflow::validate_config(json{{"experiment", 3}}).ok());
  EXPECT_FALSE(gradflow::validate_config(json::array()).ok());
  EXPECT_FALSE(gradflow::validate_config_text("{\"experiment\": ").ok());
  EXPECT_FALSE(gradflow::validate_config(json{{"experiment", "jko"}, {"seed", -1}}).ok());
  EXPECT_FALSE(gradflow::validate_config(json{{"experiment", "jko"}, {"constants", {{"T", -1.0}}}}).ok());
}

TEST(ConfigValidation, ShippedConfigsAreValid) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(GRADFLOW_CONFIG_DIR)) {
    const auto r = gradflow::validate_config_file(e.path().string());
    EXPECT_TRUE(r.ok()) << e.path() << (r.errors.empty() ? "" : ": " + r.errors.front());
    ++n;
  }
  EXPECT_GE(n, 9u);
}

TEST_F(Cli, ValidateAcceptsShippedConfig) {
  const auto r = cli("validate --config \"" + config("jko.json") + "\"");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "ok\n");
}

TEST_F(Cli, ValidateNamesUnknownKey) {
  const auto p = write_config("c.json", R"({"experiment": "jko", "parameters": {"stepz": 10}})");
  const auto r = cli("validate --config \"" + p.string() + "\"");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("parameters.stepz"), std::string::npos) << r.err;
}

TEST_F(Cli, ValidateReportsTypeWithKeyPath) {
  const auto p = write_config("c.json", R"({"experiment": "particles", "parameters": {"dt": "0.01"}})");
  const auto r = cli("validate --config \"" + p.string() + "\"");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("parameters.dt: expected number, got string"), std::string::npos) << r.err;
}

TEST_F(Cli, UnreadableOrMalformedConfigIsConfigError) {
  EXPECT_EQ(cli("validate --config \"" + (dir_ / "missing.json").string() + "\"").status, 2);
  const auto p = write_config("c.json", "{ not json");
  EXPECT_EQ(cli("run --config \"" + p.string() + "\" --out \"" + (dir_ / "o").string() + "\"").status, 2);
  EXPECT_EQ(cli("frobnicate").status, 2);
  EXPECT_EQ(cli("run").status, 2);
}

TEST_F(Cli, ConfigErrorWritesNoArtifacts) {
  const auto p = write_config("c.json", R"({"parameters": {}})");
  const auto out = dir_ / "o";
  EXPECT_EQ(cli("run --config \"" + p.string() + "\" --out \"" + out.string() + "\"").status, 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(Cli, MissingOutputDirIsConfigError) {
  const auto p = write_config("c.json", R"({"experiment": "entropy"})");
  const auto r = cli("run --config \"" + p.string() + "\"");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("output_dir"), std::string::npos);
}

TEST_F(Cli, JkoRunWritesArtifacts) {
  const auto out = dir_ / "jko";
  const auto r = cli("run --config \"" + config("jko.json") + "\" --out \"" + out.string() + "\"");
  ASSERT_EQ(r.status, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS heat_flow_variance_law"), std::string::npos);
  const json s = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(s["status"], "ok");
  EXPECT_EQ(s["experiment"], "jko");
  EXPECT_EQ(s["library_version"], "1.0.0");
  EXPECT_EQ(s["seed"], 3);
  for (const char* key : {"config_hash", "generator_version", "constants", "parameters", "results", "invariants",
                          "wall_time_seconds"})
    EXPECT_TRUE(s.contains(key)) << key;
  EXPECT_FALSE(s.contains("error"));
  EXPECT_NEAR(s["results"]["variance_final"].get<double>(), 1.2, 0.02 * 1.2);
  const std::string csv = slurp(out / "result.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,time,energy,variance,mass,iters,grad_norm,w2_sq");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 102);
}

TEST_F(Cli, TransportHungarianMatchesBruteForce) {
  const auto out = dir_ / "t";
  ASSERT_EQ(cli("run --config \"" + config("transport.json") + "\" --out \"" + out.string() + "\"").status, 0);
  const json s = json::parse(slurp(out / "summary.json"));
  bool found = false;
  for (const auto& inv : s["invariants"])
    if (inv["name"] == "hungarian_equals_bruteforce") {
      found = true;
      EXPECT_TRUE(inv["passed"].get<bool>());
    }
  EXPECT_TRUE(found);
}

TEST_F(Cli, InvariantFailureExitsFour) {
  // Variance growth 2t overruns the variance of a uniform law on [-2, 2].
  const auto p = write_config("c.json", R"({"experiment": "jko", "parameters": {"cells": 80, "a": -2.0, "b": 2.0, "h": 0.01}})");
  const auto out = dir_ / "o";
  const auto r = cli("run --config \"" + p.string() + "\" --out \"" + out.string() + "\"");
  EXPECT_EQ(r.status, 4);
  EXPECT_NE(r.out.find("FAIL heat_flow_variance_law"), std::string::npos);
  const json s = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(s["status"], "invariant_failure");
  EXPECT_TRUE(fs::exists(out / "result.csv"));
}

TEST_F(Cli, RuntimeErrorExitsThree) {
  const auto p = write_config("c.json", R"({"experiment": "fokker_planck", "parameters": {"cfl": 1.5}})");
  const auto out = dir_ / "o";
  const auto r = cli("run --config \"" + p.string() + "\" --out \"" + out.string() + "\"");
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.err.find("cfl"), std::string::npos);
  const json s = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(s["status"], "error");
  EXPECT_TRUE(s.contains("error"));
  EXPECT_FALSE(fs::exists(out / "result.csv"));
}

TEST_F(Cli, SeedOverrideIsReproducible) {
  const auto a = dir_ / "a", b = dir_ / "b", c = dir_ / "c";
  const std::string cfg = "run --config \"" + config("particles.json") + "\"";
  ASSERT_EQ(cli(cfg + " --out \"" + a.string() + "\"").status, 0);
  ASSERT_EQ(cli(cfg + " --out \"" + b.string() + "\" --seed 12345").status, 0);
  ASSERT_EQ(cli(cfg + " --out \"" + c.string() + "\" --seed 12345").status, 0);
  const json sb = json::parse(slurp(b / "summary.json")), sa = json::parse(slurp(a / "summary.json"));
  EXPECT_EQ(sb["seed"], 12345);
  EXPECT_NE(sa["config_hash"], sb["config_hash"]);
  EXPECT_NE(slurp(a / "result.csv"), slurp(b / "result.csv"));
  EXPECT_EQ(slurp(b / "result.csv"), slurp(c / "result.csv"));
  EXPECT_EQ(sb["config_hash"], json::parse(slurp(c / "summary.json"))["config_hash"]);
}

TEST_F(Cli, OutOverridesConfigOutputDir) {
  const auto p = write_config("c.json", "{\"experiment\": \"entropy\", \"output_dir\": \"" + (dir_ / "cfg").string() + "\"}");
  EXPECT_EQ(cli("run --config \"" + p.string() + "\"").status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "cfg" / "summary.json"));
  EXPECT_EQ(cli("run --config \"" + p.string() + "\" --out \"" + (dir_ / "flag").string() + "\"").status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "flag" / "summary.json"));
}
