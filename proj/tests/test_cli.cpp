#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qsum/problems.hpp"

#ifndef QSUM_CLI_PATH
#error "QSUM_CLI_PATH must point at the built command-line binary"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(QSUM_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("qsum_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Cli, GenerateWritesTheSeededInstance) {
  const fs::path dir = fresh_dir("gen");
  const fs::path out = dir / "inst.json";
  auto r = run_cli("generate --type mcdpe --m 3 --n 4 --s 2 --seed 7 --out " +
                       out.string(),
                   dir);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("inst.json"), std::string::npos);
  ASSERT_TRUE(fs::exists(out));
  qsum::MCDPEInstance loaded = qsum::load_mcdpe(out.string());
  qsum::MCDPEInstance expected = qsum::generate_mcdpe(3, 4, 2, 7);
  EXPECT_EQ(loaded.a, expected.a);
  EXPECT_EQ(loaded.c, expected.c);
  EXPECT_EQ(loaded.B, expected.B);
  EXPECT_EQ(loaded.p_rhs, expected.p_rhs);
  EXPECT_EQ(loaded.seed, expected.seed);
  fs::remove_all(dir);
}

TEST(Cli, GenerateRequiresItsArguments) {
  const fs::path dir = fresh_dir("gen_missing");
  auto r = run_cli("generate --type mcdpe --m 3", dir);
  EXPECT_NE(r.exit_code, 0);
  EXPECT_FALSE(r.err.empty());
  fs::remove_all(dir);
}

TEST(Cli, GenerateRejectsUnknownTypes) {
  const fs::path dir = fresh_dir("gen_bad");
  auto r = run_cli("generate --type tsp --m 2 --n 2 --s 1 --out " +
                       (dir / "x.json").string(),
                   dir);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("unknown instance type"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, RunExecutesAConfigAndWritesResults) {
  const fs::path dir = fresh_dir("run");
  const fs::path results = dir / "results";
  json cfg = {{"problem", {{"type", "example3"}}},
              {"solvers", json::array(
                              {{{"algorithm", "incsgm"},
                                {"stepsize", {{"rule", "constant"}, {"v", 1.0}}}}})},
              {"run", {{"max_iterations", 50}, {"trials", 2}}},
              {"output", {{"directory", results.string()}}}};
  const fs::path cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << cfg.dump(2);

  auto r = run_cli("run --config " + cfg_path.string(), dir);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("trials.csv"), std::string::npos);
  EXPECT_NE(r.out.find("incsgm-constant"), std::string::npos);
  ASSERT_TRUE(fs::exists(results / "trials.csv"));
  ASSERT_TRUE(fs::exists(results / "summary.json"));
  const std::string csv = slurp(results / "trials.csv");
  EXPECT_EQ(csv.rfind("trial,seed,algorithm,stepsize,f_opt,", 0), 0u);
  fs::remove_all(dir);
}

TEST(Cli, CompareReportsPairedWins) {
  const fs::path dir = fresh_dir("cmp");
  const fs::path results = dir / "results";
  json cfg = {{"problem", {{"type", "example3"}}},
              {"solvers",
               json::array(
                   {{{"algorithm", "incsgm"},
                     {"stepsize", {{"rule", "constant"}, {"v", 1.0}}}},
                    {{"algorithm", "classical"},
                     {"stepsize", {{"rule", "constant"}, {"v", 1.0}}}}})},
              {"run", {{"max_iterations", 60}, {"trials", 2}}},
              {"output", {{"directory", results.string()}}}};
  const fs::path cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << cfg.dump(2);

  auto r = run_cli("compare --config " + cfg_path.string(), dir);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("sense: lower_f_opt_wins"), std::string::npos);
  EXPECT_NE(r.out.find("2-0"), std::string::npos);
  EXPECT_TRUE(fs::exists(results / "comparison.csv"));
  EXPECT_TRUE(fs::exists(results / "comparison.json"));
  fs::remove_all(dir);
}

TEST(Cli, BadConfigFailsLoudly) {
  const fs::path dir = fresh_dir("badcfg");
  const fs::path cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << R"({"problem":{"type":"example3"},"solvers":[]})";
  auto r = run_cli("run --config " + cfg_path.string(), dir);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("solvers"), std::string::npos);

  auto r2 = run_cli("run --config " + (dir / "nope.json").string(), dir);
  EXPECT_NE(r2.exit_code, 0);
  fs::remove_all(dir);
}

TEST(Cli, RequiresASubcommand) {
  const fs::path dir = fresh_dir("nosub");
  auto r = run_cli("", dir);
  EXPECT_NE(r.exit_code, 0);
  fs::remove_all(dir);
}

}  // namespace
