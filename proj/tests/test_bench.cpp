#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qsum/bench.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using qsum::ExperimentConfig;

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("qsum_bench_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in.good()) << p;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

// trials.csv with the wall-time column blanked, for byte comparisons.
std::string strip_wall_time(const std::string& csv) {
  std::string out;
  for (const auto& line : lines_of(csv)) {
    std::vector<std::string> fields;
    std::string f;
    std::istringstream ss(line);
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() == 9) fields[7] = "";
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += fields[i];
    }
    out += '\n';
  }
  return out;
}

json minimal_config(const std::string& type, const std::string& algo) {
  return json{{"problem", {{"type", type}}},
              {"solvers", json::array({{{"algorithm", algo}}})}};
}

template <typename Fn>
std::string config_error_message(Fn&& fn) {
  try {
    fn();
  } catch (const qsum::ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ConfigParsing, MinimalConfigGetsDefaults) {
  ExperimentConfig cfg = qsum::parse_config(minimal_config("example3", "incsgm"));
  EXPECT_EQ(cfg.problem.type, qsum::ProblemType::Example3);
  EXPECT_EQ(cfg.run.trials, 1);
  EXPECT_EQ(cfg.run.max_iterations, 1000);
  ASSERT_EQ(cfg.solvers.size(), 1u);
  EXPECT_EQ(cfg.solvers[0].algorithm, qsum::Algorithm::IncSGM);
  EXPECT_EQ(cfg.solvers[0].stepsize.rule, "constant");
  EXPECT_DOUBLE_EQ(cfg.solvers[0].stepsize.v, 1.5);
  EXPECT_EQ(cfg.solvers[0].reorder, qsum::Reorder::Fixed);
  EXPECT_EQ(cfg.output.directory, "results");
}

TEST(ConfigParsing, SgpmDefaultsToTheFeasibilityTransform) {
  ExperimentConfig cfg = qsum::parse_config(minimal_config("mcdpe", "sgpm"));
  EXPECT_EQ(cfg.solvers[0].mcdpe_mode, qsum::McdpeMode::Feasibility);
}

TEST(ConfigParsing, ErrorsNameTheOffendingField) {
  json j = minimal_config("example3", "incsgm");
  j.erase("problem");
  EXPECT_NE(config_error_message([&] { qsum::parse_config(j); }).find("problem"),
            std::string::npos);

  j = minimal_config("nonsense", "incsgm");
  EXPECT_NE(config_error_message([&] { qsum::parse_config(j); })
                .find("problem.type"),
            std::string::npos);

  j = minimal_config("example3", "mystery");
  EXPECT_NE(config_error_message([&] { qsum::parse_config(j); })
                .find("solvers[0].algorithm"),
            std::string::npos);

  j = minimal_config("example3", "incsgm");
  j["solvers"].push_back({{"algorithm", "incsgm"},
                          {"stepsize", {{"rule", "warp"}}}});
  EXPECT_NE(config_error_message([&] { qsum::parse_config(j); })
                .find("solvers[1].stepsize.rule"),
            std::string::npos);

  j = minimal_config("example3", "incsgm");
  j["problem"]["m"] = "five";
  EXPECT_NE(
      config_error_message([&] { qsum::parse_config(j); }).find("problem.m"),
      std::string::npos);

  j = minimal_config("example3", "incsgm");
  j["run"]["trials"] = 0;
  EXPECT_NE(
      config_error_message([&] { qsum::parse_config(j); }).find("run.trials"),
      std::string::npos);

  j = minimal_config("example3", "incsgm");
  j["solvers"][0]["stepsize"] = {{"gamma", 2.5}};
  EXPECT_NE(config_error_message([&] { qsum::parse_config(j); })
                .find("stepsize.gamma"),
            std::string::npos);
}

TEST(ConfigParsing, RejectsUnsupportedModeCombinations) {
  // Direct ratio maximization has no known optimum: dynamic rules and
  // target_gap stops are undefined, and sgpm needs zero-target components.
  json j = minimal_config("mcdpe", "incsgm");
  j["solvers"][0]["stepsize"] = {{"rule", "dynamic1"}};
  EXPECT_THROW(qsum::parse_config(j), qsum::ConfigError);

  j = minimal_config("mcdpe", "sgpm");
  j["solvers"][0]["mcdpe_mode"] = "direct";
  EXPECT_THROW(qsum::parse_config(j), qsum::ConfigError);

  j = minimal_config("mcdpe", "incsgm");
  j["run"]["target_gap"] = 0.1;
  EXPECT_THROW(qsum::parse_config(j), qsum::ConfigError);

  // The same rules are fine against the shortfall transform.
  j = minimal_config("mcdpe", "incsgm");
  j["solvers"][0]["mcdpe_mode"] = "feasibility";
  j["solvers"][0]["stepsize"] = {{"rule", "dynamic1"}};
  EXPECT_NO_THROW(qsum::parse_config(j));
}

TEST(ConfigParsing, LoadsFromDiskAndReportsBadFiles) {
  const fs::path dir = fresh_dir("cfg");
  const fs::path good = dir / "good.json";
  std::ofstream(good) << minimal_config("example4", "incsgm").dump();
  ExperimentConfig cfg = qsum::load_config(good.string());
  EXPECT_EQ(cfg.problem.type, qsum::ProblemType::Example4);

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  EXPECT_THROW(qsum::load_config(bad.string()), qsum::ConfigError);
  EXPECT_THROW(qsum::load_config((dir / "absent.json").string()),
               qsum::ConfigError);
  fs::remove_all(dir);
}

TEST(Aggregates, HandValues) {
  auto a = qsum::aggregate_of({1.0, 3.0});
  EXPECT_DOUBLE_EQ(a.mean, 2.0);
  EXPECT_DOUBLE_EQ(a.stddev, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(a.min, 1.0);
  EXPECT_DOUBLE_EQ(a.max, 3.0);
  auto single = qsum::aggregate_of({4.0});
  EXPECT_DOUBLE_EQ(single.mean, 4.0);
  EXPECT_DOUBLE_EQ(single.stddev, 0.0);
  EXPECT_THROW(qsum::aggregate_of({}), std::invalid_argument);
}

TEST(Aggregates, TrialRollup) {
  std::vector<qsum::TrialSummary> rows(2);
  rows[0].f_opt = 1.0;
  rows[0].wall_time_s = 0.5;
  rows[1].f_opt = 3.0;
  rows[1].wall_time_s = 0.5;
  auto agg = qsum::summarize_trials(rows);
  EXPECT_DOUBLE_EQ(agg.f_opt.mean, 2.0);
  EXPECT_DOUBLE_EQ(agg.f_opt.stddev, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(agg.wall_time.stddev, 0.0);
  EXPECT_THROW(qsum::summarize_trials({}), std::invalid_argument);
}

TEST(Formatting, ShortestRoundTripDoubles) {
  EXPECT_EQ(qsum::format_double(0.1), "0.1");
  EXPECT_EQ(qsum::format_double(2.0), "2");
  EXPECT_EQ(qsum::format_double(-1.5), "-1.5");
  EXPECT_EQ(qsum::format_double(std::numeric_limits<double>::quiet_NaN()),
            "nan");
  EXPECT_EQ(qsum::format_double(-std::numeric_limits<double>::infinity()),
            "-inf");
  const double v = 0.30000000000000004;  // one ulp above 0.3
  EXPECT_EQ(std::stod(qsum::format_double(v)), v);
}

TEST(Writers, TrajectoryRowsLeaveUnknownDistanceBlank) {
  qsum::RunResult rr;
  qsum::IterationRecord r0;
  r0.k = 0;
  r0.x = qsum::Vec::Zero(1);
  r0.f_value = 1.5;
  qsum::IterationRecord r1;
  r1.k = 1;
  r1.x = qsum::Vec::Zero(1);
  r1.f_value = 0.25;
  r1.stepsize_used = 0.5;
  r1.subgradient_evals = 1;
  r1.dist_to_known_solution = 2.0;
  rr.trajectory = {r0, r1};

  const fs::path dir = fresh_dir("traj");
  const fs::path file = dir / "t.csv";
  qsum::write_trajectory_csv(file.string(), rr);
  auto ls = lines_of(slurp(file));
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[0], "k,f_value,stepsize,dist,evals");
  EXPECT_EQ(ls[1], "0,1.5,0,,0");
  EXPECT_EQ(ls[2], "1,0.25,0.5,2,1");
  fs::remove_all(dir);
}

TEST(Experiment, StuckExampleProducesTheExactStuckValue) {
  const fs::path dir = fresh_dir("ex4");
  json j = minimal_config("example4", "incsgm");
  j["solvers"][0]["stepsize"] = {{"rule", "constant"}, {"v", 0.1}};
  j["run"] = {{"max_iterations", 50}};
  j["output"] = {{"directory", dir.string()}};
  auto report = qsum::run_experiment(qsum::parse_config(j));
  ASSERT_EQ(report.trials.size(), 1u);
  EXPECT_DOUBLE_EQ(report.trials[0].f_opt, 4.0);
  EXPECT_EQ(report.trials[0].status, "max_iterations");
  EXPECT_EQ(report.trials[0].iterations, 50);

  auto ls = lines_of(slurp(dir / "trials.csv"));
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], qsum::kTrialsCsvHeader);
  EXPECT_NE(ls[1].find(",4,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  fs::remove_all(dir);
}

TEST(Experiment, SignExampleIsSolvedBySkippingButNotByTheFoil) {
  const fs::path dir = fresh_dir("ex3");
  json j = minimal_config("example3", "incsgm");
  j["solvers"][0]["stepsize"] = {{"rule", "constant"}, {"v", 1.0}};
  j["solvers"].push_back({{"algorithm", "classical"},
                          {"stepsize", {{"rule", "constant"}, {"v", 1.0}}}});
  j["run"] = {{"max_iterations", 100}, {"trials", 3}};
  j["output"] = {{"directory", dir.string()}};
  auto cfg = qsum::parse_config(j);
  auto report = qsum::run_experiment(cfg);
  ASSERT_EQ(report.trials.size(), 6u);
  EXPECT_EQ(report.labels[0], "incsgm-constant");
  EXPECT_EQ(report.labels[1], "classical-constant");
  for (int t = 0; t < 3; ++t) {
    EXPECT_DOUBLE_EQ(report.trials[2 * t].f_opt, 0.0);
    EXPECT_EQ(report.trials[2 * t].status, "target_reached");
    EXPECT_DOUBLE_EQ(report.trials[2 * t + 1].f_opt, 5.0);
  }
  fs::remove_all(dir);
}

TEST(Experiment, RowsComeOutTrialMajorWithDedupedLabels) {
  const fs::path dir = fresh_dir("labels");
  json j = minimal_config("example3", "incsgm");
  j["solvers"].push_back(j["solvers"][0]);
  j["run"] = {{"max_iterations", 5}, {"trials", 2}};
  j["output"] = {{"directory", dir.string()}};
  auto cfg = qsum::parse_config(j);
  auto report = qsum::run_experiment(cfg);
  EXPECT_EQ(report.labels[0], "incsgm-constant");
  EXPECT_EQ(report.labels[1], "incsgm-constant-2");
  ASSERT_EQ(report.trials.size(), 4u);
  EXPECT_EQ(report.trials[0].trial_index, 0);
  EXPECT_EQ(report.trials[1].trial_index, 0);
  EXPECT_EQ(report.trials[2].trial_index, 1);
  EXPECT_EQ(report.trials[3].trial_index, 1);
  fs::remove_all(dir);
}

TEST(Experiment, ReproducibleUpToTheTimingColumn) {
  auto make = [](const fs::path& dir) {
    json j = minimal_config("feasibility", "incsgm");
    j["problem"]["m"] = 3;
    j["problem"]["n"] = 6;
    j["problem"]["master_seed"] = 7;
    j["problem"]["start_distance"] = 8.0;
    j["solvers"][0]["stepsize"] = {{"rule", "constant"}, {"v", 0.3}};
    j["solvers"].push_back({{"algorithm", "randsgm"},
                            {"stepsize", {{"rule", "constant"}, {"v", 0.3}}}});
    j["run"] = {{"max_iterations", 150}, {"trials", 4},
                {"parallel_trials", true}};
    j["output"] = {{"directory", dir.string()}, {"emit_trajectories", true}};
    return qsum::parse_config(j);
  };
  const fs::path dir_a = fresh_dir("repro_a");
  const fs::path dir_b = fresh_dir("repro_b");
  qsum::run_experiment(make(dir_a));
  qsum::run_experiment(make(dir_b));

  EXPECT_EQ(strip_wall_time(slurp(dir_a / "trials.csv")),
            strip_wall_time(slurp(dir_b / "trials.csv")));
  // Trajectories carry no timing and must be byte-identical.
  for (const char* f : {"traj_t0_incsgm-constant.csv",
                        "traj_t3_randsgm-constant.csv"}) {
    ASSERT_TRUE(fs::exists(dir_a / f)) << f;
    EXPECT_EQ(slurp(dir_a / f), slurp(dir_b / f)) << f;
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST(Experiment, EvalAccountingInvariantsHoldPerRow) {
  const fs::path dir = fresh_dir("evals");
  json j = minimal_config("feasibility", "incsgm");
  j["problem"]["m"] = 4;
  j["problem"]["n"] = 5;
  j["problem"]["start_distance"] = 6.0;
  j["solvers"][0]["stepsize"] = {{"rule", "constant"}, {"v", 0.25}};
  j["solvers"].push_back({{"algorithm", "randsgm"},
                          {"stepsize", {{"rule", "constant"}, {"v", 0.25}}}});
  j["run"] = {{"max_iterations", 200}, {"trials", 3}};
  j["output"] = {{"directory", dir.string()}};
  auto report = qsum::run_experiment(qsum::parse_config(j));
  for (const auto& row : report.trials) {
    if (row.algorithm == "randsgm") {
      EXPECT_EQ(row.subgradient_evals, row.iterations);
    } else {
      EXPECT_LE(row.subgradient_evals, 4 * row.iterations);
    }
  }
  fs::remove_all(dir);
}

TEST(Experiment, RatioInstancesReportSummedEfficiencies) {
  const fs::path dir = fresh_dir("mcdpe");
  json j = minimal_config("mcdpe", "incsgm");
  j["problem"]["m"] = 2;
  j["problem"]["n"] = 3;
  j["problem"]["s"] = 2;
  j["problem"]["estimate_budget"] = 20;
  j["problem"]["moduli_samples"] = 8;
  j["solvers"][0]["stepsize"] = {{"rule", "diminishing"}, {"v", 1.0}};
  j["solvers"].push_back({{"algorithm", "sgpm"}});
  j["run"] = {{"max_iterations", 80}, {"trials", 2}};
  j["output"] = {{"directory", dir.string()}};
  auto cfg = qsum::parse_config(j);
  auto report = qsum::run_experiment(cfg);
  ASSERT_EQ(report.trials.size(), 4u);
  for (const auto& row : report.trials) {
    EXPECT_TRUE(std::isfinite(row.f_opt)) << row.algorithm;
    EXPECT_GT(row.f_opt, 0.0) << row.algorithm;
  }
  EXPECT_EQ(report.labels[1], "sgpm-residual");
  ASSERT_TRUE(report.summary.contains("mcdpe_modes"));
  EXPECT_EQ(report.summary["mcdpe_modes"][0], "direct");
  EXPECT_EQ(report.summary["mcdpe_modes"][1], "feasibility");
  fs::remove_all(dir);
}

TEST(Experiment, ThreadCapComesFromTheEnvironment) {
  const fs::path dir = fresh_dir("threads");
  json j = minimal_config("example3", "incsgm");
  j["run"] = {{"max_iterations", 10}, {"trials", 3},
              {"parallel_trials", true}};
  j["output"] = {{"directory", dir.string()}};
  auto cfg = qsum::parse_config(j);

  setenv("QSUM_THREADS", "2", 1);
  EXPECT_NO_THROW(qsum::run_experiment(cfg));
  setenv("QSUM_THREADS", "abc", 1);
  EXPECT_THROW(qsum::run_experiment(cfg), qsum::ConfigError);
  setenv("QSUM_THREADS", "0", 1);
  EXPECT_THROW(qsum::run_experiment(cfg), qsum::ConfigError);
  unsetenv("QSUM_THREADS");
  EXPECT_NO_THROW(qsum::run_experiment(cfg));
  fs::remove_all(dir);
}

TEST(Comparison, PairedWinsOnTheSignExample) {
  const fs::path dir = fresh_dir("cmp");
  json j = minimal_config("example3", "incsgm");
  j["solvers"][0]["stepsize"] = {{"rule", "constant"}, {"v", 1.0}};
  j["solvers"].push_back({{"algorithm", "classical"},
                          {"stepsize", {{"rule", "constant"}, {"v", 1.0}}}});
  j["run"] = {{"max_iterations", 100}, {"trials", 3}};
  j["output"] = {{"directory", dir.string()}};
  auto cfg = qsum::parse_config(j);
  json cmp = qsum::compare_algorithms(cfg);

  EXPECT_EQ(cmp["sense"], "lower_f_opt_wins");
  ASSERT_EQ(cmp["pairs"].size(), 1u);
  EXPECT_EQ(cmp["pairs"][0]["a"], "incsgm-constant");
  EXPECT_EQ(cmp["pairs"][0]["b"], "classical-constant");
  EXPECT_EQ(cmp["pairs"][0]["a_wins"].get<long>(), 3);
  EXPECT_EQ(cmp["pairs"][0]["b_wins"].get<long>(), 0);
  EXPECT_EQ(cmp["pairs"][0]["ties"].get<long>(), 0);

  auto ls = lines_of(slurp(dir / "comparison.csv"));
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_EQ(ls[0], "trial,f_opt_incsgm-constant,f_opt_classical-constant,winner");
  EXPECT_EQ(ls[1], "0,0,5,incsgm-constant");
  EXPECT_TRUE(fs::exists(dir / "comparison.json"));
  fs::remove_all(dir);
}

TEST(Comparison, NeedsAtLeastTwoSolvers) {
  json j = minimal_config("example3", "incsgm");
  j["output"] = {{"directory", fresh_dir("cmp1").string()}};
  auto cfg = qsum::parse_config(j);
  EXPECT_THROW(qsum::compare_algorithms(cfg), qsum::ConfigError);
}

}  // namespace
