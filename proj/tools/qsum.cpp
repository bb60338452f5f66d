#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qsum/qsum.hpp"

namespace {

void print_groups(const qsum::ExperimentReport& report) {
  const auto& solvers = report.summary.at("solvers");
  for (const auto& g : solvers) {
    std::cout << "  " << g.at("label").get<std::string>()
              << ": mean f_opt " << g.at("f_opt").at("mean").get<double>()
              << " (std " << g.at("f_opt").at("stddev").get<double>()
              << "), mean wall time "
              << g.at("wall_time_s").at("mean").get<double>() << " s over "
              << g.at("trials").get<int>() << " trials\n";
  }
}

int cmd_run(const std::string& config_path) {
  const qsum::ExperimentConfig cfg = qsum::load_config(config_path);
  const qsum::ExperimentReport report = qsum::run_experiment(cfg);
  std::cout << "wrote " << cfg.output.directory << "/trials.csv ("
            << report.trials.size() << " rows) and summary.json\n";
  print_groups(report);
  return 0;
}

int cmd_compare(const std::string& config_path) {
  const qsum::ExperimentConfig cfg = qsum::load_config(config_path);
  const nlohmann::json cmp = qsum::compare_algorithms(cfg);
  std::cout << "wrote " << cfg.output.directory
            << "/comparison.csv and comparison.json\n";
  std::cout << "sense: " << cmp.at("sense").get<std::string>() << "\n";
  for (const auto& p : cmp.at("pairs")) {
    std::cout << "  " << p.at("a").get<std::string>() << " vs "
              << p.at("b").get<std::string>() << ": "
              << p.at("a_wins").get<long>() << "-" << p.at("b_wins").get<long>()
              << " (" << p.at("ties").get<long>() << " ties)\n";
  }
  return 0;
}

int cmd_generate(const std::string& type, int m, int n, int s,
                 std::uint64_t seed, const std::string& out) {
  if (type != "mcdpe")
    throw qsum::ConfigError("generate: unknown instance type '" + type + "'");
  const qsum::MCDPEInstance inst = qsum::generate_mcdpe(m, n, s, seed);
  qsum::save_mcdpe(out, inst);
  std::cout << "wrote " << out << " (m=" << m << ", n=" << n << ", s=" << s
            << ", seed=" << seed << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental quasi-subgradient experiment runner"};
  app.require_subcommand(1);

  std::string run_config;
  CLI::App* run = app.add_subcommand(
      "run", "Run the experiment described by a JSON config");
  run->add_option("--config", run_config, "Path to the experiment config")
      ->required();

  std::string cmp_config;
  CLI::App* compare = app.add_subcommand(
      "compare", "Run >=2 configured solvers and emit a paired comparison");
  compare->add_option("--config", cmp_config, "Path to the experiment config")
      ->required();

  std::string gen_type = "mcdpe", gen_out;
  int gen_m = 0, gen_n = 0, gen_s = 0;
  std::uint64_t gen_seed = 0;
  CLI::App* gen =
      app.add_subcommand("generate", "Generate a benchmark instance file");
  gen->add_option("--type", gen_type, "Instance type (mcdpe)");
  gen->add_option("--m", gen_m, "Number of ratio components")->required();
  gen->add_option("--n", gen_n, "Decision dimension")->required();
  gen->add_option("--s", gen_s, "Number of demand constraints")->required();
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config);
    if (compare->parsed()) return cmd_compare(cmp_config);
    return cmd_generate(gen_type, gen_m, gen_n, gen_s, gen_seed, gen_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
