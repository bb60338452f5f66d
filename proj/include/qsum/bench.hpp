#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsum/errors.hpp"
#include "qsum/problem.hpp"
#include "qsum/problems.hpp"
#include "qsum/rng.hpp"
#include "qsum/solvers.hpp"
#include "qsum/stepsize.hpp"
#include "qsum/types.hpp"

namespace qsum {

enum class ProblemType { Mcdpe, Feasibility, Example3, Example4 };
enum class Algorithm { IncSGM, RandSGM, Sgpm, Classical };
enum class McdpeMode { Direct, Feasibility };

inline const char* to_string(ProblemType t) {
  switch (t) {
    case ProblemType::Mcdpe: return "mcdpe";
    case ProblemType::Feasibility: return "feasibility";
    case ProblemType::Example3: return "example3";
    default: return "example4";
  }
}

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::IncSGM: return "incsgm";
    case Algorithm::RandSGM: return "randsgm";
    case Algorithm::Sgpm: return "sgpm";
    default: return "classical";
  }
}

inline const char* to_string(McdpeMode m) {
  return m == McdpeMode::Direct ? "direct" : "feasibility";
}

inline const char* to_string(Reorder r) {
  switch (r) {
    case Reorder::Fixed: return "fixed";
    case Reorder::Shuffle: return "shuffle";
    default: return "shift";
  }
}

struct StepsizeConfig {
  std::string rule = "constant";  // constant | diminishing | dynamic1 | dynamic2
  double v = 1.5;                 // constant value / diminishing numerator
  double gamma = 1.0;             // dynamic relaxation, in (0,2)
};

struct SolverConfig {
  Algorithm algorithm = Algorithm::IncSGM;
  StepsizeConfig stepsize;
  double tol_opt = 1e-9;
  Reorder reorder = Reorder::Fixed;
  McdpeMode mcdpe_mode = McdpeMode::Direct;
};

struct ProblemConfig {
  ProblemType type = ProblemType::Feasibility;
  int m = 5;
  int n = 10;
  int s = 10;
  std::uint64_t master_seed = 0;
  // Feasibility-family shape.
  double margin = 1.0;
  double start_distance = 3.0;
  // Target/modulus estimation effort for generated ratio instances.
  long estimate_budget = 60;
  int moduli_samples = 24;
  double target_shave = 1e-3;
};

struct RunConfig {
  long max_iterations = 1000;
  std::optional<double> target_gap;
  std::optional<long> stall_window;
  int trials = 1;
  bool parallel_trials = true;
};

struct OutputConfig {
  std::string directory = "results";
  bool emit_trajectories = false;
};

struct ExperimentConfig {
  ProblemConfig problem;
  std::vector<SolverConfig> solvers;
  RunConfig run;
  OutputConfig output;
};

// --- Config parsing ---------------------------------------------------------

namespace detail {

inline ProblemType parse_problem_type(const std::string& s,
                                      const std::string& path) {
  if (s == "mcdpe") return ProblemType::Mcdpe;
  if (s == "feasibility") return ProblemType::Feasibility;
  if (s == "example3") return ProblemType::Example3;
  if (s == "example4") return ProblemType::Example4;
  throw ConfigError(path + ": unknown problem type '" + s + "'");
}

inline Algorithm parse_algorithm(const std::string& s,
                                 const std::string& path) {
  if (s == "incsgm") return Algorithm::IncSGM;
  if (s == "randsgm") return Algorithm::RandSGM;
  if (s == "sgpm") return Algorithm::Sgpm;
  if (s == "classical") return Algorithm::Classical;
  throw ConfigError(path + ": unknown algorithm '" + s + "'");
}

inline Reorder parse_reorder(const std::string& s, const std::string& path) {
  if (s == "fixed") return Reorder::Fixed;
  if (s == "shuffle") return Reorder::Shuffle;
  if (s == "shift") return Reorder::Shift;
  throw ConfigError(path + ": unknown reorder policy '" + s + "'");
}

inline McdpeMode parse_mode(const std::string& s, const std::string& path) {
  if (s == "direct") return McdpeMode::Direct;
  if (s == "feasibility") return McdpeMode::Feasibility;
  throw ConfigError(path + ": unknown mcdpe_mode '" + s + "'");
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, const std::string& path,
            const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

template <typename T>
T require_field(const nlohmann::json& j, const char* key,
                const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

}  // namespace detail

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.solvers.empty()) throw ConfigError("solvers: need at least one");
  if (cfg.run.trials < 1) throw ConfigError("run.trials: must be >= 1");
  if (cfg.run.max_iterations < 1)
    throw ConfigError("run.max_iterations: must be >= 1");
  if (cfg.run.stall_window && *cfg.run.stall_window < 1)
    throw ConfigError("run.stall_window: must be >= 1");
  if (cfg.problem.m < 1 || cfg.problem.n < 1 || cfg.problem.s < 1)
    throw ConfigError("problem: dimensions must be >= 1");
  if (cfg.problem.m > 100 || cfg.problem.n > 1000 || cfg.problem.s > 1000)
    throw ConfigError("problem: dimensions exceed the supported cap "
                      "(m<=100, n<=1000, s<=1000)");
  if (!(cfg.problem.margin > 0.0))
    throw ConfigError("problem.margin: must be > 0");
  if (cfg.problem.estimate_budget < 1)
    throw ConfigError("problem.estimate_budget: must be >= 1");
  if (cfg.problem.moduli_samples < 2)
    throw ConfigError("problem.moduli_samples: must be >= 2");
  if (!(cfg.problem.target_shave >= 0.0) || cfg.problem.target_shave >= 1.0)
    throw ConfigError("problem.target_shave: must lie in [0,1)");
  if (cfg.output.directory.empty())
    throw ConfigError("output.directory: must be nonempty");

  const bool is_mcdpe = cfg.problem.type == ProblemType::Mcdpe;
  for (std::size_t i = 0; i < cfg.solvers.size(); ++i) {
    const auto& s = cfg.solvers[i];
    const std::string path = "solvers[" + std::to_string(i) + "]";
    if (s.tol_opt < 0.0) throw ConfigError(path + ".tol_opt: must be >= 0");
    const auto& r = s.stepsize.rule;
    if (r != "constant" && r != "diminishing" && r != "dynamic1" &&
        r != "dynamic2")
      throw ConfigError(path + ".stepsize.rule: unknown rule '" + r + "'");
    if (!(s.stepsize.v > 0.0))
      throw ConfigError(path + ".stepsize.v: must be > 0");
    if (!(s.stepsize.gamma > 0.0) || !(s.stepsize.gamma < 2.0))
      throw ConfigError(path + ".stepsize.gamma: must lie in (0,2)");
    const bool dynamic = r == "dynamic1" || r == "dynamic2";
    if (is_mcdpe && s.mcdpe_mode == McdpeMode::Direct && dynamic)
      throw ConfigError(path + ": dynamic rules need a known optimal value; "
                        "direct ratio maximization has none");
    if (is_mcdpe && s.algorithm == Algorithm::Sgpm &&
        s.mcdpe_mode != McdpeMode::Feasibility)
      throw ConfigError(path + ": sgpm requires mcdpe_mode=feasibility "
                        "(zero-target components)");
    if (is_mcdpe && cfg.run.target_gap &&
        s.mcdpe_mode == McdpeMode::Direct)
      throw ConfigError(path + ": target_gap is undefined for direct ratio "
                        "maximization (no known optimal value)");
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::get_field;
  using detail::require_field;
  ExperimentConfig cfg;

  if (!j.contains("problem")) throw ConfigError("problem: missing");
  const auto& jp = j.at("problem");
  cfg.problem.type = detail::parse_problem_type(
      require_field<std::string>(jp, "type", "problem"), "problem.type");
  cfg.problem.m = get_field<int>(jp, "m", "problem", cfg.problem.m);
  cfg.problem.n = get_field<int>(jp, "n", "problem", cfg.problem.n);
  cfg.problem.s = get_field<int>(jp, "s", "problem", cfg.problem.s);
  cfg.problem.master_seed = get_field<std::uint64_t>(
      jp, "master_seed", "problem", cfg.problem.master_seed);
  cfg.problem.margin =
      get_field<double>(jp, "margin", "problem", cfg.problem.margin);
  cfg.problem.start_distance = get_field<double>(jp, "start_distance",
                                                 "problem",
                                                 cfg.problem.start_distance);
  cfg.problem.estimate_budget = get_field<long>(
      jp, "estimate_budget", "problem", cfg.problem.estimate_budget);
  cfg.problem.moduli_samples = get_field<int>(
      jp, "moduli_samples", "problem", cfg.problem.moduli_samples);
  cfg.problem.target_shave = get_field<double>(
      jp, "target_shave", "problem", cfg.problem.target_shave);

  if (!j.contains("solvers") || !j.at("solvers").is_array() ||
      j.at("solvers").empty())
    throw ConfigError("solvers: need a nonempty array");
  for (std::size_t i = 0; i < j.at("solvers").size(); ++i) {
    const auto& js = j.at("solvers").at(i);
    const std::string path = "solvers[" + std::to_string(i) + "]";
    SolverConfig s;
    s.algorithm = detail::parse_algorithm(
        require_field<std::string>(js, "algorithm", path), path + ".algorithm");
    if (js.contains("stepsize")) {
      const auto& jr = js.at("stepsize");
      s.stepsize.rule = get_field<std::string>(jr, "rule", path + ".stepsize",
                                               s.stepsize.rule);
      s.stepsize.v = get_field<double>(jr, "v", path + ".stepsize",
                                       s.stepsize.v);
      s.stepsize.gamma = get_field<double>(jr, "gamma", path + ".stepsize",
                                           s.stepsize.gamma);
    }
    s.tol_opt = get_field<double>(js, "tol_opt", path, s.tol_opt);
    s.reorder = detail::parse_reorder(
        get_field<std::string>(js, "reorder", path, "fixed"),
        path + ".reorder");
    const char* default_mode =
        s.algorithm == Algorithm::Sgpm ? "feasibility" : "direct";
    s.mcdpe_mode = detail::parse_mode(
        get_field<std::string>(js, "mcdpe_mode", path, default_mode),
        path + ".mcdpe_mode");
    cfg.solvers.push_back(std::move(s));
  }

  if (j.contains("run")) {
    const auto& jr = j.at("run");
    cfg.run.max_iterations =
        get_field<long>(jr, "max_iterations", "run", cfg.run.max_iterations);
    if (jr.contains("target_gap"))
      cfg.run.target_gap = require_field<double>(jr, "target_gap", "run");
    if (jr.contains("stall_window"))
      cfg.run.stall_window = require_field<long>(jr, "stall_window", "run");
    cfg.run.trials = get_field<int>(jr, "trials", "run", cfg.run.trials);
    cfg.run.parallel_trials = get_field<bool>(jr, "parallel_trials", "run",
                                              cfg.run.parallel_trials);
  }

  if (j.contains("output")) {
    const auto& jo = j.at("output");
    cfg.output.directory =
        get_field<std::string>(jo, "directory", "output",
                               cfg.output.directory);
    cfg.output.emit_trajectories = get_field<bool>(
        jo, "emit_trajectories", "output", cfg.output.emit_trajectories);
  }

  validate_config(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

// --- Rows, aggregates, serialization ----------------------------------------

struct TrialSummary {
  int trial_index = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  std::string stepsize;
  double f_opt = std::numeric_limits<double>::quiet_NaN();
  long iterations = 0;
  long subgradient_evals = 0;
  double wall_time_s = 0.0;
  std::string status;
};

// Shortest decimal text that round-trips to the same binary64; locale
// independent, so CSV bytes are stable across machines.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline Aggregate aggregate_of(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("aggregate_of: empty sample");
  Aggregate a;
  a.min = xs.front();
  a.max = xs.front();
  double sum = 0.0;
  for (double x : xs) {
    sum += x;
    a.min = std::min(a.min, x);
    a.max = std::max(a.max, x);
  }
  a.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return a;
}

struct TrialAggregates {
  Aggregate f_opt;
  Aggregate wall_time;
};

inline TrialAggregates summarize_trials(const std::vector<TrialSummary>& rows) {
  if (rows.empty())
    throw std::invalid_argument("summarize_trials: empty trial list");
  std::vector<double> f, w;
  f.reserve(rows.size());
  w.reserve(rows.size());
  for (const auto& r : rows) {
    f.push_back(r.f_opt);
    w.push_back(r.wall_time_s);
  }
  return TrialAggregates{aggregate_of(f), aggregate_of(w)};
}

struct GroupSummary {
  std::string label;
  std::string algorithm;
  std::string stepsize;
  int trials = 0;
  Aggregate f_opt;
  Aggregate wall_time;
  double mean_iterations = 0.0;
  double mean_evals = 0.0;
  double mean_time_per_iteration = 0.0;
  long target_reached = 0;
  long max_iterations = 0;
  long stalled = 0;
  long aborted = 0;
};

inline const char* kTrialsCsvHeader =
    "trial,seed,algorithm,stepsize,f_opt,iterations,subgrad_evals,"
    "wall_time_s,status";

inline void write_trials_csv(const std::string& path,
                             const std::vector<TrialSummary>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << kTrialsCsvHeader << "\n";
  for (const auto& r : rows) {
    out << r.trial_index << ',' << r.seed << ',' << r.algorithm << ','
        << r.stepsize << ',' << format_double(r.f_opt) << ',' << r.iterations
        << ',' << r.subgradient_evals << ',' << format_double(r.wall_time_s)
        << ',' << r.status << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline void write_trajectory_csv(const std::string& path,
                                 const RunResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "k,f_value,stepsize,dist,evals\n";
  for (const auto& rec : result.trajectory) {
    out << rec.k << ',' << format_double(rec.f_value) << ','
        << format_double(rec.stepsize_used) << ',';
    if (rec.dist_to_known_solution)
      out << format_double(*rec.dist_to_known_solution);
    out << ',' << rec.subgradient_evals << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

// --- Per-trial assembly -------------------------------------------------------

namespace detail {

struct TrialContext {
  std::optional<MCDPEInstance> inst;
  std::optional<SumProblem> direct_problem;
  std::optional<SumProblem> shortfall_problem;
  std::optional<SumProblem> base_problem;  // non-mcdpe types
  Vec x0;
};

inline TrialContext build_trial(const ExperimentConfig& cfg,
                                std::uint64_t trial_seed) {
  TrialContext ctx;
  const auto& pc = cfg.problem;
  switch (pc.type) {
    case ProblemType::Example3: {
      ctx.base_problem = make_example3();
      ctx.x0 = Vec(1);
      ctx.x0[0] = 5.0;
      break;
    }
    case ProblemType::Example4: {
      ctx.base_problem = make_example4();
      ctx.x0 = Vec(1);
      ctx.x0[0] = 0.0;
      break;
    }
    case ProblemType::Feasibility: {
      RandomFeasibility rf =
          make_random_feasibility(pc.n, pc.m, trial_seed, pc.margin);
      ctx.x0 = start_at_distance(rf, pc.start_distance,
                                 derive_seed(trial_seed, 101));
      ctx.base_problem = std::move(rf.problem);
      break;
    }
    case ProblemType::Mcdpe: {
      MCDPEInstance inst = generate_mcdpe(pc.m, pc.n, pc.s, trial_seed);
      std::vector<double> estimates(static_cast<std::size_t>(pc.m));
      for (int i = 0; i < pc.m; ++i)
        estimates[static_cast<std::size_t>(i)] =
            estimate_component_maximum(inst, i, pc.estimate_budget);
      const std::vector<double> moduli = estimate_ratio_moduli(
          inst, pc.moduli_samples, derive_seed(trial_seed, 202));
      bool need_direct = false, need_shortfall = false;
      for (const auto& s : cfg.solvers) {
        if (s.mcdpe_mode == McdpeMode::Direct) need_direct = true;
        else need_shortfall = true;
      }
      if (need_direct)
        ctx.direct_problem = sor_direct_problem(inst, estimates, moduli);
      if (need_shortfall) {
        std::vector<double> shaved = estimates;
        for (double& t : shaved) t *= (1.0 - pc.target_shave);
        ctx.shortfall_problem = sor_to_sum_problem(inst, shaved, moduli);
      }
      ctx.x0 = Vec::Ones(pc.n);
      ctx.inst = std::move(inst);
      break;
    }
  }
  return ctx;
}

inline const SumProblem& problem_for(const TrialContext& ctx,
                                     const ExperimentConfig& cfg,
                                     const SolverConfig& solver) {
  if (cfg.problem.type != ProblemType::Mcdpe) return *ctx.base_problem;
  return solver.mcdpe_mode == McdpeMode::Direct ? *ctx.direct_problem
                                                : *ctx.shortfall_problem;
}

inline StepsizeRule build_rule(const SolverConfig& s, const SumProblem& p) {
  const auto& c = s.stepsize;
  if (c.rule == "constant") return ConstantStep{c.v};
  if (c.rule == "diminishing") return DiminishingStep::standard(c.v);
  if (!p.optimal_value)
    throw ConfigError("dynamic stepsize rule requires a known optimal value");
  if (c.rule == "dynamic1")
    return DynamicStepI{constant_gamma(c.gamma), *p.optimal_value};
  return DynamicStepII{constant_gamma(c.gamma), *p.optimal_value};
}

inline std::string stepsize_label(const SolverConfig& s) {
  return s.algorithm == Algorithm::Sgpm ? "residual" : s.stepsize.rule;
}

inline SubgradientSelector selector_for(const ExperimentConfig& cfg,
                                        const SumProblem& problem) {
  if (cfg.problem.type == ProblemType::Example3)
    return example3_adversarial_selector();
  // Canonical per-component oracles otherwise.
  return [&problem](int i, const Vec& z) {
    return problem.components[static_cast<std::size_t>(i)]
        .unit_quasi_subgradient(z);
  };
}

inline RunResult dispatch_run(const ExperimentConfig& cfg,
                              const SolverConfig& solver,
                              const SumProblem& problem, const Vec& x0,
                              std::uint64_t run_seed) {
  StopCriteria stop;
  stop.max_iterations = cfg.run.max_iterations;
  stop.target_gap = cfg.run.target_gap;
  stop.stall_window = cfg.run.stall_window;
  switch (solver.algorithm) {
    case Algorithm::IncSGM:
      return incsgm_run(problem, x0, build_rule(solver, problem), stop,
                        solver.tol_opt, solver.reorder, run_seed);
    case Algorithm::RandSGM:
      return randsgm_run(problem, x0, build_rule(solver, problem), stop,
                         run_seed, solver.tol_opt);
    case Algorithm::Sgpm:
      return sgpm_run(problem, x0, constant_gamma(solver.stepsize.gamma),
                      stop, solver.tol_opt);
    default:
      return classical_incremental_run(problem, x0,
                                       build_rule(solver, problem), stop,
                                       selector_for(cfg, problem));
  }
}

inline std::vector<TrialSummary> run_single_trial(
    const ExperimentConfig& cfg, int trial,
    std::vector<RunResult>* results_out) {
  const std::uint64_t trial_seed =
      derive_seed(cfg.problem.master_seed, static_cast<std::uint64_t>(trial));
  const TrialContext ctx = build_trial(cfg, trial_seed);

  std::vector<TrialSummary> rows;
  rows.reserve(cfg.solvers.size());
  for (std::size_t si = 0; si < cfg.solvers.size(); ++si) {
    const SolverConfig& solver = cfg.solvers[si];
    const SumProblem& problem = problem_for(ctx, cfg, solver);
    const std::uint64_t run_seed = derive_seed(trial_seed, si);

    TrialSummary row;
    row.trial_index = trial;
    row.seed = run_seed;
    row.algorithm = to_string(solver.algorithm);
    row.stepsize = stepsize_label(solver);
    try {
      RunResult result = dispatch_run(cfg, solver, problem, ctx.x0, run_seed);
      row.f_opt = ctx.inst ? sum_ratios(*ctx.inst, result.best_point)
                           : result.best_value;
      row.iterations = result.final_record().k;
      row.subgradient_evals = result.total_subgradient_evals();
      row.wall_time_s = result.wall_time_s;
      row.status = to_string(result.status);
      if (results_out) (*results_out)[si] = std::move(result);
    } catch (const ContractViolation&) {
      row.status = "contract_violation";
    } catch (const DegenerateDirection&) {
      row.status = "degenerate_direction";
    } catch (const NumericError&) {
      row.status = "numeric_error";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline unsigned thread_cap_from_env() {
  const char* s = std::getenv("QSUM_THREADS");
  if (!s) return 0;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || v < 1)
    throw ConfigError("QSUM_THREADS must be a positive integer");
  return static_cast<unsigned>(v);
}

inline unsigned worker_count(const ExperimentConfig& cfg) {
  if (!cfg.run.parallel_trials) return 1;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const unsigned cap = thread_cap_from_env();
  if (cap != 0) hw = std::min(hw, cap);
  return std::min(hw, static_cast<unsigned>(cfg.run.trials));
}

}  // namespace detail

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<TrialSummary> trials;
  std::vector<std::string> labels;  // one per configured solver
  nlohmann::json summary;
};

inline std::vector<std::string> solver_labels(const ExperimentConfig& cfg) {
  std::vector<std::string> labels;
  labels.reserve(cfg.solvers.size());
  for (const auto& s : cfg.solvers) {
    std::string base = std::string(to_string(s.algorithm)) + "-" +
                       detail::stepsize_label(s);
    std::string label = base;
    int dup = 2;
    while (std::find(labels.begin(), labels.end(), label) != labels.end())
      label = base + "-" + std::to_string(dup++);
    labels.push_back(std::move(label));
  }
  return labels;
}

inline std::vector<GroupSummary> summarize_by_solver(
    const ExperimentConfig& cfg, const std::vector<std::string>& labels,
    const std::vector<TrialSummary>& rows) {
  const std::size_t ns = cfg.solvers.size();
  std::vector<GroupSummary> groups(ns);
  for (std::size_t si = 0; si < ns; ++si) {
    GroupSummary& g = groups[si];
    g.label = labels[si];
    g.algorithm = to_string(cfg.solvers[si].algorithm);
    g.stepsize = detail::stepsize_label(cfg.solvers[si]);
    std::vector<double> f, w;
    double iter_sum = 0.0, eval_sum = 0.0, tpi_sum = 0.0;
    for (std::size_t r = si; r < rows.size(); r += ns) {
      const TrialSummary& row = rows[r];
      ++g.trials;
      if (row.status == "target_reached") ++g.target_reached;
      else if (row.status == "max_iterations") ++g.max_iterations;
      else if (row.status == "stalled") ++g.stalled;
      else ++g.aborted;
      if (!std::isnan(row.f_opt)) {
        f.push_back(row.f_opt);
        w.push_back(row.wall_time_s);
        iter_sum += static_cast<double>(row.iterations);
        eval_sum += static_cast<double>(row.subgradient_evals);
        tpi_sum += row.wall_time_s /
                   static_cast<double>(std::max<long>(1, row.iterations));
      }
    }
    if (!f.empty()) {
      g.f_opt = aggregate_of(f);
      g.wall_time = aggregate_of(w);
      g.mean_iterations = iter_sum / static_cast<double>(f.size());
      g.mean_evals = eval_sum / static_cast<double>(f.size());
      g.mean_time_per_iteration = tpi_sum / static_cast<double>(f.size());
    }
  }
  return groups;
}

namespace detail {

inline nlohmann::json aggregate_json(const Aggregate& a) {
  return nlohmann::json{
      {"mean", a.mean}, {"stddev", a.stddev}, {"min", a.min}, {"max", a.max}};
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg,
                                   const std::vector<GroupSummary>& groups) {
  nlohmann::json j;
  j["problem"] = {{"type", to_string(cfg.problem.type)},
                  {"m", cfg.problem.m},
                  {"n", cfg.problem.n},
                  {"s", cfg.problem.s},
                  {"master_seed", cfg.problem.master_seed}};
  j["trials"] = cfg.run.trials;
  if (cfg.problem.type == ProblemType::Mcdpe) {
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& s : cfg.solvers) modes.push_back(to_string(s.mcdpe_mode));
    j["mcdpe_modes"] = modes;
  }
  nlohmann::json gs = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json e;
    e["label"] = g.label;
    e["algorithm"] = g.algorithm;
    e["stepsize"] = g.stepsize;
    e["trials"] = g.trials;
    e["f_opt"] = aggregate_json(g.f_opt);
    e["wall_time_s"] = aggregate_json(g.wall_time);
    e["mean_iterations"] = g.mean_iterations;
    e["mean_subgradient_evals"] = g.mean_evals;
    e["mean_time_per_iteration_s"] = g.mean_time_per_iteration;
    e["status_counts"] = {{"target_reached", g.target_reached},
                          {"max_iterations", g.max_iterations},
                          {"stalled", g.stalled},
                          {"aborted", g.aborted}};
    gs.push_back(std::move(e));
  }
  j["solvers"] = std::move(gs);
  return j;
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << body;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace detail

// Runs every configured solver on the same per-trial instance, in
// parallel across trials (QSUM_THREADS caps workers). Writes trials.csv
// and summary.json into the output directory, plus per-run trajectory
// files when enabled. Deterministic given the config: all randomness
// derives from master_seed, and the timing column is the only
// nondeterministic output.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output.directory);

  const int T = cfg.run.trials;
  const std::size_t ns = cfg.solvers.size();
  std::vector<std::vector<TrialSummary>> per_trial(
      static_cast<std::size_t>(T));
  std::vector<std::vector<RunResult>> per_trial_results;
  if (cfg.output.emit_trajectories)
    per_trial_results.assign(static_cast<std::size_t>(T),
                             std::vector<RunResult>(ns));

  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto work = [&]() {
    for (int t = next.fetch_add(1); t < T; t = next.fetch_add(1)) {
      try {
        auto* results = cfg.output.emit_trajectories
                            ? &per_trial_results[static_cast<std::size_t>(t)]
                            : nullptr;
        per_trial[static_cast<std::size_t>(t)] =
            detail::run_single_trial(cfg, t, results);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const unsigned workers = detail::worker_count(cfg);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentReport report;
  report.config = cfg;
  report.labels = solver_labels(cfg);
  report.trials.reserve(static_cast<std::size_t>(T) * ns);
  for (const auto& rows : per_trial)
    for (const auto& row : rows) report.trials.push_back(row);

  const auto groups = summarize_by_solver(cfg, report.labels, report.trials);
  report.summary = detail::summary_json(cfg, groups);

  write_trials_csv(cfg.output.directory + "/trials.csv", report.trials);
  detail::write_text(cfg.output.directory + "/summary.json",
                     report.summary.dump(2) + "\n");
  if (cfg.output.emit_trajectories) {
    for (int t = 0; t < T; ++t)
      for (std::size_t si = 0; si < ns; ++si) {
        const auto& res = per_trial_results[static_cast<std::size_t>(t)][si];
        if (res.trajectory.empty()) continue;  // aborted run
        write_trajectory_csv(cfg.output.directory + "/traj_t" +
                                 std::to_string(t) + "_" + report.labels[si] +
                                 ".csv",
                             res);
      }
  }
  return report;
}

// Paired comparison across >= 2 configured solvers on identical per-trial
// instances: win/loss counts per pair plus the per-solver aggregates.
// Higher f_opt wins on ratio-maximization instances, lower elsewhere.
inline nlohmann::json compare_algorithms(const ExperimentConfig& cfg) {
  if (cfg.solvers.size() < 2)
    throw ConfigError("compare_algorithms: need at least two solvers");
  ExperimentReport report = run_experiment(cfg);
  const std::size_t ns = cfg.solvers.size();
  const bool higher_better = cfg.problem.type == ProblemType::Mcdpe;

  auto value_at = [&](int trial, std::size_t si) {
    return report.trials[static_cast<std::size_t>(trial) * ns + si].f_opt;
  };
  auto beats = [&](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return higher_better ? a > b : a < b;
  };

  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = i + 1; j < ns; ++j) {
      long wi = 0, wj = 0, ties = 0;
      for (int t = 0; t < cfg.run.trials; ++t) {
        const double a = value_at(t, i), b = value_at(t, j);
        if (beats(a, b)) ++wi;
        else if (beats(b, a)) ++wj;
        else ++ties;
      }
      pairs.push_back({{"a", report.labels[i]},
                       {"b", report.labels[j]},
                       {"a_wins", wi},
                       {"b_wins", wj},
                       {"ties", ties}});
    }

  nlohmann::json cmp;
  cmp["sense"] = higher_better ? "higher_f_opt_wins" : "lower_f_opt_wins";
  cmp["pairs"] = std::move(pairs);
  cmp["solvers"] = report.summary["solvers"];

  // Per-trial paired values, one row per instance.
  std::string csv = "trial";
  for (const auto& label : report.labels) csv += ",f_opt_" + label;
  csv += ",winner\n";
  for (int t = 0; t < cfg.run.trials; ++t) {
    csv += std::to_string(t);
    std::size_t best = 0;
    bool tie = false;
    for (std::size_t si = 0; si < ns; ++si) {
      const double v = value_at(t, si);
      csv += "," + format_double(v);
      if (si == 0) continue;
      if (beats(v, value_at(t, best))) {
        best = si;
        tie = false;
      } else if (!beats(value_at(t, best), v)) {
        tie = true;
      }
    }
    csv += ",";
    csv += tie ? "tie" : report.labels[best];
    csv += "\n";
  }
  detail::write_text(cfg.output.directory + "/comparison.csv", csv);
  detail::write_text(cfg.output.directory + "/comparison.json",
                     cmp.dump(2) + "\n");
  return cmp;
}

}  // namespace qsum
